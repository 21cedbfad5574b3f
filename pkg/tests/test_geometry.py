import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lineclouds.errors import ParallelLines
from lineclouds.geometry import (
    ClosestPair,
    Line3,
    closest_points,
    line_line_distance,
    point_line_distance,
    point_point_distance,
    sample_uniform_direction,
    sample_uniform_directions,
)


def random_line(rng) -> Line3:
    anchor = rng.uniform(-5, 5, 3)
    return Line3(anchor, sample_uniform_direction(rng))


# ---------------------------------------------------------------------------
# independent oracle: closest pair by grid bracketing + nested ternary search
# ---------------------------------------------------------------------------

def _dist2_at(a: Line3, b: Line3, s: float, t: float) -> float:
    diff = a.point_at(s) - b.point_at(t)
    return float(diff @ diff)


def _ternary_min(f, lo, hi, iters=200):
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def oracle_closest_pair(a: Line3, b: Line3, radius=40.0) -> ClosestPair:
    """Brute-force closest pair: coarse 2D grid, then nested ternary search.

    Deliberately ignorant of the closed-form solution. The squared distance
    is a convex quadratic in (s, t), so for fixed s the inner minimization
    is convex in t and the resulting envelope is convex in s.
    """

    def inner_t(s):
        return _ternary_min(lambda t: _dist2_at(a, b, s, t), -radius, radius)

    grid = np.linspace(-radius, radius, 81)
    best_s = min(grid, key=lambda s: _dist2_at(a, b, s, inner_t(s)))
    span = grid[1] - grid[0]
    s_star = _ternary_min(
        lambda s: _dist2_at(a, b, s, inner_t(s)), best_s - span, best_s + span
    )
    t_star = inner_t(s_star)
    return ClosestPair(s_star, t_star, math.sqrt(_dist2_at(a, b, s_star, t_star)))


# ---------------------------------------------------------------------------
# point-point and point-line
# ---------------------------------------------------------------------------

def test_point_point_examples():
    assert point_point_distance((0, 0, 0), (0, 0, 0)) == 0.0
    assert point_point_distance((0, 0, 0), (1, 0, 0)) == 1.0
    assert point_point_distance((1, 2, 2), (0, 0, 0)) == 3.0


def test_point_line_orthogonal_offset():
    line = Line3((0, 0, 0), (1, 0, 0))
    beta, dist = point_line_distance((0, 1, 0), line)
    assert beta == 0.0
    assert dist == 1.0


def test_point_line_on_line():
    line = Line3((1, 1, 1), (0, 0, 1))
    beta, dist = point_line_distance(line.point_at(2.5), line)
    assert dist <= 1e-12
    assert beta == pytest.approx(2.5, abs=1e-12)


def test_point_line_axis_aligned():
    line = Line3((0, 0, 0), (1, 0, 0))
    beta, dist = point_line_distance((3, 4, 0), line)
    assert beta == 3.0
    assert dist == 4.0


@given(st.integers(0, 10_000))
def test_point_line_is_minimum(seed):
    rng = np.random.default_rng(seed)
    line = random_line(rng)
    p = rng.uniform(-5, 5, 3)
    beta, dist = point_line_distance(p, line)
    for db in rng.uniform(-3, 3, 8):
        assert dist <= np.linalg.norm(p - line.point_at(beta + db)) + 1e-12


# ---------------------------------------------------------------------------
# closest points between lines
# ---------------------------------------------------------------------------

def test_closest_orthogonal_skew():
    a = Line3((0, 0, 0), (1, 0, 0))
    b = Line3((0, 0, 1), (0, 1, 0))
    got = closest_points(a, b)
    assert got.beta_a == 0.0
    assert got.beta_b == 0.0
    assert got.distance == 1.0


def test_closest_intersecting():
    a = Line3((0, 0, 0), (1, 0, 0))
    b = Line3((0, 0, 0), (0, 1, 0))
    got = closest_points(a, b)
    assert got.distance == 0.0
    assert got.beta_a == 0.0
    assert got.beta_b == 0.0


@pytest.mark.parametrize("seed", [3, 17, 52, 981, 4444])
def test_closest_matches_grid_ternary_oracle(seed):
    rng = np.random.default_rng(seed)
    a, b = random_line(rng), random_line(rng)
    got = closest_points(a, b)
    want = oracle_closest_pair(a, b)
    assert got.beta_a == pytest.approx(want.beta_a, abs=1e-6)
    assert got.beta_b == pytest.approx(want.beta_b, abs=1e-6)
    assert got.distance == pytest.approx(want.distance, abs=1e-6)


def test_parallel_lines_raise():
    a = Line3((0, 0, 0), (1, 0, 0))
    b = Line3((0, 1, 0), (-1, 0, 0))
    with pytest.raises(ParallelLines):
        closest_points(a, b)


def test_line_line_distance_handles_parallel():
    a = Line3((0, 0, 0), (1, 0, 0))
    b = Line3((0, 3, 4), (1, 0, 0))
    assert line_line_distance(a, b) == pytest.approx(5.0, abs=1e-12)


def test_line_line_distance_matches_closest_points():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a, b = random_line(rng), random_line(rng)
        assert line_line_distance(a, b) == closest_points(a, b).distance


@given(st.integers(0, 10_000))
@settings(max_examples=200)
def test_closest_swap_symmetry(seed):
    rng = np.random.default_rng(seed)
    a, b = random_line(rng), random_line(rng)
    ab = closest_points(a, b)
    ba = closest_points(b, a)
    assert abs(ab.beta_a - ba.beta_b) <= 1e-12
    assert abs(ab.beta_b - ba.beta_a) <= 1e-12
    assert abs(ab.distance - ba.distance) <= 1e-12


@given(st.integers(0, 10_000))
@settings(max_examples=200)
def test_closest_segment_perpendicular(seed):
    rng = np.random.default_rng(seed)
    a, b = random_line(rng), random_line(rng)
    pair = closest_points(a, b)
    seg = a.point_at(pair.beta_a) - b.point_at(pair.beta_b)
    norm = np.linalg.norm(seg)
    if norm > 1e-12:
        assert abs(seg @ a.direction) / norm <= 1e-7
        assert abs(seg @ b.direction) / norm <= 1e-7


@given(st.integers(0, 10_000))
@settings(max_examples=100)
def test_closest_is_lower_bound_on_point_distances(seed):
    rng = np.random.default_rng(seed)
    a, b = random_line(rng), random_line(rng)
    dist = closest_points(a, b).distance
    for s, t in rng.uniform(-10, 10, (16, 2)):
        assert dist <= np.linalg.norm(a.point_at(s) - b.point_at(t)) + 1e-9


@given(st.integers(0, 10_000))
@settings(max_examples=100)
def test_line_representation_invariance(seed):
    # negating the direction and re-anchoring denote the same line
    rng = np.random.default_rng(seed)
    a, b = random_line(rng), random_line(rng)
    beta0 = float(rng.uniform(-4, 4))
    a_flipped = Line3(a.point_at(beta0), -a.direction)
    d1 = closest_points(a, b).distance
    d2 = closest_points(a_flipped, b).distance
    assert abs(d1 - d2) <= 1e-9


def test_line3_rejects_non_unit_direction():
    with pytest.raises(ValueError):
        Line3((0, 0, 0), (1, 1, 0))
    with pytest.raises(ValueError):
        Line3((0, 0, np.nan), (1, 0, 0))


# ---------------------------------------------------------------------------
# direction sampling
# ---------------------------------------------------------------------------

def test_direction_coordinate_means():
    rng = np.random.default_rng(123)
    dirs = sample_uniform_directions(rng, 1_000_000)
    assert np.all(np.abs(dirs.mean(axis=0)) <= 0.005)


def test_direction_hemisphere_balance():
    rng = np.random.default_rng(321)
    dirs = sample_uniform_directions(rng, 1_000_000)
    frac = float((dirs[:, 2] > 0).mean())
    assert abs(frac - 0.5) <= 0.002


def test_direction_z_uniform_kstest():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(55)
    dirs = sample_uniform_directions(rng, 100_000)
    # z coordinate of a uniform direction is Uniform(-1, 1)
    res = scipy_stats.kstest(dirs[:, 2], "uniform", args=(-1.0, 2.0))
    assert res.pvalue > 0.001


def test_direction_seed_determinism():
    first = sample_uniform_direction(np.random.default_rng(42))
    second = sample_uniform_direction(np.random.default_rng(42))
    assert first.tobytes() == second.tobytes()


def test_direction_batch_matches_scalar():
    batch = sample_uniform_directions(np.random.default_rng(9), 4)
    rng = np.random.default_rng(9)
    singles = np.array([sample_uniform_direction(rng) for _ in range(4)])
    assert np.array_equal(batch, singles)


def test_directions_are_unit():
    dirs = sample_uniform_directions(np.random.default_rng(1), 1000)
    assert np.max(np.abs(np.linalg.norm(dirs, axis=1) - 1.0)) <= 1e-9
