"""Core 3D primitives: lines, distances, closest points, direction sampling.

Conventions
-----------
Points and directions are length-3 float64 numpy arrays. A line is stored
as an anchor point plus a unit direction and parameterized as
``l(beta) = anchor + beta * direction``. The sign of the direction is
arbitrary: (anchor, v) and (anchor, -v) denote the same line.

The scalar arithmetic here is written out component by component, in the
same order as the compiled kernels in ``_kernels``, so that both paths
produce bit-identical distances. Do not "simplify" these expressions with
numpy vector calls without checking that property (test_neighborhood
enforces it against the exhaustive scan). In particular square roots must
stay ``math.sqrt``: ``x ** 0.5`` goes through libm pow, which is not
always correctly rounded, while compiled code emits the hardware sqrt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParallelLines

# Two unit directions are treated as parallel when the norm of their cross
# product falls below this. Comparisons are done on the squared norm.
PARALLEL_EPS = 1e-9
_PARALLEL_EPS2 = PARALLEL_EPS * PARALLEL_EPS

_UNIT_TOL = 1e-9


def _as_vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class Line3:
    """An infinite 3D line: unit direction through an anchor point."""

    anchor: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "anchor", _as_vec3(self.anchor, "anchor"))
        d = _as_vec3(self.direction, "direction")
        norm = float(np.linalg.norm(d))
        if abs(norm - 1.0) > _UNIT_TOL:
            raise ValueError(f"direction must be unit length, |v| = {norm!r}")
        object.__setattr__(self, "direction", d)

    def point_at(self, beta: float) -> np.ndarray:
        return self.anchor + beta * self.direction


@dataclass(frozen=True)
class ClosestPair:
    """Mutually nearest points of two lines, as parameters on each line."""

    beta_a: float
    beta_b: float
    distance: float


def point_point_distance(a, b) -> float:
    a = _as_vec3(a, "a")
    b = _as_vec3(b, "b")
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    dz = a[2] - b[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def point_line_distance(p, line: Line3) -> tuple[float, float]:
    """Orthogonal projection of ``p`` onto ``line``.

    Returns ``(beta, distance)`` where ``line.point_at(beta)`` is the
    nearest point of the line.
    """
    p = _as_vec3(p, "p")
    ox, oy, oz = line.anchor
    vx, vy, vz = line.direction
    rx = p[0] - ox
    ry = p[1] - oy
    rz = p[2] - oz
    beta = rx * vx + ry * vy + rz * vz
    dx = rx - beta * vx
    dy = ry - beta * vy
    dz = rz - beta * vz
    return float(beta), math.sqrt(dx * dx + dy * dy + dz * dz)


def _closest_raw(ax, ay, az, avx, avy, avz, bx, by, bz, bvx, bvy, bvz):
    """Shared scalar core. Returns (s, t, distance, cross2).

    Parallel pairs take the s = -d, t = 0 branch, which turns the distance
    into the standard distance between parallel lines. Callers decide
    whether that branch is an error (closest_points) or a valid ranking key
    (line_line_distance).
    """
    wx = ax - bx
    wy = ay - by
    wz = az - bz
    b = avx * bvx + avy * bvy + avz * bvz
    d = avx * wx + avy * wy + avz * wz
    e = bvx * wx + bvy * wy + bvz * wz
    cx = avy * bvz - avz * bvy
    cy = avz * bvx - avx * bvz
    cz = avx * bvy - avy * bvx
    cross2 = cx * cx + cy * cy + cz * cz
    if cross2 < _PARALLEL_EPS2:
        s = -d
        t = 0.0
    else:
        denom = 1.0 - b * b
        s = (b * e - d) / denom
        t = (e - b * d) / denom
    dx = wx + s * avx - t * bvx
    dy = wy + s * avy - t * bvy
    dz = wz + s * avz - t * bvz
    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
    return s, t, dist, cross2


def closest_points(a: Line3, b: Line3) -> ClosestPair:
    """Foot points of the common perpendicular of two non-parallel lines.

    Raises ParallelLines when the cross product of the directions has norm
    below PARALLEL_EPS; there is no unique closest pair in that case.
    """
    s, t, dist, cross2 = _closest_raw(
        a.anchor[0], a.anchor[1], a.anchor[2],
        a.direction[0], a.direction[1], a.direction[2],
        b.anchor[0], b.anchor[1], b.anchor[2],
        b.direction[0], b.direction[1], b.direction[2],
    )
    if cross2 < _PARALLEL_EPS2:
        raise ParallelLines(f"|a.dir x b.dir| = {math.sqrt(cross2):.3e} < {PARALLEL_EPS:g}")
    return ClosestPair(beta_a=float(s), beta_b=float(t), distance=float(dist))


def line_line_distance(a: Line3, b: Line3) -> float:
    """Minimum distance between two lines, defined for parallel pairs too.

    This is the ranking key used by the line-line neighbor search.
    """
    _, _, dist, _ = _closest_raw(
        a.anchor[0], a.anchor[1], a.anchor[2],
        a.direction[0], a.direction[1], a.direction[2],
        b.anchor[0], b.anchor[1], b.anchor[2],
        b.direction[0], b.direction[1], b.direction[2],
    )
    return float(dist)


def sample_uniform_direction(rng: np.random.Generator) -> np.ndarray:
    """One direction drawn uniformly from the unit sphere.

    Normalizing a 3-vector of independent standard normals is rejection
    free and exactly uniform by the rotational symmetry of the Gaussian.
    """
    while True:
        v = rng.standard_normal(3)
        norm = float(np.linalg.norm(v))
        if norm > 1e-12:
            return v / norm


def sample_uniform_directions(rng: np.random.Generator, n: int) -> np.ndarray:
    """Batch version of sample_uniform_direction, shape (n, 3)."""
    v = rng.standard_normal((n, 3))
    norms = np.linalg.norm(v, axis=1)
    bad = norms <= 1e-12
    while bad.any():  # pragma: no cover - probability ~ 0
        v[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms[bad] = np.linalg.norm(v[bad], axis=1)
        bad = norms <= 1e-12
    return v / norms[:, None]
