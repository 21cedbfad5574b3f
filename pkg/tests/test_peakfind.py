"""Kuiper statistic, CDF crossing splits, and the recursive peak finder.

Hand-evaluated step-CDF values are frozen as exact expectations; the
synthetic peak recovery is cross-checked against an independent kernel
density estimate.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import gaussian_kde

from lineclouds import (
    CandidateSet,
    DegenerateWindow,
    Line3,
    LineCloud,
    NeighborList,
    NoCandidates,
    TooFewCandidates,
    candidates,
    closest_points,
    empirical_cdf,
    find_peak,
    kuiper,
    split_peaks,
)


def lc_with_center_x_axis(neighbor_lines):
    anchors = [np.zeros(3)] + [l.anchor for l in neighbor_lines]
    dirs = [np.array([1.0, 0.0, 0.0])] + [l.direction for l in neighbor_lines]
    return LineCloud(np.array(anchors), np.array(dirs))


def neighbor_list(center, idxs):
    idxs = np.asarray(idxs, dtype=np.int64)
    return NeighborList(center, idxs, np.zeros(len(idxs)))


class TestCandidates:
    def test_intersecting_neighbor_gives_its_parameter(self):
        crossing = Line3(np.array([2.5, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
        lc = lc_with_center_x_axis([crossing])
        cs = candidates(lc, 0, neighbor_list(0, [1]))
        assert cs.line_index == 0
        assert cs.betas.tolist() == [2.5]

    def test_count_bounded_by_neighbor_count(self):
        a = Line3(np.array([1.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))
        b = Line3(np.array([-2.0, 3.0, 1.0]), np.array([0.0, 1.0, 0.0]))
        lc = lc_with_center_x_axis([a, b])
        cs = candidates(lc, 0, neighbor_list(0, [1, 2]))
        assert len(cs.betas) <= 2

    def test_beta_reproduces_the_closest_point(self):
        rng = np.random.default_rng(3)
        anchors = rng.uniform(-2, 2, (40, 3))
        raw = rng.standard_normal((40, 3))
        lc = LineCloud(anchors, raw / np.linalg.norm(raw, axis=1)[:, None])
        cs = candidates(lc, 0, neighbor_list(0, list(range(1, 40))))
        li = lc.line(0)
        for beta in cs.betas:
            p_hat = li.anchor + beta * li.direction
            # find the matching neighbor and verify the common-perpendicular
            # certificate: p_hat is the closest point of line 0 to it
            best = min(
                np.linalg.norm(
                    p_hat - (li.anchor + closest_points(li, lc.line(j)).beta_a * li.direction)
                )
                for j in range(1, 40)
                if abs(float(np.dot(li.direction, lc.line(j).direction))) < 1 - 1e-9
            )
            assert best <= 1e-9

    def test_all_parallel_neighbors_raise(self):
        p1 = Line3(np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]))
        p2 = Line3(np.array([0.0, 0.0, 5.0]), np.array([-1.0, 0.0, 0.0]))
        lc = lc_with_center_x_axis([p1, p2])
        with pytest.raises(NoCandidates):
            candidates(lc, 0, neighbor_list(0, [1, 2]))

    def test_empty_neighbor_list_raises(self):
        lc = lc_with_center_x_axis(
            [Line3(np.array([1.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))]
        )
        with pytest.raises(NoCandidates):
            candidates(lc, 0, neighbor_list(0, []))

    def test_center_mismatch_rejected(self):
        lc = lc_with_center_x_axis(
            [Line3(np.array([1.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))]
        )
        with pytest.raises(ValueError):
            candidates(lc, 0, neighbor_list(1, [0]))


class TestEmpiricalCdf:
    def test_strict_inequality_at_a_sample(self):
        assert empirical_cdf(np.array([1.0, 2.0, 3.0]), 2.0) == pytest.approx(1 / 3)

    def test_extremes(self):
        betas = np.array([0.2, 0.4, 0.9])
        assert empirical_cdf(betas, 0.0) == 0.0
        assert empirical_cdf(betas, 1.5) == 1.0

    def test_interior_value(self):
        assert empirical_cdf(np.array([0.0, 0.5, 1.0]), 0.75) == pytest.approx(2 / 3)


class TestKuiper:
    def test_three_point_hand_value(self):
        stats = kuiper(np.array([0.0, 0.5, 1.0]), (0.0, 1.0))
        assert stats.d_plus == pytest.approx(1 / 3, rel=1e-15)
        assert stats.d_minus == pytest.approx(1 / 3, rel=1e-15)
        assert stats.ks == pytest.approx(2 / 3, rel=1e-15)
        # D+ is attained just before the first sample, D- at the last
        assert stats.x_plus == 0.0
        assert stats.x_minus == 1.0

    def test_uniform_grid_is_near_zero(self):
        n = 1000
        betas = np.arange(1, n + 1) / (n + 1)
        stats = kuiper(betas, (float(betas.min()), float(betas.max())))
        assert stats.ks <= 0.01

    def test_point_mass_is_near_one(self):
        rng = np.random.default_rng(0)
        betas = 0.3 + rng.uniform(-1e-4, 1e-4, 200)
        stats = kuiper(betas, (-0.7, 1.3))
        assert stats.ks >= 0.99

    def test_degenerate_window_raises(self):
        with pytest.raises(DegenerateWindow):
            kuiper(np.array([0.5, 0.5, 0.5]), (0.5, 0.5), eps_w=1e-12)

    def test_fewer_than_two_in_window_raises(self):
        with pytest.raises(ValueError):
            kuiper(np.array([0.1, 0.9]), (0.4, 0.6))

    @given(
        st.lists(st.floats(-100, 100), min_size=2, max_size=80),
        st.integers(0, 10_000),
    )
    @settings(max_examples=200, deadline=None)
    def test_bounds_and_argmax_membership(self, values, salt):
        betas = np.array(values)
        lo, hi = float(betas.min()), float(betas.max())
        if hi - lo <= 1e-9:
            return
        stats = kuiper(betas, (lo, hi))
        assert 0.0 <= stats.d_plus <= 1.0
        assert 0.0 <= stats.d_minus <= 1.0
        assert 0.0 <= stats.ks <= 2.0
        assert lo <= stats.x_plus <= hi
        assert lo <= stats.x_minus <= hi
        assert stats.x_plus in betas
        assert stats.x_minus in betas


class TestSplitPeaks:
    def test_unimodal_cluster_single_window(self):
        # truncated normal: unimodal with tails that never drop below the
        # uniform reference enough to justify a cut
        rng = np.random.default_rng(1)
        draws = rng.normal(0.5, 0.02, 300)
        betas = draws[np.abs(draws - 0.5) <= 0.03][:60]
        assert len(betas) == 60
        windows = split_peaks(betas, (float(betas.min()), float(betas.max())))
        assert len(windows) == 1

    def test_two_tight_clusters_split_between_them(self):
        rng = np.random.default_rng(2)
        betas = np.concatenate(
            [rng.normal(0.2, 0.005, 30), rng.normal(0.8, 0.005, 30)]
        )
        lo, hi = float(betas.min()), float(betas.max())
        windows = split_peaks(betas, (lo, hi))
        assert len(windows) == 2
        boundary = windows[0][1]
        assert windows[1][0] == boundary
        assert 0.3 < boundary < 0.7
        assert windows[0][0] == lo and windows[1][1] == hi

    def test_windows_partition_the_input_window(self):
        rng = np.random.default_rng(5)
        betas = np.concatenate(
            [rng.normal(-3, 0.01, 25), rng.normal(0, 0.01, 25), rng.normal(3, 0.01, 25)]
        )
        lo, hi = float(betas.min()), float(betas.max())
        windows = split_peaks(betas, (lo, hi))
        assert windows[0][0] == lo
        assert windows[-1][1] == hi
        for (a, b), (c, d) in zip(windows, windows[1:]):
            assert b == c
            assert a < b

    def test_uniform_grid_no_confident_sub_window(self):
        n = 400
        betas = np.arange(1, n + 1) / (n + 1)
        lo, hi = float(betas.min()), float(betas.max())
        global_ks = kuiper(betas, (lo, hi)).ks
        for wlo, whi in split_peaks(betas, (lo, hi)):
            inside = betas[(betas >= wlo) & (betas <= whi)]
            if len(inside) < 2 or whi - wlo <= 1e-9:
                continue
            assert kuiper(inside, (wlo, whi)).ks <= global_ks + 0.05


def spiked_candidates(seed, loc=3.7, scale=0.05, n_spike=40, n_noise=10):
    rng = np.random.default_rng(seed)
    betas = np.concatenate(
        [rng.normal(loc, scale, n_spike), rng.uniform(0, 10, n_noise)]
    )
    return CandidateSet(0, betas)


def kde_mode(betas, bandwidth):
    """Independent oracle: argmax of a fixed-bandwidth Gaussian KDE."""
    kde = gaussian_kde(betas, bw_method=bandwidth / betas.std(ddof=1))
    grid = np.linspace(betas.min(), betas.max(), 20001)
    return float(grid[np.argmax(kde(grid))])


class TestFindPeak:
    def test_spike_in_uniform_noise_recovered(self):
        for seed in range(8):
            cs = spiked_candidates(seed)
            result = find_peak(cs)
            assert result.status == "found"
            assert abs(result.beta_hat - 3.7) <= 0.05
            assert abs(result.beta_hat - kde_mode(cs.betas, 0.05)) <= 0.05
            lo, hi = result.interval
            assert lo <= result.beta_hat <= hi

    def test_all_equal_candidates_degenerate(self):
        result = find_peak(CandidateSet(0, np.full(12, 2.25)))
        assert result.status == "degenerate"
        assert result.beta_hat == 2.25
        assert result.interval == (2.25, 2.25)

    def test_uniform_candidates_stay_wide(self):
        inside_central_half = 0
        ks_values = []
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            result = find_peak(CandidateSet(0, rng.uniform(0.0, 1.0, 50)))
            assert result.status == "found"
            ks_values.append(result.ks_final)
            if 0.25 <= result.beta_hat <= 0.75:
                inside_central_half += 1
        assert inside_central_half >= 900
        assert np.mean(ks_values) < 0.4

    def test_too_few_candidates_is_rejected_status(self):
        result = find_peak(CandidateSet(0, np.array([1.0, 2.0, 3.0])))
        assert result.status == "rejected"
        assert math.isnan(result.beta_hat)

    def test_empty_candidate_set_raises(self):
        with pytest.raises(TooFewCandidates):
            find_peak(CandidateSet(0, np.array([])))

    @staticmethod
    def lattice_candidates(seed):
        """Spike plus noise on a dyadic lattice (multiples of 1/64).

        On this lattice every subtraction, scaling by a power of two, and
        shift by a dyadic offset is exact in float64, so the affine and
        reversal invariances can be asserted bitwise rather than to a
        tolerance.
        """
        rng = np.random.default_rng(seed)
        spike = 3.5 + rng.integers(0, 9, 40) / 64.0
        noise = rng.integers(0, 641, 15) / 64.0
        return CandidateSet(0, np.concatenate([spike, noise]))

    def test_affine_invariance_exact_on_lattice(self):
        cs = self.lattice_candidates(7)
        base = find_peak(cs)
        a, b = 0.5, 512.25
        mapped = find_peak(CandidateSet(0, a * cs.betas + b))
        assert mapped.beta_hat == a * base.beta_hat + b
        assert mapped.ks_final == base.ks_final
        assert mapped.n_recursions == base.n_recursions
        assert mapped.interval == (a * base.interval[0] + b, a * base.interval[1] + b)

    def test_affine_invariance_generic(self):
        cs = spiked_candidates(7)
        base = find_peak(cs)
        a, b = 2.0, -1.375
        mapped = find_peak(CandidateSet(0, a * cs.betas + b))
        assert mapped.beta_hat == pytest.approx(a * base.beta_hat + b, rel=1e-9)
        assert mapped.ks_final == pytest.approx(base.ks_final, rel=1e-9)

    def test_reversal_invariance(self):
        cs = self.lattice_candidates(11)
        base = find_peak(cs)
        mirrored = find_peak(CandidateSet(0, -cs.betas))
        # sample-valued outputs mirror exactly; the statistic only to ulps,
        # because the rank terms i/n and (n-i)/n round independently
        assert mirrored.beta_hat == -base.beta_hat
        assert mirrored.interval == (-base.interval[1], -base.interval[0])
        assert mirrored.ks_final == pytest.approx(base.ks_final, abs=1e-14)

    def test_order_independence(self):
        cs = spiked_candidates(13)
        rng = np.random.default_rng(0)
        shuffled = cs.betas.copy()
        rng.shuffle(shuffled)
        a = find_peak(cs)
        b = find_peak(CandidateSet(0, shuffled))
        assert a.beta_hat == b.beta_hat
        assert a.ks_final == b.ks_final
        assert a.n_recursions == b.n_recursions
        assert a.interval == b.interval

    def test_recursion_depth_bounded(self):
        for seed in range(30):
            cs = spiked_candidates(seed, scale=0.001)
            result = find_peak(cs, max_depth=20)
            assert result.n_recursions <= 20

    def test_interval_contains_estimate_and_shrinks(self):
        cs = spiked_candidates(17)
        result = find_peak(cs)
        lo, hi = result.interval
        assert lo <= result.beta_hat <= hi
        assert lo >= cs.betas.min() and hi <= cs.betas.max()
        if result.n_recursions > 0:
            assert (hi - lo) < (cs.betas.max() - cs.betas.min())

    def test_two_cluster_input_selects_one_cluster(self):
        rng = np.random.default_rng(23)
        betas = np.concatenate(
            [rng.normal(1.0, 0.01, 40), rng.normal(9.0, 0.01, 25)]
        )
        result = find_peak(CandidateSet(0, betas))
        assert result.status == "found"
        # the larger cluster wins the max-KS window selection
        assert abs(result.beta_hat - 1.0) < 0.1

    def test_dump_trace_csv(self, tmp_path):
        cs = spiked_candidates(29)
        path = tmp_path / "trace.csv"
        find_peak(cs, dump_path=path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "beta,window_level"
        assert len(rows) > len(cs.betas)  # at least one full level plus header

    @given(
        st.lists(
            st.floats(-50, 50, allow_nan=False, allow_infinity=False),
            min_size=5,
            max_size=120,
        )
    )
    @settings(max_examples=150, deadline=None)
    def test_never_crashes_and_respects_bounds(self, values):
        result = find_peak(CandidateSet(0, np.array(values)))
        assert result.status in ("found", "degenerate", "rejected")
        if result.status == "found":
            assert 0.0 <= result.ks_final <= 2.0
            lo, hi = result.interval
            assert lo <= result.beta_hat <= hi
