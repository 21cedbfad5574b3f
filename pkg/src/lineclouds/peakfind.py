"""Peak finding on candidate parameters along a line.

Given the multiset of closest-point parameters (betas) of one line against
its neighbor lines, locate the value where candidates concentrate. The
point estimate for the line is the density peak of that 1D sample; the
concentration test compares the empirical CDF against a uniform reference
on the current window and recurses into the interval where the two CDFs
disagree the most.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DegenerateWindow, NoCandidates, TooFewCandidates

DEFAULT_KS_STOP = 0.4
DEFAULT_MIN_CANDIDATES = 5
DEFAULT_MAX_DEPTH = 20


@dataclass(frozen=True)
class CandidateSet:
    line_index: int
    betas: np.ndarray

    def __len__(self):
        return int(self.betas.size)


@dataclass(frozen=True)
class PeakResult:
    beta_hat: float
    ks_final: float
    interval: tuple[float, float]
    n_recursions: int
    status: str  # found | degenerate | rejected


class KuiperStats(NamedTuple):
    d_minus: float
    d_plus: float
    x_minus: float
    x_plus: float
    ks: float


def candidates(lc, i: int, neighbors) -> CandidateSet:
    """Closest-point parameters of line i against each neighbor line.

    Parallel neighbor pairs contribute nothing. Raises NoCandidates when
    every neighbor was parallel or the list was empty.
    """
    if neighbors.center_index != i:
        raise ValueError(
            f"neighbor list centered on {neighbors.center_index}, expected {i}"
        )
    idx = np.asarray(neighbors.neighbor_indices, dtype=np.int64)
    out = np.empty(idx.size, dtype=np.float64)
    ax, ay, az = lc._soa_anchors()
    ux, uy, uz = lc._soa_directions()
    count = _kernels.candidate_betas(ax, ay, az, ux, uy, uz, i, idx, out)
    if count == 0:
        raise NoCandidates(f"line {i}: no non-parallel neighbors")
    return CandidateSet(line_index=i, betas=out[:count].copy())


def empirical_cdf(betas, x: float) -> float:
    """F(x) = fraction of candidates strictly below x."""
    bs = np.asarray(betas, dtype=np.float64)
    if bs.size == 0:
        raise ValueError("empirical_cdf needs at least one candidate")
    return float(np.count_nonzero(bs < x)) / bs.size


def _kuiper_sorted(bs: np.ndarray, lo: float, hi: float) -> KuiperStats:
    # bs sorted ascending and contained in [lo, hi]; hi > lo
    n = bs.size
    fu = (bs - lo) / (hi - lo)
    i = np.arange(1, n + 1)
    d_plus = i / n - fu
    d_minus = fu - (i - 1) / n
    ip = int(np.argmax(d_plus))
    im = int(np.argmax(d_minus))
    return KuiperStats(
        d_minus=float(d_minus[im]),
        d_plus=float(d_plus[ip]),
        x_minus=float(bs[im]),
        x_plus=float(bs[ip]),
        ks=float(d_minus[im] + d_plus[ip]),
    )


def kuiper(betas, window: tuple[float, float], eps_w: float = 0.0) -> KuiperStats:
    """Kuiper comparison of in-window candidates against a uniform reference.

    The reference CDF is uniform on the window itself. The maxima of the
    one-sided deviations are attained at sample points of the step CDF;
    x_minus and x_plus report those sample locations. ks = d_minus + d_plus.
    """
    lo, hi = float(window[0]), float(window[1])
    if hi - lo <= eps_w:
        raise DegenerateWindow(f"window width {hi - lo:.3e} <= {eps_w:.3e}")
    bs = np.sort(np.asarray(betas, dtype=np.float64))
    bs = bs[(bs >= lo) & (bs <= hi)]
    if bs.size < 2:
        raise ValueError("kuiper needs at least 2 candidates inside the window")
    return _kuiper_sorted(bs, lo, hi)


# A cut must open a gap whose one-sided CDF deficit reaches this many
# standard Brownian-bridge units (deficit >= SPLIT_DEPTH_SIG / sqrt(n)).
# Fluctuations of an iid sample's CDF scale as 1/sqrt(n), so any fixed
# multiple of 1/n would either shatter plain samples at their tail gaps
# or do nothing at all; 1.2 keeps every genuine inter-cluster valley in
# the calibration scenarios while a uniform sample stays whole ~95% of
# the time.
SPLIT_DEPTH_SIG = 1.2


def split_peaks(betas, window: tuple[float, float]) -> list[tuple[float, float]]:
    """Partition the window at upward crossings of the uniform CDF.

    A cut is placed where the uniform reference F_U crosses the empirical
    step CDF from below, i.e. at the start of a gap between density peaks,
    and is kept only when that gap's deficit is statistically significant
    (see SPLIT_DEPTH_SIG). Returns [(lo, hi)] when no crossing qualifies.
    """
    lo, hi = float(window[0]), float(window[1])
    bs = np.sort(np.asarray(betas, dtype=np.float64))
    bs = bs[(bs >= lo) & (bs <= hi)]
    n = bs.size
    if n < 2 or hi <= lo:
        return [(lo, hi)]
    width = hi - lo
    fu = (bs - lo) / width
    d_minus = fu - np.arange(n) / n  # deficit summands F_U(b_j) - (j-1)/n
    threshold = SPLIT_DEPTH_SIG / np.sqrt(n)
    cuts = []
    for i in range(1, n):
        x = lo + (i / n) * width  # where F_U reaches the post-sample level
        if not (bs[i - 1] < x <= bs[i]):
            continue
        # depth of the sparse region the cut opens, up to the point where
        # the empirical CDF overtakes the reference again
        depth = 0.0
        for j in range(i, n):
            if d_minus[j] <= 0.0 and j > i:
                break
            if d_minus[j] > depth:
                depth = float(d_minus[j])
        if depth >= threshold:
            cuts.append(float(x))
    if not cuts:
        return [(lo, hi)]
    edges = [lo] + cuts + [hi]
    return [(edges[m], edges[m + 1]) for m in range(len(edges) - 1)]


def find_peak(
    cs: CandidateSet,
    ks_stop: float = DEFAULT_KS_STOP,
    min_candidates: int = DEFAULT_MIN_CANDIDATES,
    max_depth: int = DEFAULT_MAX_DEPTH,
    dump_path=None,
) -> PeakResult:
    """Locate the concentration peak of a candidate set.

    The initial window spans the candidates. If the top-level Kuiper value
    already falls below ks_stop the sample is treated as structureless and
    the median of the whole window is returned; checking this before any
    split keeps uniform noise from being carved into arbitrary sub-windows.
    Otherwise the window is split at upward CDF crossings once, the
    sub-window with the largest Kuiper value is selected, and the window
    then shrinks to the interval between the two deviation maxima until
    the statistic drops below ks_stop, too few candidates remain, the
    window stops shrinking, or max_depth is hit.

    ``dump_path``, if given, receives a CSV of (beta, window_level) where
    window_level counts how many nested windows contained the candidate;
    useful for plotting the recursion.
    """
    bs = np.sort(np.asarray(cs.betas, dtype=np.float64))
    if bs.size == 0:
        raise TooFewCandidates(f"line {cs.line_index}: empty candidate set")

    windows: list[tuple[float, float]] = []

    def finish(status, beta, ks, nrec, lo, hi):
        if dump_path is not None:
            _dump_trace(dump_path, bs, windows)
        return PeakResult(
            beta_hat=float(beta),
            ks_final=float(ks),
            interval=(float(lo), float(hi)),
            n_recursions=nrec,
            status=status,
        )

    lo, hi = float(bs[0]), float(bs[-1])
    windows.append((lo, hi))
    if bs.size < min_candidates:
        return finish("rejected", np.nan, np.nan, 0, lo, hi)
    eps_w = 1e-9 * (hi - lo + 1.0)
    if hi - lo <= eps_w:
        # all candidates coincide; ks has no meaning on a zero-width window
        return finish("degenerate", float(np.median(bs)), 0.0, 0, lo, hi)

    stats = _kuiper_sorted(bs, lo, hi)
    ks = stats.ks
    nrec = 0
    if ks >= ks_stop:
        sub = split_peaks(bs, (lo, hi))
        if len(sub) > 1:
            best = None
            for a, b in sub:
                sel = bs[(bs >= a) & (bs <= b)]
                if sel.size < min_candidates or b - a <= eps_w:
                    continue
                cand = _kuiper_sorted(sel, a, b)
                if best is None or cand.ks > best[0].ks:
                    best = (cand, a, b)
            if best is not None:
                stats, lo, hi = best
                ks = stats.ks
                windows.append((lo, hi))
        while ks >= ks_stop and nrec < max_depth:
            nlo, nhi = sorted((stats.x_minus, stats.x_plus))
            if nhi - nlo >= hi - lo:
                break  # the deviation maxima span the whole window
            lo, hi = nlo, nhi
            nrec += 1
            windows.append((lo, hi))
            sel = bs[(bs >= lo) & (bs <= hi)]
            if sel.size < min_candidates:
                break
            if hi - lo <= eps_w:
                return finish("degenerate", float(np.median(sel)), ks, nrec, lo, hi)
            stats = _kuiper_sorted(sel, lo, hi)
            ks = stats.ks

    sel = bs[(bs >= lo) & (bs <= hi)]
    return finish("found", float(np.median(sel)), ks, nrec, lo, hi)


def _dump_trace(path, bs, windows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("beta,window_level\n")
        for beta in bs:
            level = sum(1 for lo, hi in windows if lo <= beta <= hi)
            fh.write(f"{beta!r},{level}\n")
