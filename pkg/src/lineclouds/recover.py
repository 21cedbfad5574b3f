"""Iterative point recovery from a line cloud.

Iteration 1 knows nothing but the lines, so each line's candidate points
come from its K nearest lines. Every following iteration has point
estimates to work with: a line's neighbors are then the estimates nearest
to it, filtered by the reverse lookup (lines nearest to its own estimate),
and the candidates are recomputed from the lines of those neighbors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ConfigError, KTooLarge
from .neighborhood import (
    PointEstimates,
    intersect,
    knn_line_line,
    knn_line_point,
    knn_point_line,
    oracle_neighbors,
)
from .peakfind import CandidateSet, find_peak

ON_LINE_TOL = 1e-9

# neighbor count schedules, (k_coarse, k_refine) per scene family and density
PRESETS = {
    "indoor-dense": (250, 100),
    "indoor-sparse": (50, 25),
    "outdoor-dense": (500, 200),
    "outdoor-sparse": (100, 50),
}


@dataclass(frozen=True)
class RecoveryConfig:
    k_coarse: int = 250
    k_refine: int = 100
    iterations: int = 3
    ks_stop: float = 0.4
    min_candidates: int = 5
    max_depth: int = 20
    seed: int = 0
    fallback: str = "keep-previous"  # or "invalidate"
    # how many leading iterations use line-line neighborhoods before the
    # estimate-based ranking takes over; configurable since either choice
    # is defensible
    coarse_iterations: int = 1
    threads: int = 1

    def validate(self):
        if not (self.k_coarse >= self.k_refine >= self.min_candidates):
            raise ConfigError(
                f"need k_coarse >= k_refine >= min_candidates, got "
                f"{self.k_coarse} / {self.k_refine} / {self.min_candidates}"
            )
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.coarse_iterations < 1:
            raise ConfigError("coarse_iterations must be >= 1")
        if not (0.0 < self.ks_stop <= 2.0):
            raise ConfigError(f"ks_stop must be in (0, 2], got {self.ks_stop}")
        if self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")
        if self.fallback not in ("keep-previous", "invalidate"):
            raise ConfigError(f"unknown fallback policy {self.fallback!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "RecoveryConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
        k_coarse, k_refine = PRESETS[name]
        cfg = cls(k_coarse=k_coarse, k_refine=k_refine)
        return replace(cfg, **overrides) if overrides else cfg


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    valid_count: int
    mean_candidate_count: float
    mean_ks: float


@dataclass
class RecoveryOutput:
    estimates: PointEstimates
    per_iteration_stats: list[IterationStats]
    config: RecoveryConfig
    wall_time: float = 0.0
    iterate_history: list[np.ndarray] = field(default_factory=list)


def _verify_on_lines(lc, positions, valid):
    """Every valid estimate must sit on its line; guards kernel regressions."""
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        return
    rel = positions[idx] - lc.anchors[idx]
    dirs = lc.directions[idx]
    beta = (rel * dirs).sum(axis=1)
    perp = rel - beta[:, None] * dirs
    worst = float(np.sqrt((perp * perp).sum(axis=1)).max())
    if worst > ON_LINE_TOL:
        raise RuntimeError(
            f"estimate left its line by {worst:.3e} (> {ON_LINE_TOL:g}); "
            "this indicates a kernel or indexing bug"
        )


def _peak_pass(lc, neighbor_of, indices, cfg, positions, valid, first_iteration):
    """One sweep of candidates + peak finding over ``indices``.

    neighbor_of(i) returns the neighbor index array for line i. Mutates
    positions/valid in place and returns (mean_candidates, mean_ks).
    """
    ax, ay, az = lc._soa_anchors()
    ux, uy, uz = lc._soa_directions()
    buf = np.empty(max(cfg.k_coarse, cfg.k_refine), dtype=np.float64)
    counts = 0
    ks_sum = 0.0
    ks_n = 0
    invalidate = first_iteration or cfg.fallback == "invalidate"
    for i in indices:
        nbr = neighbor_of(i)
        count = _kernels.candidate_betas(ax, ay, az, ux, uy, uz, i, nbr, buf)
        counts += count
        result = None
        if count:
            result = find_peak(
                CandidateSet(i, buf[:count].copy()),
                ks_stop=cfg.ks_stop,
                min_candidates=cfg.min_candidates,
                max_depth=cfg.max_depth,
            )
        if result is None or result.status == "rejected":
            if invalidate:
                valid[i] = False
                positions[i] = np.nan
            # keep-previous: leave the slot as the last iteration wrote it
            continue
        positions[i, 0] = lc.anchors[i, 0] + result.beta_hat * lc.directions[i, 0]
        positions[i, 1] = lc.anchors[i, 1] + result.beta_hat * lc.directions[i, 1]
        positions[i, 2] = lc.anchors[i, 2] + result.beta_hat * lc.directions[i, 2]
        valid[i] = True
        if result.status == "found":
            ks_sum += result.ks_final
            ks_n += 1
    mean_candidates = counts / max(len(indices), 1)
    mean_ks = ks_sum / ks_n if ks_n else float("nan")
    return mean_candidates, mean_ks


def recover(lc, cfg: RecoveryConfig = RecoveryConfig(), keep_iterates: bool = False) -> RecoveryOutput:
    """Run the full coarse + refine recovery loop on a line cloud."""
    cfg.validate()
    n = len(lc)
    if n <= cfg.k_coarse:
        raise KTooLarge(f"k_coarse = {cfg.k_coarse} needs more than {cfg.k_coarse} lines, have {n}")
    t0 = time.perf_counter()
    positions = np.full((n, 3), np.nan)
    valid = np.zeros(n, dtype=bool)
    stats: list[IterationStats] = []
    history: list[np.ndarray] = []
    for it in range(cfg.iterations):
        if it < cfg.coarse_iterations:
            nbr_lists = knn_line_line(lc, cfg.k_coarse, threads=cfg.threads)

            def neighbor_of(i, _lists=nbr_lists):
                return _lists[i].neighbor_indices
        else:
            est = PointEstimates(positions.copy(), valid.copy())
            npl = knn_point_line(lc, est, cfg.k_refine, threads=cfg.threads)
            nlp = {
                nl.center_index: nl
                for nl in knn_line_point(lc, est, cfg.k_refine, threads=cfg.threads)
            }

            def neighbor_of(i, _npl=npl, _nlp=nlp):
                both = _nlp.get(i)
                if both is not None:
                    joint = intersect(_npl[i], both)
                    if len(joint.neighbor_indices):
                        return joint.neighbor_indices
                return _npl[i].neighbor_indices

        mean_candidates, mean_ks = _peak_pass(
            lc, neighbor_of, range(n), cfg, positions, valid, first_iteration=(it == 0)
        )
        stats.append(
            IterationStats(
                iteration=it + 1,
                valid_count=int(valid.sum()),
                mean_candidate_count=float(mean_candidates),
                mean_ks=float(mean_ks),
            )
        )
        if keep_iterates:
            history.append(positions.copy())
    _verify_on_lines(lc, positions, valid)
    return RecoveryOutput(
        estimates=PointEstimates(positions, valid),
        per_iteration_stats=stats,
        config=cfg,
        wall_time=time.perf_counter() - t0,
        iterate_history=history,
    )


def recover_with_oracle(
    lc,
    pc_true,
    k: int = 50,
    outlier_fraction: float = 0.0,
    cfg: RecoveryConfig = RecoveryConfig(),
    estimator: str = "median",
) -> RecoveryOutput:
    """Single-pass recovery using true point neighborhoods.

    The neighbor lists come from the original points (optionally corrupted
    with random outliers), not from anything recoverable; this is the
    upper-bound baseline the full pipeline is compared against. The
    estimator is the plain median of the candidates by default, or the
    full peak finder with estimator="find_peak".
    """
    cfg.validate()
    if estimator not in ("median", "find_peak"):
        raise ConfigError(f"unknown estimator {estimator!r}")
    n = len(lc)
    if n != len(pc_true):
        raise ValueError("line cloud and truth are not index-aligned")
    t0 = time.perf_counter()
    neighborhoods = oracle_neighbors(
        pc_true, k, outlier_fraction, seed=cfg.seed, threads=cfg.threads
    )
    positions = np.full((n, 3), np.nan)
    valid = np.zeros(n, dtype=bool)
    ax, ay, az = lc._soa_anchors()
    ux, uy, uz = lc._soa_directions()
    buf = np.empty(k, dtype=np.float64)
    counts = 0
    ks_sum = 0.0
    ks_n = 0
    for i in range(n):
        count = _kernels.candidate_betas(
            ax, ay, az, ux, uy, uz, i, neighborhoods[i].neighbor_indices, buf
        )
        counts += count
        if count == 0:
            continue
        if estimator == "median":
            beta = float(np.median(buf[:count]))
        else:
            result = find_peak(
                CandidateSet(i, buf[:count].copy()),
                ks_stop=cfg.ks_stop,
                min_candidates=cfg.min_candidates,
                max_depth=cfg.max_depth,
            )
            if result.status == "rejected":
                continue
            beta = result.beta_hat
            if result.status == "found":
                ks_sum += result.ks_final
                ks_n += 1
        positions[i] = lc.anchors[i] + beta * lc.directions[i]
        valid[i] = True
    _verify_on_lines(lc, positions, valid)
    stats = [
        IterationStats(
            iteration=1,
            valid_count=int(valid.sum()),
            mean_candidate_count=counts / max(n, 1),
            mean_ks=ks_sum / ks_n if ks_n else float("nan"),
        )
    ]
    return RecoveryOutput(
        estimates=PointEstimates(positions, valid),
        per_iteration_stats=stats,
        config=cfg,
        wall_time=time.perf_counter() - t0,
    )
