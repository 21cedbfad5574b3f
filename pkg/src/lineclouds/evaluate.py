"""Error reporting, the two-line Monte Carlo experiment, sparsity sweeps,
and statistical outlier removal."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSamples, MisalignedInputs
from .linecloud import PointCloud, lift, sparsify
from .neighborhood import knn_points
from .recover import RecoveryConfig, RecoveryOutput, recover, recover_with_oracle

CDF_THRESHOLD_COUNT = 200
CDF_THRESHOLD_FLOOR = 1e-4


@dataclass
class ErrorReport:
    """Distance between recovered and true positions, on valid estimates.

    per_point_errors is aligned with the estimate array; invalid slots
    hold NaN. cdf rows are (threshold, fraction of valid errors <= it).
    """

    per_point_errors: np.ndarray
    cdf: np.ndarray
    median: float
    mean: float
    p90: float
    valid_fraction: float


@dataclass
class MonteCarloReport:
    samples: int
    p_closer: float
    cdf: np.ndarray  # rows (x, P(X <= x)) on a fixed grid over [0, 5]


def _scene_diameter(points: np.ndarray) -> float:
    span = points.max(axis=0) - points.min(axis=0)
    return float(np.sqrt((span * span).sum()))


def error_report(true_points: np.ndarray, output) -> ErrorReport:
    """Compare estimates against index-aligned true positions.

    ``output`` is a RecoveryOutput or a bare PointEstimates. For a
    sparsified cloud pass the surviving subset of the truth,
    ``pc.points[lc.source_indices]``, so row i matches line i.
    """
    true_points = np.asarray(true_points, dtype=np.float64)
    est = output.estimates if isinstance(output, RecoveryOutput) else output
    if true_points.ndim != 2 or true_points.shape[1] != 3:
        raise MisalignedInputs(f"true points must be (N, 3), got {true_points.shape}")
    if len(true_points) != len(est.positions):
        raise MisalignedInputs(
            f"{len(true_points)} true points vs {len(est.positions)} estimates"
        )
    errors = np.full(len(true_points), np.nan)
    idx = np.flatnonzero(est.valid)
    if idx.size:
        diff = est.positions[idx] - true_points[idx]
        errors[idx] = np.sqrt((diff * diff).sum(axis=1))
    valid_errors = errors[idx]
    diameter = max(_scene_diameter(true_points), CDF_THRESHOLD_FLOOR * 10)
    thresholds = np.geomspace(CDF_THRESHOLD_FLOOR, diameter, CDF_THRESHOLD_COUNT)
    if idx.size:
        fractions = np.searchsorted(np.sort(valid_errors), thresholds, side="right") / idx.size
        top = float(valid_errors.max())
    else:
        fractions = np.zeros(CDF_THRESHOLD_COUNT)
        top = diameter
    cdf = np.column_stack([thresholds, fractions])
    # close the curve so the last row always reads 1.0
    cdf = np.vstack([cdf, [max(top, thresholds[-1]), 1.0 if idx.size else 0.0]])
    if idx.size:
        median = float(np.median(valid_errors))
        mean = float(valid_errors.mean())
        p90 = float(np.quantile(valid_errors, 0.9))
    else:
        median = mean = p90 = float("nan")
    return ErrorReport(
        per_point_errors=errors,
        cdf=cdf,
        median=median,
        mean=mean,
        p90=p90,
        valid_fraction=idx.size / max(len(true_points), 1),
    )


_MC_CHUNK = 1 << 18


def montecarlo_two_point(samples: int, seed: int = 0) -> MonteCarloReport:
    """Estimate how far the two-random-lines midpoint construction lands
    from the first of two unit-separated points.

    Points sit at the origin and (1, 0, 0); each draws an independent
    uniformly random line direction. X is the distance from the origin to
    the closest point on its line to the other line. Parallel draws are
    resampled. Returns P(X < 1) and the CDF of X on a grid over [0, 5].
    """
    if samples < 1:
        raise InvalidSamples(f"need at least 1 sample, got {samples}")
    xs = np.empty(samples)
    done = 0
    chunk_id = 0
    while done < samples:
        want = min(_MC_CHUNK, samples - done)
        rng = np.random.default_rng((seed, chunk_id))
        chunk_id += 1
        got = 0
        while got < want:
            m = want - got
            raw = rng.standard_normal((2, m, 3))
            va = raw[0] / np.sqrt((raw[0] ** 2).sum(axis=1))[:, None]
            vb = raw[1] / np.sqrt((raw[1] ** 2).sum(axis=1))[:, None]
            # w0 = p - p1 = (-1, 0, 0); mirrors the scalar closest-point math
            b = (va * vb).sum(axis=1)
            d = -va[:, 0]
            e = -vb[:, 0]
            cross = np.cross(va, vb)
            cross2 = (cross * cross).sum(axis=1)
            ok = cross2 >= 1e-18
            s = (b[ok] * e[ok] - d[ok]) / (1.0 - b[ok] * b[ok])
            take = min(s.size, m)
            xs[done + got : done + got + take] = np.abs(s[:take])
            got += take
        done += want
    grid = np.linspace(0.0, 5.0, 1001)
    fractions = np.searchsorted(np.sort(xs), grid, side="right") / samples
    return MonteCarloReport(
        samples=samples,
        p_closer=float((xs < 1.0).mean()),
        cdf=np.column_stack([grid, fractions]),
    )


def _preset_for(fraction: float, family: str) -> RecoveryConfig:
    density = "sparse" if fraction <= 0.05 else "dense"
    return RecoveryConfig.from_preset(f"{family}-{density}")


def sparsity_sweep(
    pc_true: PointCloud,
    fractions,
    cfg: RecoveryConfig = RecoveryConfig(),
    seed: int = 0,
    family: str = "indoor",
    oracle_k: int | None = None,
) -> list[tuple[float, ErrorReport]]:
    """Lift once, then sparsify + recover + score at each kept fraction.

    Neighbor counts come from the family's density presets (sparse at or
    below 5% kept). Other knobs are taken from cfg. With oracle_k set,
    recovery runs the true-neighborhood median baseline instead.
    """
    lc_full = lift(pc_true, seed=seed)
    results = []
    for fraction in fractions:
        lc = sparsify(lc_full, fraction, seed=seed) if fraction < 1.0 else lc_full
        truth = pc_true.points[lc.source_indices]
        preset = _preset_for(fraction, family)
        run_cfg = RecoveryConfig(
            k_coarse=preset.k_coarse,
            k_refine=preset.k_refine,
            iterations=cfg.iterations,
            ks_stop=cfg.ks_stop,
            min_candidates=cfg.min_candidates,
            max_depth=cfg.max_depth,
            seed=cfg.seed,
            fallback=cfg.fallback,
            coarse_iterations=cfg.coarse_iterations,
            threads=cfg.threads,
        )
        if oracle_k is None:
            output = recover(lc, run_cfg)
        else:
            subset = PointCloud(truth)
            output = recover_with_oracle(lc, subset, k=oracle_k, cfg=run_cfg)
        results.append((float(fraction), error_report(truth, output)))
    return results


def remove_statistical_outliers(
    pc: PointCloud, k_nn: int = 20, alpha: float = 2.0, threads: int = 1
) -> PointCloud:
    """Drop points whose mean k-NN distance exceeds a global threshold.

    The threshold is mean + alpha * std over all N * k_nn neighbor
    distances, not over the per-point means. The distinction matters on
    the second application: the pooled std includes within-neighborhood
    spread, so reapplying the filter to an already clean cloud removes
    (almost) nothing instead of shaving another tail off.
    """
    keys, _ = knn_points(pc, k_nn, threads=threads)
    mean_dist = keys.mean(axis=1)
    cut = keys.mean() + alpha * keys.std()
    keep = np.flatnonzero(mean_dist <= cut)
    payloads = None
    if pc.payloads is not None:
        payloads = [pc.payloads[i] for i in keep]
    return PointCloud(pc.points[keep].copy(), payloads=payloads)


def write_cdf_csv(report: ErrorReport, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fraction"])
        for threshold, fraction in report.cdf:
            writer.writerow([f"{threshold:.17g}", f"{fraction:.17g}"])


def write_mc_cdf_csv(report: MonteCarloReport, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "fraction"])
        for x, fraction in report.cdf:
            writer.writerow([f"{x:.17g}", f"{fraction:.17g}"])


def write_sweep_csv(results, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fraction", "median", "mean", "p90", "valid_fraction"])
        for fraction, report in results:
            writer.writerow(
                [
                    f"{fraction:.17g}",
                    f"{report.median:.17g}",
                    f"{report.mean:.17g}",
                    f"{report.p90:.17g}",
                    f"{report.valid_fraction:.17g}",
                ]
            )
