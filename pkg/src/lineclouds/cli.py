"""Command line front end.

Each subcommand is a thin wrapper over one library call. Every run prints
a JSON summary (schema version 1) to stdout; file artifacts go to --out,
and each artifact gets a ``<out>.manifest.json`` next to it recording the
fully resolved command so the run can be replayed bit-exactly with
``main(manifest["argv"])``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(unreadable or inconsistent inputs), 3 internal failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback
from importlib import metadata

import numpy as np

from .errors import ConfigError, LineCloudError
from .evaluate import (
    error_report,
    montecarlo_two_point,
    remove_statistical_outliers,
    write_cdf_csv,
    write_mc_cdf_csv,
)
from .linecloud import (
    LineCloud,
    SceneSpec,
    lift,
    read_lines,
    read_ply,
    reanchor,
    sparsify,
    synth_scene,
    write_lines,
    write_ply,
)
from .neighborhood import PointEstimates
from .recover import PRESETS, RecoveryConfig, recover

SCHEMA_VERSION = 1
# offset so anchor repositioning never shares a bit stream with direction draws
_REANCHOR_SEED_OFFSET = 0x9E3779B9


def _version_string() -> str:
    try:
        return "v" + metadata.version("lineclouds")
    except metadata.PackageNotFoundError:
        return "v0.0.0-unpackaged"


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract says 1."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _manifest(subcommand, argv, config, inputs, outputs, seed, wall_time):
    return {
        "schema": SCHEMA_VERSION,
        "subcommand": subcommand,
        "argv": list(argv),
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "seed": seed,
        "version": _version_string(),
        "wall_time": wall_time,
    }


def _write_manifest(manifest, out_path):
    path = f"{out_path}.manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _emit(subcommand, result, manifest):
    print(
        json.dumps(
            {
                "schema": SCHEMA_VERSION,
                "subcommand": subcommand,
                "result": result,
                "manifest": manifest,
            },
            indent=2,
            sort_keys=True,
        )
    )


def _read_sidecar(path, key):
    sidecar = f"{path}.{key}.json"
    if not os.path.exists(sidecar):
        return None
    with open(sidecar) as fh:
        data = json.load(fh)
    return np.asarray(data[key], dtype=np.int64)


def _write_sidecar(path, key, values):
    sidecar = f"{path}.{key}.json"
    with open(sidecar, "w") as fh:
        json.dump({"schema": SCHEMA_VERSION, key: [int(v) for v in values]}, fh)
        fh.write("\n")
    return sidecar


def cmd_synth(args, argv):
    spec = SceneSpec(
        kind=args.kind,
        extent=args.extent,
        points_per_unit_area=args.density,
        noise_sigma=args.noise,
        seed=args.seed,
        path=args.path,
    )
    t0 = time.perf_counter()
    pc = synth_scene(spec)
    write_ply(pc, args.out)
    wall = time.perf_counter() - t0
    config = {
        "kind": args.kind,
        "extent": args.extent,
        "density": args.density,
        "noise": args.noise,
        "path": args.path,
    }
    manifest = _manifest("synth", argv, config, {}, {"out": args.out}, args.seed, wall)
    _write_manifest(manifest, args.out)
    _emit("synth", {"points": len(pc), "out": args.out}, manifest)
    return 0


def cmd_lift(args, argv):
    t0 = time.perf_counter()
    pc = read_ply(getattr(args, "in"))
    lc = lift(pc, seed=args.seed)
    # privacy posture: exported anchors are fresh random points on each
    # line, never the original positions
    lc = reanchor(lc, seed=args.seed + _REANCHOR_SEED_OFFSET)
    write_lines(lc, args.out)
    wall = time.perf_counter() - t0
    manifest = _manifest(
        "lift", argv, {}, {"in": getattr(args, "in")}, {"out": args.out}, args.seed, wall
    )
    _write_manifest(manifest, args.out)
    _emit("lift", {"lines": len(lc), "out": args.out}, manifest)
    return 0


def cmd_sparsify(args, argv):
    t0 = time.perf_counter()
    in_path = getattr(args, "in")
    lc = read_lines(in_path)
    kept = sparsify(lc, args.fraction, seed=args.seed)
    source = kept.source_indices
    upstream = _read_sidecar(in_path, "source_indices")
    if upstream is not None:
        source = upstream[source]
    write_lines(kept, args.out)
    _write_sidecar(args.out, "source_indices", source)
    wall = time.perf_counter() - t0
    manifest = _manifest(
        "sparsify",
        argv,
        {"fraction": args.fraction},
        {"in": in_path},
        {"out": args.out},
        args.seed,
        wall,
    )
    _write_manifest(manifest, args.out)
    _emit(
        "sparsify",
        {"lines_in": len(lc), "lines_out": len(kept), "out": args.out},
        manifest,
    )
    return 0


def _resolved_recovery_config(args) -> RecoveryConfig:
    if args.preset:
        k_coarse, k_refine = PRESETS[args.preset]
    else:
        k_coarse, k_refine = 250, 100
    if args.k_coarse is not None:
        k_coarse = args.k_coarse
    if args.k_refine is not None:
        k_refine = args.k_refine
    return RecoveryConfig(
        k_coarse=k_coarse,
        k_refine=k_refine,
        iterations=args.iterations,
        ks_stop=args.ks_stop,
        min_candidates=args.min_candidates,
        seed=args.seed,
        fallback=args.fallback,
        threads=args.threads,
    )


def cmd_recover(args, argv):
    cfg = _resolved_recovery_config(args)
    cfg.validate()
    t0 = time.perf_counter()
    in_path = getattr(args, "in")
    lc = read_lines(in_path)
    upstream = _read_sidecar(in_path, "source_indices")
    output = recover(lc, cfg)
    est = output.estimates
    valid = np.flatnonzero(est.valid)
    original = upstream[valid] if upstream is not None else valid
    from .linecloud import PointCloud

    write_ply(PointCloud(est.positions[valid].copy()), args.out)
    _write_sidecar(args.out, "valid_indices", original)
    wall = time.perf_counter() - t0
    config = {
        "k_coarse": cfg.k_coarse,
        "k_refine": cfg.k_refine,
        "iterations": cfg.iterations,
        "ks_stop": cfg.ks_stop,
        "min_candidates": cfg.min_candidates,
        "fallback": cfg.fallback,
        "threads": cfg.threads,
        "preset": args.preset,
    }
    stats = [
        {
            "iteration": s.iteration,
            "valid_count": s.valid_count,
            "mean_candidate_count": s.mean_candidate_count,
            "mean_ks": None if np.isnan(s.mean_ks) else s.mean_ks,
        }
        for s in output.per_iteration_stats
    ]
    manifest = _manifest(
        "recover", argv, config, {"in": in_path}, {"out": args.out}, args.seed, wall
    )
    _write_manifest(manifest, args.out)
    _emit(
        "recover",
        {
            "lines": len(lc),
            "valid": int(est.valid.sum()),
            "iterations": stats,
            "out": args.out,
        },
        manifest,
    )
    return 0


def cmd_eval(args, argv):
    t0 = time.perf_counter()
    truth = read_ply(args.truth)
    est_pc = read_ply(args.est)
    valid_indices = _read_sidecar(args.est, "valid_indices")
    if valid_indices is not None:
        true_points = truth.points[valid_indices]
    else:
        true_points = truth.points
    estimates = PointEstimates(
        est_pc.points.copy(), np.ones(len(est_pc), dtype=bool)
    )
    report = error_report(true_points, estimates)
    write_cdf_csv(report, args.out)
    wall = time.perf_counter() - t0
    manifest = _manifest(
        "eval",
        argv,
        {},
        {"truth": args.truth, "est": args.est},
        {"out": args.out},
        0,
        wall,
    )
    _write_manifest(manifest, args.out)
    _emit(
        "eval",
        {
            "median": report.median,
            "mean": report.mean,
            "p90": report.p90,
            "valid_fraction": report.valid_fraction,
            "out": args.out,
        },
        manifest,
    )
    return 0


def cmd_mc(args, argv):
    t0 = time.perf_counter()
    report = montecarlo_two_point(args.samples, seed=args.seed)
    outputs = {}
    if args.out:
        write_mc_cdf_csv(report, args.out)
        outputs["out"] = args.out
    wall = time.perf_counter() - t0
    manifest = _manifest(
        "mc", argv, {"samples": args.samples}, {}, outputs, args.seed, wall
    )
    if args.out:
        _write_manifest(manifest, args.out)
    _emit(
        "mc",
        {"samples": args.samples, "p_closer": report.p_closer, "out": args.out},
        manifest,
    )
    return 0


def cmd_sor(args, argv):
    t0 = time.perf_counter()
    pc = read_ply(getattr(args, "in"))
    cleaned = remove_statistical_outliers(pc, k_nn=args.k, alpha=args.alpha, threads=args.threads)
    write_ply(cleaned, args.out)
    wall = time.perf_counter() - t0
    manifest = _manifest(
        "sor",
        argv,
        {"k": args.k, "alpha": args.alpha},
        {"in": getattr(args, "in")},
        {"out": args.out},
        0,
        wall,
    )
    _write_manifest(manifest, args.out)
    _emit(
        "sor",
        {"points_in": len(pc), "points_out": len(cleaned), "out": args.out},
        manifest,
    )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="lineclouds", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene point cloud")
    p.add_argument("--kind", choices=["room", "facade", "planes-from-file"],
                   default="room")
    p.add_argument("--extent", type=float, default=4.0)
    p.add_argument("--density", type=float, default=2500.0,
                   help="points per unit area of surface")
    p.add_argument("--noise", type=float, default=0.0,
                   help="Gaussian sigma along each surface normal")
    p.add_argument("--path", default=None, help="rectangle list file for --kind planes-from-file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("lift", help="lift a point cloud to a line cloud")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("sparsify", help="keep a random fraction of the lines")
    p.add_argument("--in", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("recover", help="estimate point positions from lines")
    p.add_argument("--in", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--k-coarse", type=int, default=None)
    p.add_argument("--k-refine", type=int, default=None)
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--ks-stop", type=float, default=0.4)
    p.add_argument("--min-candidates", type=int, default=5)
    p.add_argument("--fallback", choices=["keep-previous", "invalidate"],
                   default="keep-previous")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("eval", help="score estimates against the true cloud")
    p.add_argument("--truth", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--out", required=True, help="error CDF csv path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mc", help="two-point Monte Carlo closeness experiment")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="optional CDF csv path")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("sor", help="statistical outlier removal on a point cloud")
    p.add_argument("--in", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sor)
    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except ConfigError as exc:
        print(f"lineclouds {args.subcommand}: {exc}", file=sys.stderr)
        return 1
    except (LineCloudError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError) as exc:
        print(f"lineclouds {args.subcommand}: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
