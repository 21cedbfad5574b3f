"""Point and line cloud containers, lifting, sparsification, synthetic scenes, I/O.

Clouds are immutable-by-convention: nothing in the package mutates a
cloud after construction, which makes them safe to share across threads.

File formats
------------
PLY ASCII 1.0, element ``vertex`` with double (or float) properties
x, y, z. Coordinates are written with repr(), i.e. the shortest decimal
that round-trips, so write-then-read is bit exact.

LINECLOUD v1 text: header ``LINECLOUD v1`` and ``count N``, then one line
per element with ``ox oy oz dx dy dz`` at 17 significant digits.

Optional per-element payload blobs (opaque descriptor bytes) ride in a
JSON sidecar next to the main file, keyed by index; they are never
interpreted, only carried.
"""

from __future__ import annotations

import base64
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import (
    EmptyInput,
    InvalidSpec,
    ParseError,
    UnsupportedFormat,
    ZeroSurvivors,
)
from .geometry import Line3, sample_uniform_directions

_UNIT_TOL = 1e-9


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _check_payloads(payloads, n):
    if payloads is not None and len(payloads) != n:
        raise ValueError(f"payloads length {len(payloads)} != element count {n}")


@dataclass
class PointCloud:
    points: np.ndarray
    payloads: list | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be (N, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        self.points = pts
        _check_payloads(self.payloads, len(pts))

    def __len__(self):
        return self.points.shape[0]

    def _soa_points(self):
        cached = getattr(self, "_soa_cache", None)
        if cached is None:
            cached = _kernels.soa(self.points)
            object.__setattr__(self, "_soa_cache", cached)
        return cached


@dataclass
class LineCloud:
    anchors: np.ndarray
    directions: np.ndarray
    payloads: list | None = None
    # original index of each line in the cloud it was derived from, for
    # evaluation only; recovery never reads it
    source_indices: np.ndarray | None = field(default=None)

    def __post_init__(self):
        anchors = np.asarray(self.anchors, dtype=np.float64)
        dirs = np.asarray(self.directions, dtype=np.float64)
        if anchors.ndim != 2 or anchors.shape[1] != 3 or anchors.shape != dirs.shape:
            raise ValueError(
                f"anchors/directions must be matching (N, 3), got {anchors.shape} and {dirs.shape}"
            )
        if not (np.all(np.isfinite(anchors)) and np.all(np.isfinite(dirs))):
            raise ValueError("anchors and directions must be finite")
        norms = np.linalg.norm(dirs, axis=1)
        if len(dirs) and np.max(np.abs(norms - 1.0)) > _UNIT_TOL:
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(f"direction {worst} is not unit length (|v| = {norms[worst]!r})")
        self.anchors = anchors
        self.directions = dirs
        _check_payloads(self.payloads, len(anchors))
        if self.source_indices is not None:
            src = np.asarray(self.source_indices, dtype=np.int64)
            if src.shape != (len(anchors),):
                raise ValueError("source_indices must align with lines")
            self.source_indices = src

    def __len__(self):
        return self.anchors.shape[0]

    def line(self, i: int) -> Line3:
        return Line3(self.anchors[i], self.directions[i])

    def _soa_anchors(self):
        cached = getattr(self, "_soa_anchor_cache", None)
        if cached is None:
            cached = _kernels.soa(self.anchors)
            object.__setattr__(self, "_soa_anchor_cache", cached)
        return cached

    def _soa_directions(self):
        cached = getattr(self, "_soa_dir_cache", None)
        if cached is None:
            cached = _kernels.soa(self.directions)
            object.__setattr__(self, "_soa_dir_cache", cached)
        return cached


# ---------------------------------------------------------------------------
# lifting and sparsification
# ---------------------------------------------------------------------------

def lift(pc: PointCloud, seed: int) -> LineCloud:
    """Replace every point with a random line through it.

    Line i passes through point i exactly (the anchor is the point); the
    direction is uniform on the unit sphere. Exporting anchors like this
    would leak the points verbatim, so reanchor() before writing to disk.
    """
    n = len(pc)
    if n == 0:
        raise EmptyInput("cannot lift an empty point cloud")
    rng = np.random.default_rng(seed)
    dirs = sample_uniform_directions(rng, n)
    payloads = list(pc.payloads) if pc.payloads is not None else None
    return LineCloud(
        anchors=pc.points.copy(),
        directions=dirs,
        payloads=payloads,
        source_indices=np.arange(n, dtype=np.int64),
    )


def reanchor(lc: LineCloud, seed: int) -> LineCloud:
    """Slide each anchor to a uniform random parameter along its line.

    The offset range is +-D where D is the diagonal of the anchor bounding
    box, so the new anchors carry no information about where on the line
    the original point sat.
    """
    n = len(lc)
    if n == 0:
        raise EmptyInput("empty line cloud")
    span = lc.anchors.max(axis=0) - lc.anchors.min(axis=0)
    diag = float(np.linalg.norm(span))
    if diag == 0.0:
        diag = 1.0
    rng = np.random.default_rng(seed)
    betas = rng.uniform(-diag, diag, n)
    return LineCloud(
        anchors=lc.anchors + betas[:, None] * lc.directions,
        directions=lc.directions.copy(),
        payloads=list(lc.payloads) if lc.payloads is not None else None,
        source_indices=None if lc.source_indices is None else lc.source_indices.copy(),
    )


def sparsify(lc: LineCloud, fraction: float, seed: int) -> LineCloud:
    """Keep a uniform random subset of round(fraction * N) lines."""
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    n = len(lc)
    m = _round_half_up(fraction * n)
    if m == 0:
        raise ZeroSurvivors(f"fraction {fraction} of {n} lines keeps nothing")
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(n, size=m, replace=False))
    src = lc.source_indices if lc.source_indices is not None else np.arange(n, dtype=np.int64)
    return LineCloud(
        anchors=lc.anchors[keep].copy(),
        directions=lc.directions[keep].copy(),
        payloads=None if lc.payloads is None else [lc.payloads[i] for i in keep],
        source_indices=src[keep].copy(),
    )


# ---------------------------------------------------------------------------
# synthetic scenes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SceneSpec:
    kind: str  # room | facade | planes-from-file
    extent: float = 4.0
    points_per_unit_area: float = 2500.0
    noise_sigma: float = 0.0
    seed: int = 0
    path: str | None = None  # planes-from-file only

    def validate(self):
        if self.kind not in ("room", "facade", "planes-from-file"):
            raise InvalidSpec(f"unknown scene kind {self.kind!r}")
        if not (self.extent > 0):
            raise InvalidSpec(f"extent must be > 0, got {self.extent}")
        if self.points_per_unit_area < 0:
            raise InvalidSpec("points_per_unit_area must be >= 0")
        if self.noise_sigma < 0:
            raise InvalidSpec("noise_sigma must be >= 0")
        if self.kind == "planes-from-file" and not self.path:
            raise InvalidSpec("planes-from-file needs a path")


class _Rect:
    """Axis-independent rectangle: origin plus two spanning edge vectors."""

    __slots__ = ("origin", "edge_u", "edge_v", "normal")

    def __init__(self, origin, edge_u, edge_v):
        self.origin = np.asarray(origin, dtype=np.float64)
        self.edge_u = np.asarray(edge_u, dtype=np.float64)
        self.edge_v = np.asarray(edge_v, dtype=np.float64)
        normal = np.cross(self.edge_u, self.edge_v)
        self.normal = normal / np.linalg.norm(normal)

    @property
    def area(self):
        return float(np.linalg.norm(np.cross(self.edge_u, self.edge_v)))

    def sample(self, rng, density, noise_sigma):
        count = int(rng.poisson(density * self.area))
        if count == 0:
            return np.empty((0, 3))
        uv = rng.uniform(0.0, 1.0, (count, 2))
        pts = self.origin + uv[:, :1] * self.edge_u + uv[:, 1:] * self.edge_v
        if noise_sigma > 0:
            pts = pts + rng.normal(0.0, noise_sigma, count)[:, None] * self.normal
        return pts


def _room_rects(extent, rng):
    e = extent
    rects = [
        _Rect((0, 0, 0), (e, 0, 0), (0, e, 0)),  # floor
        _Rect((0, 0, 0), (e, 0, 0), (0, 0, e)),  # wall y=0
        _Rect((0, e, 0), (e, 0, 0), (0, 0, e)),  # wall y=e
        _Rect((0, 0, 0), (0, e, 0), (0, 0, e)),  # wall x=0
        _Rect((e, 0, 0), (0, e, 0), (0, 0, e)),  # wall x=e
    ]
    n_boxes = int(rng.integers(2, 5))
    for _ in range(n_boxes):
        size = rng.uniform(0.15 * e, 0.35 * e, 3)
        corner = np.append(rng.uniform(0, 1, 2) * (e - size[:2]), 0.0)
        sx, sy, sz = size
        cx, cy, cz = corner
        rects.extend(
            [
                _Rect((cx, cy, cz + sz), (sx, 0, 0), (0, sy, 0)),  # top
                _Rect((cx, cy, cz), (sx, 0, 0), (0, 0, sz)),       # side y-
                _Rect((cx, cy + sy, cz), (sx, 0, 0), (0, 0, sz)),  # side y+
                _Rect((cx, cy, cz), (0, sy, 0), (0, 0, sz)),       # side x-
                _Rect((cx + sx, cy, cz), (0, sy, 0), (0, 0, sz)),  # side x+
            ]
        )
    return rects


def _facade_rects(extent, rng):
    # one big vertical wall in the x-z plane with recessed rectangles:
    # a 2x2 window grid and a door, all pushed back by a fixed depth
    e = extent
    depth = 0.05 * e
    openings = []
    for wx in (0.15 * e, 0.60 * e):
        for wz in (0.45 * e, 0.75 * e):
            openings.append((wx, wz, 0.25 * e, 0.18 * e))
    openings.append((0.40 * e, 0.0, 0.20 * e, 0.40 * e))  # door
    rects = []
    # recessed planes for the openings
    for ox, oz, w, h in openings:
        rects.append(_Rect((ox, depth, oz), (w, 0, 0), (0, 0, h)))
    # the wall minus openings, cut into horizontal strips around each opening
    # (strip decomposition keeps rectangles axis aligned and non-overlapping)
    zs = sorted({0.0, e} | {z for _, oz, _, h in openings for z in (oz, oz + h)})
    for z0, z1 in zip(zs[:-1], zs[1:]):
        xs = sorted(
            {0.0, e}
            | {
                x
                for ox, oz, w, h in openings
                if oz < z1 and oz + h > z0
                for x in (ox, ox + w)
            }
        )
        for x0, x1 in zip(xs[:-1], xs[1:]):
            mid_x, mid_z = 0.5 * (x0 + x1), 0.5 * (z0 + z1)
            covered = any(
                ox <= mid_x <= ox + w and oz <= mid_z <= oz + h
                for ox, oz, w, h in openings
            )
            if not covered and x1 > x0 and z1 > z0:
                rects.append(_Rect((x0, 0, z0), (x1 - x0, 0, 0), (0, 0, z1 - z0)))
    return rects


def _rects_from_file(path):
    rects = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidSpec(f"cannot read plane file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 9:
            raise ParseError(path, lineno, f"expected 9 numbers, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from exc
        rects.append(_Rect(vals[0:3], vals[3:6], vals[6:9]))
    if not rects:
        raise InvalidSpec(f"plane file {path} defines no rectangles")
    return rects


def synth_scene(spec: SceneSpec) -> PointCloud:
    """Deterministically sample a synthetic scene from its spec."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "room":
        rects = _room_rects(spec.extent, rng)
    elif spec.kind == "facade":
        rects = _facade_rects(spec.extent, rng)
    else:
        rects = _rects_from_file(spec.path)
    chunks = [r.sample(rng, spec.points_per_unit_area, spec.noise_sigma) for r in rects]
    pts = np.vstack([c for c in chunks if len(c)]) if any(len(c) for c in chunks) else np.empty((0, 3))
    if spec.kind in ("room", "facade"):
        lo = np.zeros(3)
        hi = np.array(
            [spec.extent, spec.extent, spec.extent]
            if spec.kind == "room"
            else [spec.extent, 0.05 * spec.extent, spec.extent]
        )
        pts = np.clip(pts, lo, hi)
    return PointCloud(points=pts)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def _payload_sidecar(path) -> Path:
    return Path(str(path) + ".payloads.json")


def _write_payloads(payloads, path):
    if payloads is None:
        return
    blob = [None if p is None else base64.b64encode(bytes(p)).decode("ascii") for p in payloads]
    _payload_sidecar(path).write_text(json.dumps({"payloads": blob}), encoding="utf-8")


def _read_payloads(path, n):
    sidecar = _payload_sidecar(path)
    if not sidecar.exists():
        return None
    data = json.loads(sidecar.read_text(encoding="utf-8"))
    blob = data["payloads"]
    if len(blob) != n:
        raise ParseError(sidecar, 1, f"payload count {len(blob)} != element count {n}")
    return [None if b is None else base64.b64decode(b) for b in blob]


def write_ply(pc: PointCloud, path):
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(pc)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    for p in pc.points:
        lines.append(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_payloads(pc.payloads, path)


def read_ply(path) -> PointCloud:
    text = Path(path).read_text(encoding="utf-8")
    rows = text.splitlines()
    if not rows or rows[0].strip() != "ply":
        raise UnsupportedFormat(f"{path}: missing 'ply' magic")
    count = None
    props = []
    in_vertex = False
    body_start = None
    for lineno, raw in enumerate(rows[1:], start=2):
        tok = raw.strip().split()
        if not tok or tok[0] == "comment":
            continue
        if tok[0] == "format":
            if tok[1:2] != ["ascii"]:
                raise UnsupportedFormat(f"{path}: only ascii PLY is supported, got {raw.strip()!r}")
        elif tok[0] == "element":
            if tok[1] != "vertex":
                raise UnsupportedFormat(f"{path}: unsupported element {tok[1]!r}")
            if len(tok) != 3:
                raise ParseError(path, lineno, "element vertex needs a count")
            try:
                count = int(tok[2])
            except ValueError:
                raise ParseError(path, lineno, f"bad vertex count {tok[2]!r}") from None
            if count < 0:
                raise ParseError(path, lineno, f"bad vertex count {count}")
            in_vertex = True
        elif tok[0] == "property":
            if in_vertex:
                if len(tok) != 3 or tok[1] not in ("double", "float"):
                    raise UnsupportedFormat(f"{path}: unsupported property {raw.strip()!r}")
                props.append(tok[2])
        elif tok[0] == "end_header":
            body_start = lineno
            break
        else:
            raise ParseError(path, lineno, f"unexpected header token {tok[0]!r}")
    if body_start is None:
        raise ParseError(path, len(rows), "missing end_header")
    if count is None:
        raise ParseError(path, body_start, "missing 'element vertex' declaration")
    if props != ["x", "y", "z"]:
        raise UnsupportedFormat(f"{path}: need exactly properties x, y, z; got {props}")
    body = [r for r in rows[body_start:]]
    pts = np.empty((count, 3), dtype=np.float64)
    filled = 0
    for off, raw in enumerate(body):
        if filled == count:
            if raw.strip():
                raise ParseError(path, body_start + 1 + off, "trailing data after last vertex")
            continue
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 3:
            raise ParseError(path, body_start + 1 + off, f"expected 3 coordinates, got {len(parts)}")
        try:
            pts[filled] = [float(v) for v in parts]
        except ValueError as exc:
            raise ParseError(path, body_start + 1 + off, str(exc)) from None
        filled += 1
    if filled != count:
        raise ParseError(path, len(rows), f"vertex count {count} but only {filled} rows")
    return PointCloud(points=pts, payloads=_read_payloads(path, count))


def write_lines(lc: LineCloud, path):
    rows = ["LINECLOUD v1", f"count {len(lc)}"]
    for o, d in zip(lc.anchors, lc.directions):
        rows.append(f"{o[0]:.17g} {o[1]:.17g} {o[2]:.17g} {d[0]:.17g} {d[1]:.17g} {d[2]:.17g}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")
    _write_payloads(lc.payloads, path)


def read_lines(path) -> LineCloud:
    text = Path(path).read_text(encoding="utf-8")
    rows = text.splitlines()
    if not rows or rows[0].strip() != "LINECLOUD v1":
        raise UnsupportedFormat(f"{path}: missing 'LINECLOUD v1' header")
    if len(rows) < 2 or not rows[1].strip().startswith("count"):
        raise ParseError(path, 2, "missing 'count N' line")
    parts = rows[1].split()
    if len(parts) != 2:
        raise ParseError(path, 2, "count line must be 'count N'")
    try:
        count = int(parts[1])
    except ValueError:
        raise ParseError(path, 2, f"bad count {parts[1]!r}") from None
    anchors = np.empty((count, 3), dtype=np.float64)
    dirs = np.empty((count, 3), dtype=np.float64)
    filled = 0
    for off, raw in enumerate(rows[2:], start=3):
        if not raw.strip():
            continue
        if filled == count:
            raise ParseError(path, off, "trailing data after last line")
        vals = raw.split()
        if len(vals) != 6:
            raise ParseError(path, off, f"expected 6 numbers, got {len(vals)}")
        try:
            nums = [float(v) for v in vals]
        except ValueError as exc:
            raise ParseError(path, off, str(exc)) from None
        anchors[filled] = nums[0:3]
        dirs[filled] = nums[3:6]
        filled += 1
    if filled != count:
        raise ParseError(path, len(rows), f"count {count} but only {filled} data rows")
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(norms <= 1e-12):
        bad = int(np.argmax(norms <= 1e-12))
        raise ParseError(path, 3 + bad, "zero-length direction")
    off_unit = np.abs(norms - 1.0) > _UNIT_TOL
    if np.any(off_unit):
        warnings.warn(
            f"{path}: renormalized {int(off_unit.sum())} non-unit direction(s)",
            stacklevel=2,
        )
        dirs = dirs / norms[:, None]
    return LineCloud(anchors=anchors, directions=dirs, payloads=_read_payloads(path, count))
