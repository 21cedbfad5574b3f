"""The three kNN structures of the recovery loop, plus oracle neighborhoods.

Iteration 1 can only relate lines to lines (N_ll). From iteration 2 on,
point estimates exist, so lines can be related to estimated points (N_pl)
and estimated points back to lines (N_lp); their intersection filters the
neighbor sets.

All searches are exhaustive scans. Line-line distance admits no standard
spatial index, and the compiled kernels sweep about 60M pairs per second
per core, which covers the intended cloud sizes. Queries are independent:
the drivers cut them into fixed-size chunks and run the chunks on a thread
pool. Chunk size never depends on the thread count and each chunk writes
only its own output rows, so results are bit-identical for any --threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import KTooLarge, TooFewValidEstimates

_CHUNK = 512


@dataclass(frozen=True)
class NeighborList:
    center_index: int
    neighbor_indices: np.ndarray  # nearest first
    keys: np.ndarray  # matching distances, non-decreasing


@dataclass
class PointEstimates:
    positions: np.ndarray  # (N, 3), aligned with line indices
    valid: np.ndarray  # (N,) bool

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        val = np.asarray(self.valid, dtype=bool)
        if pos.ndim != 2 or pos.shape[1] != 3 or val.shape != (pos.shape[0],):
            raise ValueError("positions must be (N, 3) with matching valid mask")
        self.positions = pos
        self.valid = val

    def __len__(self):
        return self.positions.shape[0]

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())


def _run_chunked(kernel, args, n_query, k, threads, extra_out=()):
    out_keys = np.empty((n_query, k), dtype=np.float64)
    out_idxs = np.empty((n_query, k), dtype=np.int64)

    def work(q0, q1):
        kernel(
            *args,
            k,
            q0,
            q1,
            out_keys[q0:q1],
            out_idxs[q0:q1],
            *(o[q0:q1] for o in extra_out),
        )

    spans = [(q0, min(q0 + _CHUNK, n_query)) for q0 in range(0, n_query, _CHUNK)]
    if threads <= 1 or len(spans) <= 1:
        for q0, q1 in spans:
            work(q0, q1)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda s: work(*s), spans))
    return out_keys, out_idxs


def knn_line_line(lc, k: int, threads: int = 1) -> list[NeighborList]:
    """For each line, the K lines with the smallest line-line distance.

    Parallel pairs rank by the distance between parallel lines. Ties break
    toward the lower index.
    """
    n = len(lc)
    if k >= n:
        raise KTooLarge(f"K = {k} needs at least {k + 1} lines, have {n}")
    args = (*lc._soa_anchors(), *lc._soa_directions())
    keys, idxs = _run_chunked(_kernels.line_line_topk, args, n, k, threads)
    return [NeighborList(i, idxs[i], keys[i]) for i in range(n)]


def knn_point_line(lc, est: PointEstimates, k: int, threads: int = 1) -> list[NeighborList]:
    """For each line, the K valid estimate points nearest to the line.

    A line's own estimate is excluded from its list.
    """
    n = len(lc)
    if len(est) != n:
        raise ValueError("estimates not aligned with line cloud")
    valid_idx = np.flatnonzero(est.valid).astype(np.int64)
    if k >= valid_idx.size:
        raise TooFewValidEstimates(
            f"K = {k} needs more than {k} valid estimates, have {valid_idx.size}"
        )
    px, py, pz = _kernels.soa(est.positions[valid_idx])
    args = (*lc._soa_anchors(), *lc._soa_directions(), px, py, pz, valid_idx)
    out_len = np.empty(n, dtype=np.int64)
    keys, idxs = _run_chunked(
        _kernels.point_line_topk, args, n, k, threads, extra_out=(out_len,)
    )
    # kernel indices point into the valid subset; map back to line indices
    return [
        NeighborList(i, valid_idx[idxs[i, : out_len[i]]], keys[i, : out_len[i]])
        for i in range(n)
    ]


def knn_line_point(lc, est: PointEstimates, k: int, threads: int = 1) -> list[NeighborList]:
    """For each valid estimate point, the K lines nearest to it.

    Returns one NeighborList per valid estimate, centered on its line
    index; the estimate's own line is excluded.
    """
    n = len(lc)
    if len(est) != n:
        raise ValueError("estimates not aligned with line cloud")
    if k >= n:
        raise KTooLarge(f"K = {k} needs at least {k + 1} lines, have {n}")
    valid_idx = np.flatnonzero(est.valid).astype(np.int64)
    px, py, pz = _kernels.soa(est.positions[valid_idx])
    args = (*lc._soa_anchors(), *lc._soa_directions(), px, py, pz, valid_idx)
    keys, idxs = _run_chunked(
        _kernels.line_point_topk, args, valid_idx.size, k, threads
    )
    return [
        NeighborList(int(valid_idx[q]), idxs[q], keys[q]) for q in range(valid_idx.size)
    ]


def intersect(npl: NeighborList, nlp: NeighborList) -> NeighborList:
    """Indices present in both lists, keeping npl's keys and key order."""
    if npl.center_index != nlp.center_index:
        raise ValueError(
            f"center mismatch: {npl.center_index} vs {nlp.center_index}"
        )
    mask = np.isin(npl.neighbor_indices, nlp.neighbor_indices)
    return NeighborList(
        npl.center_index, npl.neighbor_indices[mask], npl.keys[mask]
    )


def oracle_neighbors(pc, k: int, outlier_fraction: float, seed: int, threads: int = 1) -> list[NeighborList]:
    """True point kNN with a controlled fraction replaced by random indices.

    round(outlier_fraction * k) entries of each list are overwritten by
    uniformly drawn indices that are not the point itself and not among its
    true neighbors, without duplicates. Keys are recomputed for the
    replacements and each list is re-sorted by (key, index).
    """
    n = len(pc)
    if k >= n:
        raise KTooLarge(f"k = {k} needs at least {k + 1} points, have {n}")
    if not (0.0 <= outlier_fraction < 1.0):
        raise ValueError(f"outlier_fraction must be in [0, 1), got {outlier_fraction}")
    args = _kernels.soa(pc.points)
    keys, idxs = _run_chunked(_kernels.point_point_topk, args, n, k, threads)
    n_replace = int(np.floor(outlier_fraction * k + 0.5))
    if n_replace == 0:
        return [NeighborList(i, idxs[i], keys[i]) for i in range(n)]
    rng = np.random.default_rng(seed)
    pts = pc.points
    out = []
    for i in range(n):
        nbr = idxs[i].copy()
        key = keys[i].copy()
        slots = rng.choice(k, size=n_replace, replace=False)
        forbidden = set(nbr.tolist())
        forbidden.add(i)
        picked = []
        while len(picked) < n_replace:
            draw = int(rng.integers(0, n))
            if draw in forbidden:
                continue
            forbidden.add(draw)
            picked.append(draw)
        nbr[slots] = picked
        diff = pts[nbr[slots]] - pts[i]
        key[slots] = np.sqrt((diff * diff).sum(axis=1))
        order = np.lexsort((nbr, key))
        out.append(NeighborList(i, nbr[order], key[order]))
    return out


def knn_points(pc, k: int, threads: int = 1):
    """Raw point kNN arrays (keys, idxs), used by evaluation helpers."""
    n = len(pc)
    if k >= n:
        raise KTooLarge(f"k = {k} needs at least {k + 1} points, have {n}")
    args = _kernels.soa(pc.points)
    return _run_chunked(_kernels.point_point_topk, args, n, k, threads)
