"""Compiled exhaustive kNN kernels and candidate generation.

Layout and ordering contract
----------------------------
All kernels take structure-of-arrays inputs (six 1-D contiguous float64
arrays for a line cloud: anchor x/y/z, direction x/y/z). The AoS rows that
numpy slicing would produce defeat LLVM's vectorizer; the SoA form runs
about 5x faster on the same hardware.

Distances are computed with exactly the same scalar expressions, in the
same order, as geometry._closest_raw and geometry.point_line_distance.
The neighborhood tests compare kernel output against a pure-Python
exhaustive scan bit for bit, so any edit here must keep that mirror.

Selection keeps the K smallest (distance, index) pairs per query in a
binary max-heap ordered lexicographically. Scanning candidates in
ascending index with strict-less replacement makes the result the exact
K smallest pairs with ties broken toward lower index, independent of any
chunking or thread count.

Each kernel releases the GIL so the drivers in neighborhood.py can run
query chunks on a thread pool. A query's result depends only on its own
row, never on chunk boundaries.
"""

import numpy as np
from numba import njit

_BLOCK = 2048

_JIT = dict(cache=True, nogil=True, error_model="numpy")


@njit(**_JIT)
def _heap_insert(hk, hi, key, idx, size):
    pos = size
    hk[pos] = key
    hi[pos] = idx
    while pos > 0:
        parent = (pos - 1) // 2
        if (hk[pos] > hk[parent]) or (hk[pos] == hk[parent] and hi[pos] > hi[parent]):
            hk[pos], hk[parent] = hk[parent], hk[pos]
            hi[pos], hi[parent] = hi[parent], hi[pos]
            pos = parent
        else:
            break


@njit(**_JIT)
def _heap_replace_root(hk, hi, key, idx, size):
    hk[0] = key
    hi[0] = idx
    pos = 0
    while True:
        left = 2 * pos + 1
        right = left + 1
        big = pos
        if left < size and (
            (hk[left] > hk[big]) or (hk[left] == hk[big] and hi[left] > hi[big])
        ):
            big = left
        if right < size and (
            (hk[right] > hk[big]) or (hk[right] == hk[big] and hi[right] > hi[big])
        ):
            big = right
        if big == pos:
            break
        hk[pos], hk[big] = hk[big], hk[pos]
        hi[pos], hi[big] = hi[big], hi[pos]
        pos = big


@njit(**_JIT)
def _heap_drain_sorted(hk, hi, size, out_keys, out_idxs):
    # repeated pop-max written back to front gives ascending (key, index)
    for slot in range(size - 1, -1, -1):
        out_keys[slot] = hk[0]
        out_idxs[slot] = hi[0]
        _heap_replace_root(hk, hi, hk[slot], hi[slot], slot)


@njit(**_JIT)
def _scan_block(buf, j0, m, hk, hi, size, cap, worst):
    for t in range(m):
        key = buf[t]
        if size == cap:
            if key >= worst:
                continue
            _heap_replace_root(hk, hi, key, j0 + t, cap)
            worst = hk[0]
        else:
            _heap_insert(hk, hi, key, j0 + t, size)
            size += 1
            if size == cap:
                worst = hk[0]
    return size, worst


@njit(**_JIT)
def line_line_topk(ax, ay, az, ux, uy, uz, k, q0, q1, out_keys, out_idxs):
    n = ax.shape[0]
    hk = np.empty(k)
    hi = np.empty(k, np.int64)
    buf = np.empty(_BLOCK)
    for qi in range(q0, q1):
        aox = ax[qi]; aoy = ay[qi]; aoz = az[qi]
        avx = ux[qi]; avy = uy[qi]; avz = uz[qi]
        size = 0
        worst = np.inf
        j0 = 0
        while j0 < n:
            j1 = min(j0 + _BLOCK, n)
            m = j1 - j0
            for t in range(m):
                j = j0 + t
                bvx = ux[j]; bvy = uy[j]; bvz = uz[j]
                wx = aox - ax[j]; wy = aoy - ay[j]; wz = aoz - az[j]
                b = avx * bvx + avy * bvy + avz * bvz
                d = avx * wx + avy * wy + avz * wz
                e = bvx * wx + bvy * wy + bvz * wz
                cx = avy * bvz - avz * bvy
                cy = avz * bvx - avx * bvz
                cz = avx * bvy - avy * bvx
                cross2 = cx * cx + cy * cy + cz * cz
                denom = 1.0 - b * b
                s_gen = (b * e - d) / denom
                t_gen = (e - b * d) / denom
                par = cross2 < 1e-18
                s = -d if par else s_gen
                tt = 0.0 if par else t_gen
                dx = wx + s * avx - tt * bvx
                dy = wy + s * avy - tt * bvy
                dz = wz + s * avz - tt * bvz
                buf[t] = np.sqrt(dx * dx + dy * dy + dz * dz)
            if j0 <= qi < j1:
                buf[qi - j0] = np.inf
            size, worst = _scan_block(buf, j0, m, hk, hi, size, k, worst)
            j0 = j1
        _heap_drain_sorted(hk, hi, size, out_keys[qi - q0], out_idxs[qi - q0])


@njit(**_JIT)
def point_point_topk(px, py, pz, k, q0, q1, out_keys, out_idxs):
    n = px.shape[0]
    hk = np.empty(k)
    hi = np.empty(k, np.int64)
    buf = np.empty(_BLOCK)
    for qi in range(q0, q1):
        qx = px[qi]; qy = py[qi]; qz = pz[qi]
        size = 0
        worst = np.inf
        j0 = 0
        while j0 < n:
            j1 = min(j0 + _BLOCK, n)
            m = j1 - j0
            for t in range(m):
                j = j0 + t
                dx = qx - px[j]
                dy = qy - py[j]
                dz = qz - pz[j]
                buf[t] = np.sqrt(dx * dx + dy * dy + dz * dz)
            if j0 <= qi < j1:
                buf[qi - j0] = np.inf
            size, worst = _scan_block(buf, j0, m, hk, hi, size, k, worst)
            j0 = j1
        _heap_drain_sorted(hk, hi, size, out_keys[qi - q0], out_idxs[qi - q0])


@njit(**_JIT)
def point_line_topk(
    ax, ay, az, ux, uy, uz, px, py, pz, orig_idx, k, q0, q1, out_keys, out_idxs, out_len
):
    # queries are lines, candidates are (valid) estimate points
    m_pts = px.shape[0]
    hk = np.empty(k)
    hi = np.empty(k, np.int64)
    buf = np.empty(_BLOCK)
    for qi in range(q0, q1):
        aox = ax[qi]; aoy = ay[qi]; aoz = az[qi]
        avx = ux[qi]; avy = uy[qi]; avz = uz[qi]
        size = 0
        worst = np.inf
        j0 = 0
        while j0 < m_pts:
            j1 = min(j0 + _BLOCK, m_pts)
            m = j1 - j0
            for t in range(m):
                j = j0 + t
                rx = px[j] - aox
                ry = py[j] - aoy
                rz = pz[j] - aoz
                beta = rx * avx + ry * avy + rz * avz
                dx = rx - beta * avx
                dy = ry - beta * avy
                dz = rz - beta * avz
                buf[t] = np.sqrt(dx * dx + dy * dy + dz * dz)
            for t in range(m):
                if orig_idx[j0 + t] == qi:
                    buf[t] = np.inf
            size, worst = _scan_block(buf, j0, m, hk, hi, size, k, worst)
            j0 = j1
        _heap_drain_sorted(hk, hi, size, out_keys[qi - q0], out_idxs[qi - q0])
        out_len[qi - q0] = size


@njit(**_JIT)
def line_point_topk(ax, ay, az, ux, uy, uz, px, py, pz, orig_idx, k, q0, q1, out_keys, out_idxs):
    # queries are (valid) estimate points, candidates are all lines
    n = ax.shape[0]
    hk = np.empty(k)
    hi = np.empty(k, np.int64)
    buf = np.empty(_BLOCK)
    for qi in range(q0, q1):
        qx = px[qi]; qy = py[qi]; qz = pz[qi]
        own = orig_idx[qi]
        size = 0
        worst = np.inf
        j0 = 0
        while j0 < n:
            j1 = min(j0 + _BLOCK, n)
            m = j1 - j0
            for t in range(m):
                j = j0 + t
                rx = qx - ax[j]
                ry = qy - ay[j]
                rz = qz - az[j]
                beta = rx * ux[j] + ry * uy[j] + rz * uz[j]
                dx = rx - beta * ux[j]
                dy = ry - beta * uy[j]
                dz = rz - beta * uz[j]
                buf[t] = np.sqrt(dx * dx + dy * dy + dz * dz)
            if j0 <= own < j1:
                buf[own - j0] = np.inf
            size, worst = _scan_block(buf, j0, m, hk, hi, size, k, worst)
            j0 = j1
        _heap_drain_sorted(hk, hi, size, out_keys[qi - q0], out_idxs[qi - q0])


@njit(**_JIT)
def candidate_betas(ax, ay, az, ux, uy, uz, i, neighbor_idx, out):
    """Closest-point parameters on line i for each neighbor line.

    Writes into ``out`` and returns the count; parallel pairs are skipped.
    Mirrors geometry._closest_raw exactly.
    """
    aox = ax[i]; aoy = ay[i]; aoz = az[i]
    avx = ux[i]; avy = uy[i]; avz = uz[i]
    count = 0
    for idx in range(neighbor_idx.shape[0]):
        j = neighbor_idx[idx]
        bvx = ux[j]; bvy = uy[j]; bvz = uz[j]
        cx = avy * bvz - avz * bvy
        cy = avz * bvx - avx * bvz
        cz = avx * bvy - avy * bvx
        cross2 = cx * cx + cy * cy + cz * cz
        if cross2 < 1e-18:
            continue
        wx = aox - ax[j]; wy = aoy - ay[j]; wz = aoz - az[j]
        b = avx * bvx + avy * bvy + avz * bvz
        d = avx * wx + avy * wy + avz * wz
        e = bvx * wx + bvy * wy + bvz * wz
        denom = 1.0 - b * b
        out[count] = (b * e - d) / denom
        count += 1
    return count


def soa(arr):
    """Split an (N, 3) array into three contiguous 1-D columns."""
    a = np.ascontiguousarray(arr, dtype=np.float64)
    return (
        np.ascontiguousarray(a[:, 0]),
        np.ascontiguousarray(a[:, 1]),
        np.ascontiguousarray(a[:, 2]),
    )
