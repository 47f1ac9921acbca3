"""Independent brute-force reference implementations used by the tests.

Everything here is deliberately written as plain double loops / counting so
it stays independent of the vectorized production code paths it checks.
"""

from __future__ import annotations

import math

import numpy as np

DOPPLER_PERIOD = 64


def cfar_reference(rd: np.ndarray, variant: str, train, guard, alpha: float,
                   os_rank: float = 0.75) -> np.ndarray:
    """Naive O(cells * window) CFAR: doppler wraps, range clips."""
    n_r, n_d = rd.shape
    t_r, t_d = train
    g_r, g_d = guard
    out = np.zeros((n_r, n_d), dtype=bool)
    for i in range(n_r):
        for j in range(n_d):
            values = []
            for di in range(-(t_r + g_r), t_r + g_r + 1):
                ii = i + di
                if ii < 0 or ii >= n_r:
                    continue
                for dj in range(-(t_d + g_d), t_d + g_d + 1):
                    if abs(di) <= g_r and abs(dj) <= g_d:
                        continue
                    values.append(rd[ii, (j + dj) % n_d])
            n = len(values)
            if variant == "ca":
                noise = sum(values) / n
            else:
                k = math.ceil(os_rank * n)
                noise = sorted(values)[k - 1]
            out[i, j] = rd[i, j] > alpha * noise
    return out


def closing_reference(mask: np.ndarray, gap: int) -> np.ndarray:
    """Morphological closing on the range x doppler cylinder.

    Square (2*gap+1)^2 structuring element; axis 0 unbounded (background
    outside), axis 1 circular.
    """
    n_r, n_d = mask.shape
    g = gap
    # Work on an extended range axis so dilation beyond the borders is kept
    # for the erosion step, then crop.
    ext = np.zeros((n_r + 4 * g, n_d), dtype=bool)
    ext[2 * g:2 * g + n_r] = mask
    dil = np.zeros_like(ext)
    for i in range(ext.shape[0]):
        for j in range(n_d):
            hit = False
            for di in range(-g, g + 1):
                ii = i + di
                if ii < 0 or ii >= ext.shape[0]:
                    continue
                for dj in range(-g, g + 1):
                    if ext[ii, (j + dj) % n_d]:
                        hit = True
            dil[i, j] = hit
    ero = np.zeros_like(ext)
    for i in range(ext.shape[0]):
        for j in range(n_d):
            full = True
            for di in range(-g, g + 1):
                ii = i + di
                if ii < 0 or ii >= ext.shape[0]:
                    full = False
                    break
                for dj in range(-g, g + 1):
                    if not dil[ii, (j + dj) % n_d]:
                        full = False
                        break
                if not full:
                    break
            ero[i, j] = full
    return ero[2 * g:2 * g + n_r]


def dbscan_reference(points: np.ndarray, eps: float, min_pts: int,
                     axis_scale, doppler_period=DOPPLER_PERIOD) -> np.ndarray:
    """Textbook DBSCAN over an explicit O(n^2) distance matrix."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    s = np.asarray(axis_scale, dtype=float)

    def dist(i, j):
        dr = (pts[i, 0] - pts[j, 0]) * s[0]
        da = (pts[i, 1] - pts[j, 1]) * s[1]
        dd = abs(pts[i, 2] - pts[j, 2])
        if doppler_period is not None:
            dd = min(dd, doppler_period - dd)
        dd *= s[2]
        return math.sqrt(dr * dr + da * da + dd * dd)

    neigh = [[j for j in range(n) if dist(i, j) <= eps] for i in range(n)]
    labels = [-1] * n
    visited = [False] * n
    cid = 0
    for i in range(n):
        if visited[i] or len(neigh[i]) < min_pts:
            continue
        visited[i] = True
        labels[i] = cid
        queue = list(neigh[i])
        qi = 0
        while qi < len(queue):
            j = queue[qi]
            qi += 1
            if labels[j] == -1:
                labels[j] = cid
            if visited[j]:
                continue
            visited[j] = True
            if len(neigh[j]) >= min_pts:
                queue.extend(neigh[j])
        cid += 1
    return np.array(labels)


def same_partition(labels_a, labels_b) -> bool:
    """Partition equality up to relabeling (noise stays noise)."""
    labels_a = list(labels_a)
    labels_b = list(labels_b)
    if len(labels_a) != len(labels_b):
        return False
    fwd: dict = {}
    bwd: dict = {}
    for a, b in zip(labels_a, labels_b):
        if (a == -1) != (b == -1):
            return False
        if a == -1:
            continue
        if fwd.setdefault(a, b) != b or bwd.setdefault(b, a) != a:
            return False
    return True


QUANTUM = 0.25   # random test boxes use centers/sizes on this grid
_RES = QUANTUM / 2  # counting resolution: corners land on the half grid


def _fine(v: float) -> int:
    return int(round(v / _RES))


def _linear_occ(lo_a: float, n_a: int, lo_b: float, n_b: int):
    """Boolean occupancy arrays of two 1D extents on a shared fine grid."""
    org = min(_fine(lo_a), _fine(lo_b))
    length = max(_fine(lo_a) + n_a, _fine(lo_b) + n_b) - org
    occ_a = np.zeros(length, dtype=bool)
    occ_b = np.zeros(length, dtype=bool)
    occ_a[_fine(lo_a) - org:_fine(lo_a) - org + n_a] = True
    occ_b[_fine(lo_b) - org:_fine(lo_b) - org + n_b] = True
    return occ_a, occ_b


def _circular_occ(lo: float, n: int) -> np.ndarray:
    period = _fine(DOPPLER_PERIOD)
    occ = np.zeros(period, dtype=bool)
    occ[(_fine(lo) + np.arange(n)) % period] = True
    return occ


def iou3d_counting(center_a, size_a, center_b, size_b) -> float:
    """IoU by counting fine occupancy cells per axis; doppler wraps mod 64.

    Boxes are axis-aligned, so cell counts factor per axis: the occupancy of
    a box is the product set of three 1D occupancies.
    """
    nr_a, na_a, nd_a = (_fine(s) for s in size_a)
    nr_b, na_b, nd_b = (_fine(s) for s in size_b)
    r_a, r_b = _linear_occ(center_a[0] - size_a[0] / 2, nr_a,
                           center_b[0] - size_b[0] / 2, nr_b)
    a_a, a_b = _linear_occ(center_a[1] - size_a[1] / 2, na_a,
                           center_b[1] - size_b[1] / 2, na_b)
    d_a = _circular_occ(center_a[2] - size_a[2] / 2, nd_a)
    d_b = _circular_occ(center_b[2] - size_b[2] / 2, nd_b)
    inter = int((r_a & r_b).sum()) * int((a_a & a_b).sum()) * int((d_a & d_b).sum())
    vol_a = nr_a * na_a * int(d_a.sum())
    vol_b = nr_b * na_b * int(d_b.sum())
    return inter / (vol_a + vol_b - inter)


def iou2d_counting(center_a, size_a, center_b, size_b) -> float:
    """IoU by per-axis occupancy counting on the BEV plane.

    size is (w, l) = (z extent, x extent); center is (x, z).
    """
    nx_a, nz_a = _fine(size_a[1]), _fine(size_a[0])
    nx_b, nz_b = _fine(size_b[1]), _fine(size_b[0])
    x_a, x_b = _linear_occ(center_a[0] - size_a[1] / 2, nx_a,
                           center_b[0] - size_b[1] / 2, nx_b)
    z_a, z_b = _linear_occ(center_a[1] - size_a[0] / 2, nz_a,
                           center_b[1] - size_b[0] / 2, nz_b)
    inter = int((x_a & x_b).sum()) * int((z_a & z_b).sum())
    return inter / (nx_a * nz_a + nx_b * nz_b - inter)


def nms_reference(boxes, iou_threshold: float, iou_values) -> list[int]:
    """Greedy class-wise NMS over a precomputed IoU matrix."""
    n = len(boxes)
    order = sorted(range(n), key=lambda i: (-boxes[i].score, i))
    alive = [True] * n
    kept = []
    for i in order:
        if not alive[i]:
            continue
        kept.append(i)
        for j in order:
            if j != i and alive[j] and boxes[j].class_id == boxes[i].class_id \
                    and iou_values[i][j] > iou_threshold:
                alive[j] = False
    return kept


def match_reference(dets, gts, iou_fn, threshold):
    """Greedy matcher re-implementation for the evaluation tests."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    taken = set()
    tp = [False] * len(dets)
    for i in order:
        candidates = []
        for j in range(len(gts)):
            if j in taken or gts[j].class_id != dets[i].class_id:
                continue
            v = iou_fn(dets[i], gts[j])
            if v >= threshold:
                candidates.append((v, -j))
        if candidates:
            v, nj = max(candidates)
            taken.add(-nj)
            tp[i] = True
    fn = len(gts) - len(taken)
    tp = np.array(tp, dtype=bool)
    return tp, ~tp, fn


def two_pass_stats(frames):
    """Two-pass population mean/variance over a list of arrays."""
    total = sum(f.size for f in frames)
    mean = sum(float(f.astype(np.float64).sum()) for f in frames) / total
    var = sum(float(((f.astype(np.float64) - mean) ** 2).sum()) for f in frames) / total
    return mean, var
