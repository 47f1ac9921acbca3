"""Instance-wise auto-annotation over RAD tensors.

Moving rigid bodies leave contiguous, line-like traces on the range-doppler
map, but CFAR tends to break them into fragments. ``connect_patterns``
bridges those fragments with a morphological closing. For every surviving
RD detection the azimuth bins within ``azimuth_rel_threshold`` of the
per-cell azimuth peak are marked, the marked (range, azimuth, doppler)
cells are clustered with DBSCAN, and each cluster becomes an ``Instance``
that is finally boxed on the RAD grid and on the Cartesian BEV plane.

Category labels come from externally produced BEV points (e.g. projected
stereo instances): ``fit_projection`` fits the 3D -> BEV affine map from
calibration correspondences, ``transfer_labels`` votes labels onto
instances whose 2D box (inflated by a margin) contains labeled points.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import (AZIMUTH_BINS, Box2D, Box3D, DOPPLER_BINS, RANGE_BINS,
                       RANGE_BIN_METERS, azimuth_bin_to_sin)
from .tensorio import RadCube


@dataclass(frozen=True)
class DbscanConfig:
    """Clustering parameters; eps is in scaled cell units."""

    eps: float = 3.0
    min_pts: int = 4
    axis_scale: tuple[float, float, float] = (1.0, 1.0, 2.0)
    doppler_period: float | None = float(DOPPLER_BINS)

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")
        if min(self.axis_scale) <= 0:
            raise ValueError("axis scales must be positive")


@dataclass
class Instance:
    """A cluster of RAD cells belonging to one object."""

    cells: np.ndarray  # (n, 3) int array of (range, azimuth, doppler) bins
    class_id: int | None = None
    frame_id: str = ""

    def __post_init__(self):
        cells = np.atleast_2d(np.asarray(self.cells, dtype=np.int64))
        if cells.size == 0 or cells.shape[1] != 3:
            raise ValueError("instance needs a non-empty (n, 3) cell array")
        cells = cells.copy()
        cells[:, 2] %= DOPPLER_BINS
        if (np.any(cells[:, 0] < 0) or np.any(cells[:, 0] >= RANGE_BINS)
                or np.any(cells[:, 1] < 0) or np.any(cells[:, 1] >= AZIMUTH_BINS)):
            raise ValueError("instance cells outside the RAD grid")
        self.cells = cells


@dataclass(frozen=True)
class ProjectionMatrix:
    """2x4 affine map from homogeneous 3D points to radar BEV (x, z)."""

    m: np.ndarray
    rms_residual: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (2, 4):
            raise ValueError(f"projection must be 2x4, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("projection contains non-finite entries")
        object.__setattr__(self, "m", m)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Project (n, 3) stereo points to (n, 2) BEV coordinates."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        hom = np.hstack([pts, np.ones((len(pts), 1))])
        return hom @ self.m.T


def connect_patterns(mask: np.ndarray, gap: int = 1) -> np.ndarray:
    """Bridge fragmented RD detections with a morphological closing.

    Uses a full (2*gap+1) x (2*gap+1) structuring element, joining fragments
    separated by up to 2*gap empty cells. The doppler axis (axis 1) wraps;
    the range axis is padded with background. Closing is idempotent.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError(f"expected a 2D mask, got shape {mask.shape}")
    if gap < 1:
        return mask.copy()
    g = gap
    struct = np.ones((2 * g + 1, 2 * g + 1), dtype=bool)
    # Pad by 2g so both dilation and erosion see the true (unbounded /
    # circular) neighborhood everywhere in the cropped region.
    padded = np.pad(mask, ((2 * g, 2 * g), (0, 0)), mode="constant")
    padded = np.pad(padded, ((0, 0), (2 * g, 2 * g)), mode="wrap")
    dilated = ndimage.binary_dilation(padded, structure=struct)
    closed = ndimage.binary_erosion(dilated, structure=struct, border_value=0)
    return closed[2 * g:-2 * g, 2 * g:-2 * g]


def dbscan(points, cfg: DbscanConfig) -> np.ndarray:
    """Density-based clustering of (n, 3) points; returns labels, -1 = noise.

    Distances are Euclidean after per-axis scaling; the third axis is
    treated circularly with ``cfg.doppler_period`` (set it to None for a
    plain linear axis). A point's eps-neighborhood includes the point
    itself. Labeling is deterministic: points are visited in index order
    and cluster ids are assigned in discovery order.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = len(pts)
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    if pts.shape[1] != 3:
        raise ValueError(f"expected (n, 3) points, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")

    neighbors = _eps_neighborhoods(pts, cfg)
    core = np.array([len(nb) >= cfg.min_pts for nb in neighbors])

    cluster_id = 0
    visited = np.zeros(n, dtype=bool)
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        visited[i] = True
        labels[i] = cluster_id
        queue = deque(neighbors[i])
        while queue:
            j = queue.popleft()
            if labels[j] == -1:
                labels[j] = cluster_id
            if visited[j]:
                continue
            visited[j] = True
            if core[j]:
                queue.extend(neighbors[j])
        cluster_id += 1
    return labels


def _eps_neighborhoods(pts: np.ndarray, cfg: DbscanConfig) -> list[np.ndarray]:
    """Index arrays of each point's eps-ball (self included), chunked O(n^2)."""
    scale = np.asarray(cfg.axis_scale, dtype=np.float64)
    eps2 = cfg.eps * cfg.eps
    scaled_lin = pts[:, :2] * scale[:2]
    d_axis = pts[:, 2]
    neighbors: list[np.ndarray] = []
    chunk = max(1, int(2**22 // max(len(pts), 1)))
    for start in range(0, len(pts), chunk):
        stop = min(start + chunk, len(pts))
        d2 = ((scaled_lin[start:stop, None, :] - scaled_lin[None, :, :]) ** 2).sum(-1)
        dd = np.abs(d_axis[start:stop, None] - d_axis[None, :])
        if cfg.doppler_period is not None:
            dd = np.minimum(dd, cfg.doppler_period - dd)
        d2 += (dd * scale[2]) ** 2
        for row in d2 <= eps2:
            neighbors.append(np.flatnonzero(row))
    return neighbors


def extract_instances(rad: RadCube, mask_rd: np.ndarray,
                      azimuth_rel_threshold: float = 0.5,
                      db: DbscanConfig = DbscanConfig(),
                      frame_id: str = "") -> list[Instance]:
    """Expand RD detections along azimuth and cluster into instances.

    For every detected RD cell (n, k), azimuth bins whose magnitude reaches
    ``azimuth_rel_threshold`` times that cell's azimuth peak are marked; the
    marked (n, a, k) cells are clustered by DBSCAN and every cluster becomes
    one instance. An empty mask yields an empty list.
    """
    if rad.stage != "complex":
        raise ValueError(f"extract_instances expects a complex cube, got {rad.stage!r}")
    mask_rd = np.asarray(mask_rd, dtype=bool)
    det = np.argwhere(mask_rd)
    if det.size == 0:
        return []

    cols = rad.data[det[:, 0], :, det[:, 1]]  # (m, 256) azimuth profiles
    mag = np.abs(cols)
    peak = mag.max(axis=1)
    ok = peak > 0
    det, mag, peak = det[ok], mag[ok], peak[ok]
    if det.size == 0:
        return []

    marked = mag >= azimuth_rel_threshold * peak[:, None]
    rows, abins = np.nonzero(marked)
    cells = np.column_stack([det[rows, 0], abins, det[rows, 1]])

    labels = dbscan(cells, db)
    instances = []
    for cid in range(labels.max() + 1 if labels.size else 0):
        member = cells[labels == cid]
        if len(member):
            instances.append(Instance(member, frame_id=frame_id))
    return instances


def _min_circular_cover(bins: np.ndarray, period: int = DOPPLER_BINS) -> tuple[float, float]:
    """Shortest circular interval [start, start+length) covering all bins.

    Bins are unit cells [b, b+1); ties between equally large gaps resolve to
    the first gap in sorted order.
    """
    u = np.unique(np.asarray(bins, dtype=np.int64) % period)
    if len(u) == period:
        return 0.0, float(period)
    nxt = np.roll(u, -1)
    gaps = (nxt - u - 1) % period
    j = int(np.argmax(gaps))
    start = float(u[(j + 1) % len(u)])
    length = float(period - gaps[j])
    return start, length


def instance_to_boxes(inst: Instance,
                      range_bin_m: float = RANGE_BIN_METERS) -> tuple[Box3D, Box2D]:
    """Tightest boxes around an instance on the RAD grid and the BEV plane.

    The 3D box treats each cell as the unit cube [b, b+1) per axis, with a
    wrap-aware minimal cover on doppler. The 2D box bounds the exact
    Cartesian footprints of the cells' polar sectors, so every cell's image
    is contained in it by construction.
    """
    cells = inst.cells
    r_lo, r_hi = float(cells[:, 0].min()), float(cells[:, 0].max() + 1)
    a_lo, a_hi = float(cells[:, 1].min()), float(cells[:, 1].max() + 1)
    d_start, d_len = _min_circular_cover(cells[:, 2])
    box3d = Box3D(
        center=((r_lo + r_hi) / 2, (a_lo + a_hi) / 2,
                (d_start + d_len / 2) % DOPPLER_BINS),
        size=(r_hi - r_lo, a_hi - a_lo, d_len),
        class_id=inst.class_id,
    )

    r0 = cells[:, 0].astype(np.float64) * range_bin_m
    r1 = (cells[:, 0] + 1).astype(np.float64) * range_bin_m
    t0 = np.arcsin(np.clip(azimuth_bin_to_sin(cells[:, 1]), -1.0, 1.0))
    t1 = np.arcsin(np.clip(azimuth_bin_to_sin(cells[:, 1] + 1), -1.0, 1.0))
    # Exact bounding box of the polar sector [r0,r1] x [t0,t1]: cos peaks at
    # theta = 0 when the sector straddles boresight; sin is monotone.
    cos_hi = np.where((t0 <= 0) & (t1 >= 0), 1.0, np.maximum(np.cos(t0), np.cos(t1)))
    cos_lo = np.minimum(np.cos(t0), np.cos(t1))
    x_hi = (r1 * cos_hi).max()
    x_lo = (r0 * cos_lo).min()
    z_hi = np.where(np.sin(t1) >= 0, r1 * np.sin(t1), r0 * np.sin(t1)).max()
    z_lo = np.where(np.sin(t0) <= 0, r1 * np.sin(t0), r0 * np.sin(t0)).min()
    box2d = Box2D(
        center=((x_lo + x_hi) / 2, (z_lo + z_hi) / 2),
        size=(max(z_hi - z_lo, 1e-9), max(x_hi - x_lo, 1e-9)),
        class_id=inst.class_id,
    )
    return box3d, box2d


def fit_projection(stereo_pts, radar_pts) -> ProjectionMatrix:
    """Least-squares fit of the 2x4 affine stereo -> radar-BEV projection.

    Needs at least 4 correspondences spanning a full-rank system; returns
    the matrix together with the RMS point residual.
    """
    p = np.atleast_2d(np.asarray(stereo_pts, dtype=np.float64))
    q = np.atleast_2d(np.asarray(radar_pts, dtype=np.float64))
    if p.shape[0] != q.shape[0]:
        raise ValueError("point lists differ in length")
    if p.shape[0] < 4:
        raise ValueError(f"need >= 4 correspondences, got {p.shape[0]}")
    if p.shape[1] != 3 or q.shape[1] != 2:
        raise ValueError("expected (n, 3) stereo and (n, 2) radar points")
    a = np.hstack([p, np.ones((len(p), 1))])
    if np.linalg.matrix_rank(a) < 4:
        raise ValueError("rank-deficient system: correspondences are degenerate")
    x, *_ = np.linalg.lstsq(a, q, rcond=None)
    m = x.T
    res = a @ x - q
    rms = math.sqrt(float((res ** 2).sum(axis=1).mean()))
    return ProjectionMatrix(m, rms)


def transfer_labels(instances: list[Instance], labeled_points,
                    margin: float = 0.5,
                    range_bin_m: float = RANGE_BIN_METERS) -> list[Instance]:
    """Vote class labels onto instances from labeled BEV points.

    ``labeled_points`` is a sequence of ((x, z), class_id) already in the
    radar BEV frame. Each instance takes the majority class of the points
    inside its 2D box inflated by ``margin`` meters; ties go to the class
    whose points' centroid lies nearest the box center, then to the lowest
    class id. Instances with no interior points keep class_id None.
    """
    pts = [(np.asarray(p, dtype=np.float64), int(c)) for p, c in labeled_points]
    out = []
    for inst in instances:
        _, box2d = instance_to_boxes(inst, range_bin_m)
        cx, cz = box2d.center
        hw = box2d.size[1] / 2 + margin  # x extent
        hz = box2d.size[0] / 2 + margin  # z extent
        inside: dict[int, list[np.ndarray]] = {}
        for p, c in pts:
            if abs(p[0] - cx) <= hw and abs(p[1] - cz) <= hz:
                inside.setdefault(c, []).append(p)
        if not inside:
            out.append(Instance(inst.cells, None, inst.frame_id))
            continue
        best = max(len(v) for v in inside.values())
        tied = sorted(c for c, v in inside.items() if len(v) == best)
        if len(tied) > 1:
            center = np.array([cx, cz])
            tied.sort(key=lambda c: (
                float(np.linalg.norm(np.mean(inside[c], axis=0) - center)), c))
        out.append(Instance(inst.cells, tied[0], inst.frame_id))
    return out
