"""Box algebra shared by annotation, decoding and evaluation.

Coordinate conventions used everywhere in the package:

* 3D boxes live on the range-azimuth-doppler bin grid (256, 256, 64).
  Range and azimuth are linear axes; the doppler axis is an FFT axis and
  therefore periodic, so doppler extents and overlaps are computed on the
  circle of circumference 64.
* 2D boxes live on the Cartesian bird-eye-view plane in meters, x forward
  (depth), z lateral (width). ``size = (w, l)`` is (lateral, forward) extent.
* The polar -> Cartesian map is x = r*cos(theta), z = r*sin(theta) with
  theta in [-pi/2, pi/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# Display/scale constants. The bin -> meter factor is an arbitrary but fixed
# configuration default (the detection pipeline itself works in bin units).
RANGE_BIN_METERS = 0.1953
DOPPLER_BIN_MPS = 0.42

RANGE_BINS = 256
AZIMUTH_BINS = 256
DOPPLER_BINS = 64


@dataclass(frozen=True)
class Box3D:
    """Axis-aligned box on the RAD bin grid.

    ``center`` is (range, azimuth, doppler) in bins, ``size`` the per-axis
    extent in bins. The doppler center is interpreted modulo 64 and the
    doppler size may not exceed 64.
    """

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    class_id: int | None = None
    score: float | None = None

    def __post_init__(self):
        if len(self.center) != 3 or len(self.size) != 3:
            raise ValueError("3D box needs 3 center and 3 size components")
        r, a, _ = self.center
        if not all(s > 0 for s in self.size):
            raise ValueError(f"box sizes must be positive, got {self.size}")
        if self.size[2] > DOPPLER_BINS:
            raise ValueError(f"doppler size {self.size[2]} exceeds {DOPPLER_BINS}")
        if not (0.0 <= r <= RANGE_BINS and 0.0 <= a <= AZIMUTH_BINS):
            raise ValueError(f"range/azimuth center {(r, a)} outside grid")
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned box on the Cartesian BEV plane, meters."""

    center: tuple[float, float]
    size: tuple[float, float]
    class_id: int | None = None
    score: float | None = None

    def __post_init__(self):
        if len(self.center) != 2 or len(self.size) != 2:
            raise ValueError("2D box needs 2 center and 2 size components")
        if not all(s > 0 for s in self.size):
            raise ValueError(f"box sizes must be positive, got {self.size}")
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class CartesianGrid:
    """BEV raster: x forward in [0, r_max], z lateral in [-r_max, r_max].

    The polar field of view maps onto a plane twice as wide as it is deep,
    hence width_cells == 2 * depth_cells.
    """

    depth_cells: int = 256
    width_cells: int = 512
    meters_per_cell: float = RANGE_BIN_METERS

    def __post_init__(self):
        if self.width_cells != 2 * self.depth_cells:
            raise ValueError("width_cells must equal 2 * depth_cells")
        if self.meters_per_cell <= 0:
            raise ValueError("meters_per_cell must be positive")

    @property
    def r_max(self) -> float:
        return self.depth_cells * self.meters_per_cell


def polar_to_cart(r, theta):
    """Map range/azimuth polar coordinates to Cartesian (x, z).

    x = r*cos(theta) is the forward (depth) axis, z = r*sin(theta) the
    lateral one. Accepts scalars or arrays. theta must lie in
    [-pi/2, pi/2] and r must be non-negative.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(r < 0):
        raise ValueError("negative range")
    if np.any(np.abs(theta) > math.pi / 2 + 1e-12):
        raise ValueError("azimuth outside [-pi/2, pi/2]")
    x = r * np.cos(theta)
    z = r * np.sin(theta)
    if x.ndim == 0:
        return float(x), float(z)
    return x, z


def azimuth_bin_to_sin(a_bin):
    """Sine of the look angle at a (fractional) azimuth bin coordinate.

    Bin coordinate a covers sin(theta) = a/128 - 1; the fft-shifted axis
    puts boresight at bin 128.
    """
    return np.asarray(a_bin, dtype=float) / (AZIMUTH_BINS / 2) - 1.0


def resample_ra_to_cart(ra_map: np.ndarray, grid: CartesianGrid,
                        range_bin_m: float = RANGE_BIN_METERS) -> np.ndarray:
    """Resample a (256, 256) range-azimuth map onto a Cartesian BEV raster.

    For every Cartesian cell center the polar coordinates are computed,
    converted to fractional (range bin, azimuth bin) positions and the RA
    map is sampled bilinearly (edge-clamped). Cells outside the field of
    view (r > r_max) are set to 0.

    Returns an array of shape (width_cells, depth_cells): axis 0 is the
    lateral z axis, axis 1 the forward x axis.
    """
    ra_map = np.asarray(ra_map, dtype=np.float64)
    if ra_map.shape != (RANGE_BINS, AZIMUTH_BINS):
        raise ValueError(f"expected ({RANGE_BINS}, {AZIMUTH_BINS}) RA map, got {ra_map.shape}")

    mpc = grid.meters_per_cell
    x = (np.arange(grid.depth_cells) + 0.5) * mpc
    z = (np.arange(grid.width_cells) + 0.5) * mpc - grid.r_max
    zz = z[:, None]
    xx = x[None, :]
    r = np.hypot(xx, zz)
    valid = r <= grid.r_max

    # Fractional sample positions: range bin i has its center at
    # (i + 0.5) * range_bin_m; azimuth bin a has center sin = (a+0.5)/128 - 1.
    with np.errstate(invalid="ignore", divide="ignore"):
        sin_t = np.where(r > 0, zz / np.maximum(r, 1e-30), 0.0)
    rbin = r / range_bin_m - 0.5
    abin = (sin_t + 1.0) * (AZIMUTH_BINS / 2) - 0.5

    out = _bilinear(ra_map, rbin, abin)
    out[~valid] = 0.0
    return out


def _bilinear(img: np.ndarray, ii, jj):
    """Edge-clamped bilinear sampling of img at fractional (ii, jj)."""
    h, w = img.shape
    ii = np.clip(ii, 0.0, h - 1.0)
    jj = np.clip(jj, 0.0, w - 1.0)
    i0 = np.floor(ii).astype(np.intp)
    j0 = np.floor(jj).astype(np.intp)
    i1 = np.minimum(i0 + 1, h - 1)
    j1 = np.minimum(j0 + 1, w - 1)
    fi = ii - i0
    fj = jj - j0
    return ((1 - fi) * (1 - fj) * img[i0, j0]
            + (1 - fi) * fj * img[i0, j1]
            + fi * (1 - fj) * img[i1, j0]
            + fi * fj * img[i1, j1])


def _linear_overlap(lo_a: float, hi_a: float, lo_b: float, hi_b: float) -> float:
    return max(0.0, min(hi_a, hi_b) - max(lo_a, lo_b))


def circular_overlap(start_a: float, len_a: float, start_b: float, len_b: float,
                     period: float = float(DOPPLER_BINS)) -> float:
    """Total overlap of two arcs on a circle of the given circumference.

    Arcs are given as (start, length) with length <= period. The overlap may
    consist of two segments when the union wraps all the way around; both are
    counted.
    """
    a0 = start_a % period
    b0 = start_b % period
    total = 0.0
    for k in (-1.0, 0.0, 1.0):
        total += _linear_overlap(a0, a0 + len_a, b0 + k * period, b0 + len_b + k * period)
    return min(total, len_a, len_b)


def iou3d(a: Box3D, b: Box3D) -> float:
    """IoU of two RAD boxes; range/azimuth linear, doppler on the circle."""
    ov_r = _linear_overlap(a.center[0] - a.size[0] / 2, a.center[0] + a.size[0] / 2,
                           b.center[0] - b.size[0] / 2, b.center[0] + b.size[0] / 2)
    ov_a = _linear_overlap(a.center[1] - a.size[1] / 2, a.center[1] + a.size[1] / 2,
                           b.center[1] - b.size[1] / 2, b.center[1] + b.size[1] / 2)
    ov_d = circular_overlap(a.center[2] - a.size[2] / 2, a.size[2],
                            b.center[2] - b.size[2] / 2, b.size[2])
    inter = ov_r * ov_a * ov_d
    if inter <= 0.0:
        return 0.0
    vol_a = a.size[0] * a.size[1] * a.size[2]
    vol_b = b.size[0] * b.size[1] * b.size[2]
    return inter / (vol_a + vol_b - inter)


def iou2d(a: Box2D, b: Box2D) -> float:
    """Standard axis-aligned IoU on the BEV plane."""
    ov_z = _linear_overlap(a.center[1] - a.size[0] / 2, a.center[1] + a.size[0] / 2,
                           b.center[1] - b.size[0] / 2, b.center[1] + b.size[0] / 2)
    ov_x = _linear_overlap(a.center[0] - a.size[1] / 2, a.center[0] + a.size[1] / 2,
                           b.center[0] - b.size[1] / 2, b.center[0] + b.size[1] / 2)
    inter = ov_z * ov_x
    if inter <= 0.0:
        return 0.0
    area_a = a.size[0] * a.size[1]
    area_b = b.size[0] * b.size[1]
    return inter / (area_a + area_b - inter)


def box3d_contains(box: Box3D, point: Sequence[float]) -> bool:
    """Whether a (range, azimuth, doppler) point lies inside the box.

    The doppler test is wrap-aware: the point is inside if it falls on the
    circular interval covered by the box.
    """
    r, a, d = point
    if abs(r - box.center[0]) > box.size[0] / 2:
        return False
    if abs(a - box.center[1]) > box.size[1] / 2:
        return False
    start = (box.center[2] - box.size[2] / 2) % DOPPLER_BINS
    offset = (d - start) % DOPPLER_BINS
    return offset <= box.size[2]


def nms_indices(boxes: Sequence, iou_threshold: float, iou_fn: Callable) -> list[int]:
    """Greedy class-wise non-maximum suppression, returning kept indices.

    Boxes are visited in (score desc, input index asc) order; a box is
    dropped when a kept box of the same class overlaps it with
    IoU > iou_threshold.
    """
    for b in boxes:
        if b.score is None:
            raise ValueError("nms requires scored boxes")
    order = sorted(range(len(boxes)), key=lambda i: (-boxes[i].score, i))
    kept: list[int] = []
    suppressed = [False] * len(boxes)
    for i in order:
        if suppressed[i]:
            continue
        kept.append(i)
        for j in order:
            if j == i or suppressed[j]:
                continue
            if boxes[j].class_id == boxes[i].class_id and iou_fn(boxes[i], boxes[j]) > iou_threshold:
                suppressed[j] = True
    return kept


def nms(boxes: Sequence, iou_threshold: float, iou_fn: Callable) -> list:
    """Greedy class-wise NMS returning the kept boxes."""
    return [boxes[i] for i in nms_indices(boxes, iou_threshold, iou_fn)]
