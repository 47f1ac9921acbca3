"""Decoding of exported detection-head tensors into boxes.

The 3D head output has shape (16, 16, 4, A, 7 + C): a coarse grid over the
RAD tensor with a stride of 16 bins per axis, A anchors and per-anchor
channels (t_x, t_y, t_z, t_w, t_h, t_d, t_obj, class logits). The 2D head
output has shape (32, 16, A, 5 + C) over the Cartesian BEV feature map
(axis 0 lateral, axis 1 forward) with channels (t_x, t_y, t_w, t_h, t_obj,
classes).

Decoding follows the usual anchor-grid parameterization: a cell (i, ...)
with offsets t predicts center (i + sigmoid(t)) * stride and size
anchor * exp(t_size); objectness is sigmoid(t_obj) and class probabilities
a softmax. The doppler center wraps modulo 64 and the doppler size is
clamped to 64. ``encode3d``/``encode2d`` invert the map exactly, which the
tests use for round-trip checking and trainers can use to build targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchors import AnchorSet, assign_anchor
from .geometry import (Box2D, Box3D, CartesianGrid, DOPPLER_BINS, iou2d,
                       iou3d, nms_indices)

GRID3D = (16, 16, 4)
STRIDES3D = (16.0, 16.0, 16.0)
GRID2D = (32, 16)

NMS_THRESHOLD_3D = 0.1
NMS_THRESHOLD_2D = 0.3
OBJECTNESS_THRESHOLD = 0.5


@dataclass(frozen=True)
class Detection:
    """A decoded box with its objectness and class probability."""

    box: Box3D | Box2D
    class_id: int
    objectness: float
    class_prob: float

    def __post_init__(self):
        if not (0.0 <= self.objectness <= 1.0 and 0.0 <= self.class_prob <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")

    @property
    def score(self) -> float:
        return self.objectness * self.class_prob


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def _logit(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p / (1.0 - p))


def _softmax(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    x = x - x.max(axis=axis, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=axis, keepdims=True)


def decode3d(raw: np.ndarray, anchors: AnchorSet,
             obj_threshold: float = OBJECTNESS_THRESHOLD) -> list[Detection]:
    """Decode a (16, 16, 4, A, 7+C) head tensor into scored RAD boxes.

    Emits one detection per (cell, anchor) whose objectness reaches
    ``obj_threshold``; the detection's class is the softmax argmax.
    """
    raw = np.asarray(raw, dtype=np.float64)
    a_arr = anchors.as_array()
    if a_arr.shape[1] != 3:
        raise ValueError("decode3d needs 3D anchors")
    n_a = len(a_arr)
    if raw.ndim != 5 or raw.shape[:3] != GRID3D or raw.shape[3] != n_a \
            or raw.shape[4] < 8:
        raise ValueError(
            f"head shape {raw.shape} inconsistent with grid {GRID3D}, "
            f"{n_a} anchors and >= 1 class")

    obj = _sigmoid(raw[..., 6])
    keep = np.argwhere(obj >= obj_threshold)
    if keep.size == 0:
        return []
    cls_prob = _softmax(raw[..., 7:], axis=-1)

    dets = []
    for i, j, m, q in keep:
        t = raw[i, j, m, q]
        center = ((i + _sigmoid(t[0])) * STRIDES3D[0],
                  (j + _sigmoid(t[1])) * STRIDES3D[1],
                  ((m + _sigmoid(t[2])) * STRIDES3D[2]) % DOPPLER_BINS)
        size = a_arr[q] * np.exp(t[3:6])
        size[2] = min(size[2], float(DOPPLER_BINS))
        probs = cls_prob[i, j, m, q]
        cid = int(np.argmax(probs))
        o = float(obj[i, j, m, q])
        p = float(probs[cid])
        box = Box3D(center, tuple(size), cid, o * p)
        dets.append(Detection(box, cid, o, p))
    return dets


def decode2d(raw: np.ndarray, anchors: AnchorSet, grid: CartesianGrid,
             obj_threshold: float = OBJECTNESS_THRESHOLD) -> list[Detection]:
    """Decode a (32, 16, A, 5+C) head tensor into scored BEV boxes (meters)."""
    raw = np.asarray(raw, dtype=np.float64)
    a_arr = anchors.as_array()
    if a_arr.shape[1] != 2:
        raise ValueError("decode2d needs 2D anchors")
    n_a = len(a_arr)
    if raw.ndim != 4 or raw.shape[:2] != GRID2D or raw.shape[2] != n_a \
            or raw.shape[3] < 6:
        raise ValueError(
            f"head shape {raw.shape} inconsistent with grid {GRID2D}, "
            f"{n_a} anchors and >= 1 class")

    r_max = grid.r_max
    stride_w = 2.0 * r_max / GRID2D[0]  # lateral cells
    stride_d = r_max / GRID2D[1]        # forward cells

    obj = _sigmoid(raw[..., 4])
    keep = np.argwhere(obj >= obj_threshold)
    if keep.size == 0:
        return []
    cls_prob = _softmax(raw[..., 5:], axis=-1)

    dets = []
    for i, j, q in keep:
        t = raw[i, j, q]
        z = (i + _sigmoid(t[0])) * stride_w - r_max
        x = (j + _sigmoid(t[1])) * stride_d
        size = a_arr[q] * np.exp(t[2:4])
        probs = cls_prob[i, j, q]
        cid = int(np.argmax(probs))
        o = float(obj[i, j, q])
        p = float(probs[cid])
        box = Box2D((x, z), tuple(size), cid, o * p)
        dets.append(Detection(box, cid, o, p))
    return dets


def encode3d(boxes: list[Box3D], anchors: AnchorSet, n_classes: int,
             obj_logit: float = 3.0, class_logit: float = 6.0) -> np.ndarray:
    """Build the raw head tensor whose decode recovers the given boxes.

    Each box lands in the grid cell containing its center with its best
    anchor (later boxes overwrite colliding earlier ones). All other cells
    carry a strongly negative objectness logit.
    """
    a_arr = anchors.as_array()
    raw = np.zeros(GRID3D + (len(a_arr), 7 + n_classes), dtype=np.float64)
    raw[..., 6] = -20.0
    for box in boxes:
        fr = box.center[0] / STRIDES3D[0]
        fa = box.center[1] / STRIDES3D[1]
        fd = (box.center[2] % DOPPLER_BINS) / STRIDES3D[2]
        i, j, m = (min(int(fr), GRID3D[0] - 1), min(int(fa), GRID3D[1] - 1),
                   min(int(fd), GRID3D[2] - 1))
        q = assign_anchor(box.size, anchors)
        t = raw[i, j, m, q]
        t[0] = _logit(np.clip(fr - i, 1e-7, 1 - 1e-7))
        t[1] = _logit(np.clip(fa - j, 1e-7, 1 - 1e-7))
        t[2] = _logit(np.clip(fd - m, 1e-7, 1 - 1e-7))
        t[3:6] = np.log(np.asarray(box.size) / a_arr[q])
        t[6] = obj_logit
        t[7:] = 0.0
        if box.class_id is not None:
            t[7 + box.class_id] = class_logit
    return raw


def encode2d(boxes: list[Box2D], anchors: AnchorSet, grid: CartesianGrid,
             n_classes: int, obj_logit: float = 3.0,
             class_logit: float = 6.0) -> np.ndarray:
    """Inverse of decode2d for the given boxes (see encode3d)."""
    a_arr = anchors.as_array()
    r_max = grid.r_max
    stride_w = 2.0 * r_max / GRID2D[0]
    stride_d = r_max / GRID2D[1]
    raw = np.zeros(GRID2D + (len(a_arr), 5 + n_classes), dtype=np.float64)
    raw[..., 4] = -20.0
    for box in boxes:
        fz = (box.center[1] + r_max) / stride_w
        fx = box.center[0] / stride_d
        i = min(max(int(fz), 0), GRID2D[0] - 1)
        j = min(max(int(fx), 0), GRID2D[1] - 1)
        q = assign_anchor(box.size, anchors)
        t = raw[i, j, q]
        t[0] = _logit(np.clip(fz - i, 1e-7, 1 - 1e-7))
        t[1] = _logit(np.clip(fx - j, 1e-7, 1 - 1e-7))
        t[2:4] = np.log(np.asarray(box.size) / a_arr[q])
        t[4] = obj_logit
        t[5:] = 0.0
        if box.class_id is not None:
            t[5 + box.class_id] = class_logit
    return raw


def build_targets3d(boxes: list[Box3D], anchors: AnchorSet):
    """Matched-cell training targets for the 3D head loss.

    Each classed box claims the grid cell containing its center and its best
    anchor; collisions keep the last box. Returns (pos_idx, centers, sizes,
    class_ids) in the layout ``losses.head_loss`` expects, with centers in
    grid-axis order (range, azimuth, doppler).
    """
    slots: dict[tuple[int, int, int, int], tuple] = {}
    for box in boxes:
        if box.class_id is None:
            continue
        fr = box.center[0] / STRIDES3D[0]
        fa = box.center[1] / STRIDES3D[1]
        fd = (box.center[2] % DOPPLER_BINS) / STRIDES3D[2]
        cell = (min(int(fr), GRID3D[0] - 1), min(int(fa), GRID3D[1] - 1),
                min(int(fd), GRID3D[2] - 1), assign_anchor(box.size, anchors))
        center = (box.center[0], box.center[1], box.center[2] % DOPPLER_BINS)
        slots[cell] = (center, box.size, box.class_id)
    return _targets_from_slots(slots, 3)


def build_targets2d(boxes: list[Box2D], anchors: AnchorSet, grid: CartesianGrid):
    """Matched-cell targets for the 2D head loss; centers in (z, x) axis order."""
    r_max = grid.r_max
    stride_w = 2.0 * r_max / GRID2D[0]
    stride_d = r_max / GRID2D[1]
    slots: dict[tuple[int, int, int], tuple] = {}
    for box in boxes:
        if box.class_id is None:
            continue
        fz = (box.center[1] + r_max) / stride_w
        fx = box.center[0] / stride_d
        cell = (min(max(int(fz), 0), GRID2D[0] - 1),
                min(max(int(fx), 0), GRID2D[1] - 1),
                assign_anchor(box.size, anchors))
        slots[cell] = ((box.center[1], box.center[0]), box.size, box.class_id)
    return _targets_from_slots(slots, 2)


def _targets_from_slots(slots: dict, d: int):
    if not slots:
        return (np.zeros((0, d + 1), dtype=np.int64), np.zeros((0, d)),
                np.zeros((0, d)), np.zeros(0, dtype=np.int64))
    keys = sorted(slots)
    pos_idx = np.array(keys, dtype=np.int64)
    centers = np.array([slots[k][0] for k in keys], dtype=np.float64)
    sizes = np.array([slots[k][1] for k in keys], dtype=np.float64)
    classes = np.array([slots[k][2] for k in keys], dtype=np.int64)
    return pos_idx, centers, sizes, classes


def head2d_geometry(grid: CartesianGrid):
    """(strides, origin) of the 2D head in meters, grid-axis order (z, x)."""
    r_max = grid.r_max
    return ((2.0 * r_max / GRID2D[0], r_max / GRID2D[1]), (-r_max, 0.0))


def postprocess(dets: list[Detection], nms_threshold: float | None = None) -> list[Detection]:
    """Class-wise NMS on decoded detections; thresholds default 0.1 (3D) / 0.3 (2D)."""
    if not dets:
        return []
    is3d = isinstance(dets[0].box, Box3D)
    if nms_threshold is None:
        nms_threshold = NMS_THRESHOLD_3D if is3d else NMS_THRESHOLD_2D
    iou_fn = iou3d if is3d else iou2d
    boxes = [d.box for d in dets]
    kept = nms_indices(boxes, nms_threshold, iou_fn)
    return [dets[i] for i in kept]
