"""K-means anchor fitting over ground-truth box sizes.

Anchors are prior box sizes for the detection heads (3D sizes in bins, 2D
sizes in meters). Clustering uses the shape-aware distance
d(box, anchor) = 1 - IoU of the two sizes placed at a common origin, with
k-means++ seeding and per-dimension mean centroids. The resulting
``mean_error`` is the average 1 - IoU between every box and its nearest
anchor; a value above 0.10 triggers a warning (not a failure).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

KMEANS_MAX_ITER = 300
MEAN_ERROR_THRESHOLD = 0.10


@dataclass(frozen=True)
class AnchorSet:
    anchors: tuple[tuple[float, ...], ...]
    k: int
    mean_error: float

    def __post_init__(self):
        if self.k != len(self.anchors):
            raise ValueError("k must equal the number of anchors")
        if any(min(a) <= 0 for a in self.anchors):
            raise ValueError("anchor sizes must be positive")
        if not (0.0 <= self.mean_error <= 1.0):
            raise ValueError("mean_error must lie in [0, 1]")

    @property
    def dim(self) -> int:
        return len(self.anchors[0])

    def as_array(self) -> np.ndarray:
        return np.asarray(self.anchors, dtype=np.float64)

    def to_json(self) -> dict:
        return {"k": self.k, "dim": self.dim,
                "anchors": [list(a) for a in self.anchors],
                "mean_error": self.mean_error}

    @classmethod
    def from_json(cls, obj: dict) -> "AnchorSet":
        return cls(tuple(tuple(float(v) for v in a) for a in obj["anchors"]),
                   int(obj["k"]), float(obj["mean_error"]))


def size_iou(sizes: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """IoU matrix of origin-centered boxes: (n, d) sizes vs (k, d) anchors."""
    sizes = np.atleast_2d(np.asarray(sizes, dtype=np.float64))
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    inter = np.minimum(sizes[:, None, :], anchors[None, :, :]).prod(axis=2)
    vol_s = sizes.prod(axis=1)[:, None]
    vol_a = anchors.prod(axis=1)[None, :]
    return inter / (vol_s + vol_a - inter)


def fit_anchors(sizes, k: int = 6, seed: int = 0,
                max_iter: int = KMEANS_MAX_ITER) -> AnchorSet:
    """Cluster box sizes into k anchors with IoU-distance k-means.

    k-means++ initialization from ``seed``; iterates to an assignment fixed
    point (or ``max_iter``). Empty clusters keep their previous centroid,
    which also makes fully degenerate inputs (all boxes identical) collapse
    every anchor onto that size.
    """
    sizes = np.atleast_2d(np.asarray(sizes, dtype=np.float64))
    n = len(sizes)
    if n < k:
        raise ValueError(f"need at least k={k} boxes, got {n}")
    if np.any(sizes <= 0):
        raise ValueError("box sizes must be positive")

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(sizes, k, rng)

    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        dist = 1.0 - size_iou(sizes, centers)
        new_assign = np.argmin(dist, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            member = sizes[assign == c]
            if len(member):
                centers[c] = member.mean(axis=0)

    best_iou = size_iou(sizes, centers).max(axis=1)
    mean_error = float(np.mean(1.0 - best_iou))
    if mean_error > MEAN_ERROR_THRESHOLD:
        warnings.warn(
            f"anchor mean error {mean_error:.3f} exceeds {MEAN_ERROR_THRESHOLD:.2f}",
            stacklevel=2)
    return AnchorSet(tuple(tuple(float(v) for v in c) for c in centers),
                     k, mean_error)


def _kmeans_pp_init(sizes: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding under the 1 - IoU distance."""
    n = len(sizes)
    centers = np.empty((k, sizes.shape[1]), dtype=np.float64)
    centers[0] = sizes[rng.integers(n)]
    d2 = (1.0 - size_iou(sizes, centers[:1])[:, 0]) ** 2
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[c] = sizes[rng.integers(n)]
        else:
            centers[c] = sizes[rng.choice(n, p=d2 / total)]
        d_new = (1.0 - size_iou(sizes, centers[c:c + 1])[:, 0]) ** 2
        d2 = np.minimum(d2, d_new)
    return centers


def assign_anchor(size, anchor_set: AnchorSet) -> int:
    """Index of the anchor with the highest IoU; ties go to the lowest index."""
    iou = size_iou(np.asarray(size, dtype=np.float64)[None, :],
                   anchor_set.as_array())[0]
    return int(np.argmax(iou))
