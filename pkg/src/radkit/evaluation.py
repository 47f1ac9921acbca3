"""Detection matching, average precision and dataset splitting.

AP follows the standard pooled protocol: detections of one class are ranked
by score over the whole dataset, matched greedily within their frame (one
match per ground-truth box, IoU at or above the threshold), and the area
under the all-point-interpolated precision envelope is reported per class
and IoU threshold in {0.1, 0.3, 0.5, 0.7}. mAP is the unweighted mean over
classes present in the ground truth; a class-pooled AP (all classes merged
into one ranking) is reported alongside.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .geometry import iou2d, iou3d

IOU_THRESHOLDS = (0.1, 0.3, 0.5, 0.7)


def match(dets: Sequence, gts: Sequence, iou_fn: Callable,
          threshold: float) -> tuple[np.ndarray, np.ndarray, int]:
    """Greedy matching of one frame's detections against its ground truth.

    Detections are visited in (score desc, input index asc) order; each
    claims the unmatched same-class ground-truth box of highest IoU >=
    threshold (ties to the lowest GT index). Returns per-detection TP and FP
    flags in input order plus the count of unmatched ground-truth boxes.
    """
    for b in dets:
        if b.score is None:
            raise ValueError("match requires scored detections")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    tp = np.zeros(len(dets), dtype=bool)
    taken = [False] * len(gts)
    for i in order:
        best_iou = 0.0
        best_j = -1
        for j, g in enumerate(gts):
            if taken[j] or g.class_id != dets[i].class_id:
                continue
            v = iou_fn(dets[i], g)
            if v >= threshold and v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0:
            tp[i] = True
            taken[best_j] = True
    fp = ~tp
    fn = len(gts) - int(tp.sum())
    return tp, fp, fn


def average_precision(tp_flags, n_gt: int) -> float | None:
    """All-point-interpolated AP from score-ordered TP flags.

    Returns None when the class has no ground truth (excluded from mAP).
    """
    if n_gt == 0:
        return None
    tp = np.asarray(tp_flags, dtype=np.float64)
    if len(tp) == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    precision = cum_tp / np.arange(1, len(tp) + 1)
    recall = cum_tp / n_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev = 0.0
    ap = 0.0
    for r, p in zip(recall, envelope):
        ap += (r - prev) * p
        prev = r
    return float(ap)


@dataclass
class EvalReport:
    """Per-class AP and counts at every IoU threshold."""

    thresholds: tuple[float, ...]
    class_names: tuple[str, ...]
    ap: dict = field(default_factory=dict)        # {thr: {class_id: AP}}
    map_: dict = field(default_factory=dict)      # {thr: mAP}
    pooled_ap: dict = field(default_factory=dict)  # {thr: AP over all classes}
    counts: dict = field(default_factory=dict)    # {thr: {class_id: (tp, fp, fn)}}

    def to_json(self) -> dict:
        def name(c):
            return self.class_names[c] if 0 <= c < len(self.class_names) else str(c)
        return {
            "thresholds": list(self.thresholds),
            "class_names": list(self.class_names),
            "ap": {str(t): {name(c): v for c, v in self.ap[t].items()}
                   for t in self.thresholds},
            "map": {str(t): self.map_[t] for t in self.thresholds},
            "pooled_ap": {str(t): self.pooled_ap[t] for t in self.thresholds},
            "counts": {str(t): {name(c): {"tp": v[0], "fp": v[1], "fn": v[2]}
                                for c, v in self.counts[t].items()}
                       for t in self.thresholds},
        }


def evaluate(dets_per_frame: Mapping[str, Sequence],
             gts_per_frame: Mapping[str, Sequence],
             mode: str = "3d",
             thresholds: Sequence[float] = IOU_THRESHOLDS,
             class_names: Sequence[str] = ()) -> EvalReport:
    """Pooled AP/mAP over frames at every IoU threshold.

    ``mode`` selects the IoU ('3d' wrap-aware on the RAD grid, '2d' BEV).
    Frames present only in one mapping count as empty on the other side.
    """
    if mode not in ("3d", "2d"):
        raise ValueError(f"mode must be '3d' or '2d', got {mode!r}")
    iou_fn = iou3d if mode == "3d" else iou2d

    frame_ids = sorted(set(dets_per_frame) | set(gts_per_frame))
    classes = sorted({g.class_id for fid in frame_ids
                      for g in gts_per_frame.get(fid, []) if g.class_id is not None}
                     | {d.class_id for fid in frame_ids
                        for d in dets_per_frame.get(fid, []) if d.class_id is not None})

    report = EvalReport(tuple(thresholds), tuple(class_names))
    for thr in thresholds:
        scored: dict[int, list[tuple[float, bool]]] = {c: [] for c in classes}
        n_gt = Counter()
        fn_count = Counter()
        for fid in frame_ids:
            dets = list(dets_per_frame.get(fid, []))
            gts = list(gts_per_frame.get(fid, []))
            for c in classes:
                c_dets = [d for d in dets if d.class_id == c]
                c_gts = [g for g in gts if g.class_id == c]
                tp, _, fn = match(c_dets, c_gts, iou_fn, thr)
                order = sorted(range(len(c_dets)),
                               key=lambda i: (-c_dets[i].score, i))
                scored[c].extend((c_dets[i].score, bool(tp[i])) for i in order)
                n_gt[c] += len(c_gts)
                fn_count[c] += fn

        ap_per_class = {}
        counts = {}
        for c in classes:
            ranked = sorted(scored[c], key=lambda sv: -sv[0])
            flags = [v for _, v in ranked]
            ap_per_class[c] = average_precision(flags, n_gt[c])
            tp_total = int(sum(flags))
            counts[c] = (tp_total, len(flags) - tp_total, fn_count[c])

        present = [c for c in classes if n_gt[c] > 0]
        report.ap[thr] = ap_per_class
        report.map_[thr] = (float(np.mean([ap_per_class[c] for c in present]))
                            if present else 0.0)
        pooled = sorted((sv for c in classes for sv in scored[c]),
                        key=lambda sv: -sv[0])
        report.pooled_ap[thr] = average_precision(
            [v for _, v in pooled], sum(n_gt.values())) or 0.0
        report.counts[thr] = counts
    return report


def split_dataset(frames: Sequence[tuple[str, Sequence[int]]],
                  ratios: tuple[float, float] = (0.8, 0.2),
                  seed: int = 0) -> tuple[list[str], list[str]]:
    """Class-stratified random split of frames into two sets.

    ``frames`` is a sequence of (frame_id, class ids in the frame). Frames
    are grouped by their sorted class multiset; each group is shuffled
    deterministically per seed and split by the first ratio with rounding
    to nearest, so both splits follow the per-class distribution of the
    whole dataset as closely as the group sizes permit.
    """
    if not frames:
        raise ValueError("no frames to split")
    if abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ValueError("ratios must be non-negative and sum to 1")

    groups: dict[tuple[int, ...], list[str]] = {}
    for fid, classes in frames:
        groups.setdefault(tuple(sorted(classes)), []).append(str(fid))

    rng = np.random.default_rng(seed)
    first: list[str] = []
    second: list[str] = []
    for key in sorted(groups):
        members = sorted(groups[key])
        rng.shuffle(members)
        n_first = int(np.floor(ratios[0] * len(members) + 0.5))
        first.extend(members[:n_first])
        second.extend(members[n_first:])
    return sorted(first), sorted(second)
