"""AP evaluation at multiple IoU thresholds and class-stratified splitting."""

import numpy as np

from radkit.evaluation import evaluate, split_dataset
from radkit.geometry import Box2D

rng = np.random.default_rng(0)

# ground truth plus detections whose quality degrades with distance: APs
# must fall as the IoU threshold rises
gts = {}
dets = {}
for f in range(200):
    frame = f"frame{f:03d}"
    gts[frame] = []
    dets[frame] = []
    for _ in range(int(rng.integers(1, 4))):
        x, z = rng.uniform(5, 45), rng.uniform(-20, 20)
        cls = int(rng.integers(0, 3))
        gts[frame].append(Box2D((x, z), (3.0, 5.0), cls))
        if rng.random() < 0.85:  # a miss now and then
            dx = rng.normal(0, 0.8)
            dets[frame].append(Box2D((x + dx, z + rng.normal(0, 0.4)),
                                     (3.0, 5.0), cls, float(rng.uniform(0.3, 1))))
    if rng.random() < 0.5:  # and an occasional false positive
        dets[frame].append(Box2D((rng.uniform(5, 45), rng.uniform(-20, 20)),
                                 (3.0, 5.0), int(rng.integers(0, 3)),
                                 float(rng.uniform(0.1, 0.6))))

report = evaluate(dets, gts, mode="2d", class_names=("car", "truck", "bus"))
print("threshold   mAP     pooled AP")
for thr in (0.1, 0.3, 0.5, 0.7):
    print(f"   {thr:.1f}    {report.map_[thr]:.4f}   {report.pooled_ap[thr]:.4f}")
print("\nper-class AP at IoU 0.5:",
      {k: round(v, 4) for k, v in report.ap[0.5].items()})
tp, fp, fn = report.counts[0.5][0]
print(f"class 0 at IoU 0.5: TP {tp}, FP {fp}, FN {fn}")

# stratified 80/20 split over per-frame class multisets, then 90/10 of the
# training part for validation
frames = [(fid, sorted(b.class_id for b in boxes)) for fid, boxes in gts.items()]
train, test = split_dataset(frames, (0.8, 0.2), seed=1)
tr, val = split_dataset([(f, dict(frames)[f]) for f in train], (0.9, 0.1), seed=2)
print(f"\nsplit: {len(tr)} train / {len(val)} val / {len(test)} test "
      f"of {len(frames)} frames")
