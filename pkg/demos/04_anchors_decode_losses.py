"""Anchor fitting, head decoding and the training-loss reference.

K-means with 1 - IoU distance turns a population of ground-truth box sizes
into prior anchors; the detection heads regress against those anchors on a
coarse grid. The loss reference evaluates an exported head tensor against
matched targets and ships analytic gradients for checking trainers.
"""

import numpy as np

from radkit.anchors import fit_anchors
from radkit.detect import (STRIDES3D, build_targets3d, decode3d, encode3d,
                           postprocess)
from radkit.geometry import Box3D
from radkit.losses import head_loss, head_loss_grad

rng = np.random.default_rng(0)

# three size clusters, like small / medium / large road users
protos = np.array([[6.0, 6.0, 4.0], [20.0, 30.0, 8.0], [40.0, 20.0, 12.0]])
sizes = np.vstack([p * rng.uniform(0.95, 1.05, (100, 3)) for p in protos])
anchors = fit_anchors(sizes, k=6, seed=0)
print("anchors (range, azimuth, doppler bins):")
for a in sorted(anchors.anchors):
    print(f"  ({a[0]:5.1f}, {a[1]:5.1f}, {a[2]:5.1f})")
print(f"mean 1-IoU error: {anchors.mean_error:.4f}")

boxes = [
    Box3D((100.5, 120.25, 30.0), (6.2, 5.9, 4.1), class_id=0),
    Box3D((40.0, 200.0, 10.5), (19.0, 31.0, 7.7), class_id=2),
]
raw = encode3d(boxes, anchors, n_classes=6)
print(f"\nencoded head tensor: shape {raw.shape}")

dets = postprocess(decode3d(raw, anchors, obj_threshold=0.5))
for d in dets:
    print(f"decoded: center {tuple(round(float(c), 2) for c in d.box.center)} "
          f"size {tuple(round(float(s), 2) for s in d.box.size)} class {d.class_id} "
          f"score {d.score:.3f}")

# loss of a noisy prediction against the true targets
pos, centers, tsizes, classes = build_targets3d(boxes, anchors)
noisy = raw + rng.normal(0, 0.25, raw.shape)
breakdown = head_loss(noisy, pos, centers, tsizes, classes,
                      anchors.as_array(), STRIDES3D)
print(f"\nloss on perturbed logits: box {breakdown.l_box:.4f}, "
      f"obj {breakdown.l_obj:.4f}, class {breakdown.l_class:.4f}, "
      f"total {breakdown.l_total:.4f}")

grad = head_loss_grad(noisy, pos, centers, tsizes, classes,
                      anchors.as_array(), STRIDES3D)
idx = np.unravel_index(np.argmax(np.abs(grad)), grad.shape)
h = 1e-5
probe = noisy.copy()
probe[idx] += h
up = head_loss(probe, pos, centers, tsizes, classes, anchors.as_array(),
               STRIDES3D).l_total
probe[idx] -= 2 * h
dn = head_loss(probe, pos, centers, tsizes, classes, anchors.as_array(),
               STRIDES3D).l_total
fd = (up - dn) / (2 * h)
print(f"largest gradient entry {grad[idx]:+.6f} vs finite difference {fd:+.6f}")
