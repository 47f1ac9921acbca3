"""Instance-wise auto-annotation of a noisy multi-target frame.

Chain: RD map -> CFAR -> pattern connection -> azimuth expansion + DBSCAN
-> instances -> 3D boxes (RAD bins) and 2D boxes (BEV meters) -> category
labels transferred from externally labeled BEV points.
"""

import numpy as np

from radkit.annotate import (DbscanConfig, connect_patterns, extract_instances,
                             fit_projection, instance_to_boxes, transfer_labels)
from radkit.cfar import CfarConfig, cfar_2d
from radkit.dsp import rad_from_adc, rd_map
from radkit.geometry import box3d_contains, polar_to_cart
from radkit.synth import PointTarget, Scene, expected_bins, synth_adc
from radkit.tensorio import DEFAULT_CLASSES

# two vehicles at the same range and speed, separated only in azimuth: the
# case density clustering exists to untangle
scene = Scene(
    targets=(
        PointTarget(80.0, 0.125, 40.0, amplitude=2.0),
        PointTarget(80.0, 0.125, -40.0, amplitude=2.0),
        PointTarget(170.0, -0.2, 0.0, amplitude=1.5),
    ),
    noise_sigma=1.0,
    rng_seed=3,
)
rad = rad_from_adc(synth_adc(scene))

mask = cfar_2d(rd_map(rad), CfarConfig())
print(f"CFAR detections: {mask.sum()}")
mask = connect_patterns(mask, gap=1)
print(f"after pattern connection: {mask.sum()}")

instances = extract_instances(rad, mask, azimuth_rel_threshold=0.5,
                              db=DbscanConfig(), frame_id="demo")
print(f"instances: {len(instances)}")

# category labels arrive as BEV points (here: projected from a synthetic
# 3D stereo frame through a calibration fit)
stereo_pts = []
radar_pts = []
rng = np.random.default_rng(1)
for _ in range(12):
    p = rng.uniform((0, -2, -20), (50, 2, 20))
    stereo_pts.append(p)
    radar_pts.append((p[0], p[2]))  # the true map: BEV = (x, z) of the point
proj = fit_projection(stereo_pts, radar_pts)
print(f"projection fit residual: {proj.rms_residual:.2e}")

labeled = []
for t in scene.targets[:2]:
    r, a, _ = expected_bins(t)
    x, z = polar_to_cart((r + 0.5) * 0.1953, np.arcsin((a + 0.5) / 128 - 1))
    labeled.append(((x, z), 2))  # class 2 = car
instances = transfer_labels(instances, labeled)

for inst in instances:
    box3d, box2d = instance_to_boxes(inst)
    name = DEFAULT_CLASSES[inst.class_id] if inst.class_id is not None else "?"
    covered = [i for i, t in enumerate(scene.targets)
               if box3d_contains(box3d, tuple(v + 0.5 for v in expected_bins(t)))]
    print(f"  {len(inst.cells):4d} cells, class {name:8s} "
          f"3D center ({box3d.center[0]:6.1f}, {box3d.center[1]:6.1f}, "
          f"{box3d.center[2]:5.1f}) size {tuple(round(s, 1) for s in box3d.size)} "
          f"2D center ({box2d.center[0]:5.1f} m, {box2d.center[1]:6.1f} m) "
          f"covers targets {covered}")
