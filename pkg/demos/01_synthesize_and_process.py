"""Synthesize a point-target scene and run the ADC -> RAD processing chain.

The scene generator works in bin/frequency units, so every target's peak
position in the processed tensor is known in closed form. This script
renders a three-target scene, processes it, and checks each predicted peak.
"""

import numpy as np

from radkit.dsp import log_magnitude, compute_stats, normalize, ra_map, rad_from_adc, rd_map
from radkit.synth import PointTarget, Scene, expected_bins, synth_adc

scene = Scene(
    targets=(
        PointTarget(range_bin=64.0, doppler_freq=0.25, azimuth_deg=30.0, amplitude=2.0),
        PointTarget(range_bin=150.0, doppler_freq=-0.10, azimuth_deg=-45.0, amplitude=1.5),
        PointTarget(range_bin=200.0, doppler_freq=0.40, azimuth_deg=5.0, amplitude=1.0),
    ),
    noise_sigma=0.05,
    rng_seed=42,
)

adc = synth_adc(scene)
print(f"ADC cube: shape {adc.data.shape}, dtype {adc.data.dtype}")

rad = rad_from_adc(adc)
print(f"RAD cube: shape {rad.data.shape}, stage {rad.stage!r}")

mag = np.abs(rad.data)
for t in scene.targets:
    r, a, d = expected_bins(t)
    # the local argmax around the predicted cell should sit exactly on it
    window = mag[max(r - 2, 0):r + 3, max(a - 2, 0):a + 3, max(d - 2, 0):d + 3]
    local = np.unravel_index(np.argmax(window), window.shape)
    print(f"target at bins ({r:3d}, {a:3d}, {d:2d}): "
          f"|RAD| there = {mag[r, a, d]:9.1f}, local argmax offset {local}")

rd = rd_map(rad)
ra = ra_map(rad)
print(f"RD map {rd.shape}, RA map {ra.shape}")

# Global normalization: in a real dataset the statistics are accumulated
# over every frame; here the one frame stands in for the whole set.
lm = log_magnitude(rad)
stats = compute_stats([lm])
norm = normalize(lm, stats)
print(f"log-magnitude stats: mean {stats.v_mean:.4f}, variance {stats.v_variance:.4f}")
print(f"normalized cube mean ~ 0: {float(np.mean(norm.data)):.2e}")
