"""Synthetic FMCW point-target scenes with analytically known RAD peaks.

The signal model works directly in normalized bin/frequency units, which is
what the downstream detection pipeline consumes; a configurable bin->meter
factor exists purely for display. Antennas are assumed half-wavelength
spaced, giving a per-element phase of pi*sin(theta).

For a target t the noiseless ADC cube is

    ADC[n, m, k] = A_t * exp(j*2*pi*(f_r*n/256 + nu*k)) * exp(j*pi*m*sin(theta))

with f_r the fractional range bin, nu the doppler frequency in cycles/chirp
and theta the azimuth angle. Complex white Gaussian noise with per-component
standard deviation ``noise_sigma`` is added on top, deterministically per
``rng_seed``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .tensorio import ADC_SHAPE, AdcCube

N_RANGE, N_ANT, N_CHIRP = ADC_SHAPE
AZIMUTH_OUT = 256


@dataclass(frozen=True)
class PointTarget:
    """One ideal point scatterer in bin/frequency units."""

    range_bin: float
    doppler_freq: float
    azimuth_deg: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.range_bin < N_RANGE):
            raise ValueError(f"range_bin {self.range_bin} outside [0, {N_RANGE})")
        if not (-0.5 <= self.doppler_freq < 0.5):
            raise ValueError(f"doppler_freq {self.doppler_freq} outside [-0.5, 0.5)")
        if not (-90.0 < self.azimuth_deg < 90.0):
            raise ValueError(f"azimuth_deg {self.azimuth_deg} outside (-90, 90)")
        if not (self.amplitude > 0 and math.isfinite(self.amplitude)):
            raise ValueError(f"amplitude {self.amplitude} must be positive and finite")


@dataclass(frozen=True)
class Scene:
    targets: tuple[PointTarget, ...] = ()
    noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def synth_adc(scene: Scene) -> AdcCube:
    """Render a scene into an ADC cube, deterministically per seed.

    Target terms are evaluated in float64, cast to complex64 and accumulated
    one by one, so rendering the union of two scenes equals the elementwise
    sum of rendering them separately (bit-exact, noise aside).
    """
    n = np.arange(N_RANGE, dtype=np.float64)[:, None, None]
    m = np.arange(N_ANT, dtype=np.float64)[None, :, None]
    k = np.arange(N_CHIRP, dtype=np.float64)[None, None, :]

    cube = np.zeros(ADC_SHAPE, dtype=np.complex64)
    for t in scene.targets:
        sin_t = math.sin(math.radians(t.azimuth_deg))
        phase = 2.0 * np.pi * (t.range_bin * n / N_RANGE + t.doppler_freq * k) \
            + np.pi * m * sin_t
        cube += (t.amplitude * np.exp(1j * phase)).astype(np.complex64)

    if scene.noise_sigma > 0:
        rng = np.random.default_rng(scene.rng_seed)
        noise = rng.standard_normal(ADC_SHAPE) + 1j * rng.standard_normal(ADC_SHAPE)
        cube += (scene.noise_sigma * noise).astype(np.complex64)
    return AdcCube(cube)


def expected_bins(target: PointTarget) -> tuple[int, int, int]:
    """RAD argmax bins predicted for a lone target.

    Range is the plain FFT bin; azimuth and doppler axes are fft-shifted so
    that zero frequency sits at bins 128 and 32 respectively:

        range   = round(range_bin) mod 256
        azimuth = round((sin(theta)/2 + 0.5) * 256) mod 256
        doppler = round((nu + 0.5) * 64) mod 64
    """
    sin_t = math.sin(math.radians(target.azimuth_deg))
    r = int(round(target.range_bin)) % N_RANGE
    a = int(round((sin_t / 2.0 + 0.5) * AZIMUTH_OUT)) % AZIMUTH_OUT
    d = int(round((target.doppler_freq + 0.5) * N_CHIRP)) % N_CHIRP
    return r, a, d


def azimuth_deg_for_bin(a_bin: int) -> float:
    """Angle whose expected azimuth bin is exactly ``a_bin`` (inverse map)."""
    sin_t = 2.0 * (a_bin / AZIMUTH_OUT - 0.5)
    if not (-1.0 < sin_t < 1.0):
        raise ValueError(f"azimuth bin {a_bin} has no angle in (-90, 90)")
    return math.degrees(math.asin(sin_t))


def scene_to_json(scene: Scene) -> dict:
    return {
        "targets": [{"range_bin": t.range_bin, "doppler_freq": t.doppler_freq,
                     "azimuth_deg": t.azimuth_deg, "amplitude": t.amplitude}
                    for t in scene.targets],
        "noise_sigma": scene.noise_sigma,
        "rng_seed": scene.rng_seed,
    }


def scene_from_json(obj: dict) -> Scene:
    targets = tuple(
        PointTarget(float(t["range_bin"]), float(t["doppler_freq"]),
                    float(t["azimuth_deg"]), float(t.get("amplitude", 1.0)))
        for t in obj.get("targets", []))
    return Scene(targets, float(obj.get("noise_sigma", 0.0)),
                 int(obj.get("rng_seed", 0)))


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as f:
        return scene_from_json(json.load(f))
