"""ADC -> range-azimuth-doppler processing chain.

Pipeline stages:

1. ``rad_from_adc``: per-axis FFTs. Range FFT (length 256, unshifted, so DC
   sits at range bin 0), doppler FFT (length 64, fft-shifted, zero doppler
   at bin 32), then the 8 antenna samples are zero-padded at the tail to 256
   and FFT'd along azimuth (fft-shifted, boresight at bin 128). Forward FFTs
   are unnormalized (no 1/N).
2. ``log_magnitude``: ln(|z| + 1e-10) elementwise.
3. ``compute_stats`` / ``normalize``: global normalization against the
   population mean and variance of every log-magnitude cell in the dataset;
   the normalized value is (v - mean) / variance. Dividing by the variance
   (not the standard deviation) is deliberate; pass ``by_std=True`` for the
   conventional z-score.

``rd_map`` collapses a complex RAD cube to the (256, 64) range-doppler power
map consumed by CFAR: RD[n, k] = sum_a |RAD[n, a, k]|^2.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np
import scipy.fft

from .tensorio import ADC_SHAPE, RAD_SHAPE, AdcCube, NormalizationStats, RadCube

LOG_EPS = 1e-10

RD_SHAPE = (RAD_SHAPE[0], RAD_SHAPE[2])


def _window(n: int, kind: str | None) -> np.ndarray | None:
    if kind is None:
        return None
    if kind == "hann":
        return np.hanning(n).astype(np.float32)
    raise ValueError(f"unknown window {kind!r}")


def rad_from_adc(adc: AdcCube, window: str | None = None) -> RadCube:
    """FFT an ADC cube into a complex (256, 256, 64) RAD cube.

    ``window`` optionally applies a Hann taper along range and doppler
    before their FFTs (default rectangular, which keeps point targets
    bin-exact).
    """
    x = adc.data
    if x.shape != ADC_SHAPE:
        raise ValueError(f"ADC shape {x.shape}, expected {ADC_SHAPE}")
    x = x.astype(np.complex64, copy=False)

    if window is not None:
        w_r = _window(ADC_SHAPE[0], window)
        w_d = _window(ADC_SHAPE[2], window)
        x = x * w_r[:, None, None]
        x = x * w_d[None, None, :]

    rng_fft = scipy.fft.fft(x, n=RAD_SHAPE[0], axis=0)
    dop = scipy.fft.fftshift(scipy.fft.fft(rng_fft, n=RAD_SHAPE[2], axis=2), axes=2)
    # scipy pads the 8 antenna samples with zeros at the tail up to 256.
    rad = scipy.fft.fftshift(scipy.fft.fft(dop, n=RAD_SHAPE[1], axis=1), axes=1)
    return RadCube(rad.astype(np.complex64, copy=False), stage="complex")


def log_magnitude(rad: RadCube) -> RadCube:
    """ln(|z| + eps) of a complex RAD cube; eps = 1e-10 floors the log."""
    if rad.stage != "complex":
        raise ValueError(f"log_magnitude expects stage 'complex', got {rad.stage!r}")
    out = np.log(np.abs(rad.data).astype(np.float32) + np.float32(LOG_EPS))
    return RadCube(out, stage="log_magnitude")


def compute_stats(frames: Iterable[RadCube]) -> NormalizationStats:
    """Population mean/variance over every cell of every log-magnitude frame.

    Uses a numerically stable streaming merge (Chan et al. parallel update),
    so datasets far larger than memory can be accumulated frame by frame.
    """
    mean = 0.0
    m2 = 0.0
    count = 0
    for frame in frames:
        if frame.stage != "log_magnitude":
            raise ValueError(f"stats expect log_magnitude frames, got {frame.stage!r}")
        x = frame.data.astype(np.float64, copy=False)
        n_b = x.size
        mean_b = float(x.mean())
        m2_b = float(((x - mean_b) ** 2).sum())
        if count == 0:
            mean, m2, count = mean_b, m2_b, n_b
        else:
            delta = mean_b - mean
            total = count + n_b
            mean += delta * n_b / total
            m2 += m2_b + delta * delta * count * n_b / total
            count = total
    if count == 0:
        raise ValueError("empty dataset")
    return NormalizationStats(v_mean=mean, v_variance=m2 / count, n_cells_seen=count)


def normalize(rad: RadCube, stats: NormalizationStats, by_std: bool = False) -> RadCube:
    """Globally normalize a log-magnitude cube: (v - mean) / variance.

    ``by_std`` switches the denominator to the standard deviation. Output is
    float64; writing it to an RDT1 file rounds to float32.
    """
    if rad.stage != "log_magnitude":
        raise ValueError(f"normalize expects stage 'log_magnitude', got {rad.stage!r}")
    denom = np.sqrt(stats.v_variance) if by_std else stats.v_variance
    out = (rad.data.astype(np.float64) - stats.v_mean) / denom
    return RadCube(out, stage="normalized")


def rd_map(rad: RadCube) -> np.ndarray:
    """Range-doppler power map: azimuth power sum of a complex RAD cube.

    Returns a float64 (256, 64) array; every value is >= 0.
    """
    if rad.stage != "complex":
        raise ValueError(f"rd_map expects stage 'complex', got {rad.stage!r}")
    d = rad.data
    mag2 = d.real * d.real + d.imag * d.imag
    return mag2.sum(axis=1, dtype=np.float64)


def ra_map(rad: RadCube) -> np.ndarray:
    """Range-azimuth power map (doppler power sum), used for display."""
    if rad.stage != "complex":
        raise ValueError(f"ra_map expects stage 'complex', got {rad.stage!r}")
    d = rad.data
    mag2 = d.real * d.real + d.imag * d.imag
    return mag2.sum(axis=2, dtype=np.float64)
