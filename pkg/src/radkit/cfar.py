"""2D constant-false-alarm-rate detectors over range-doppler power maps.

Both variants estimate the local noise level for every cell under test from
a rectangular training annulus around it (a (2*(t_r+g_r)+1) x (2*(t_d+g_d)+1)
window minus the central (2*g_r+1) x (2*g_d+1) guard block):

* ``ca``: noise = mean of the training cells,
* ``os``: noise = the ceil(os_rank * N)-th smallest training cell.

A cell is detected when value > alpha * noise. The doppler axis wraps
circularly (it is an FFT axis); the range axis clips at the borders, where
the training count N shrinks accordingly. Both estimators are
scale-equivariant, so the detection mask is invariant under scaling the map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class CfarConfig:
    variant: str = "ca"
    train: tuple[int, int] = (8, 4)
    guard: tuple[int, int] = (2, 2)
    alpha: float | None = None
    os_rank: float = 0.75

    def __post_init__(self):
        if self.variant not in ("ca", "os"):
            raise ValueError(f"unknown CFAR variant {self.variant!r}")
        if min(self.train) < 1:
            raise ValueError("training half-widths must be >= 1")
        if min(self.guard) < 0:
            raise ValueError("guard half-widths must be >= 0")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not (0.0 < self.os_rank <= 1.0):
            raise ValueError("os_rank must lie in (0, 1]")

    @property
    def n_train_full(self) -> int:
        """Training-cell count of a full (interior) window."""
        t_r, t_d = self.train
        g_r, g_d = self.guard
        return ((2 * (t_r + g_r) + 1) * (2 * (t_d + g_d) + 1)
                - (2 * g_r + 1) * (2 * g_d + 1))

    def resolved_alpha(self, pfa: float = 1e-3) -> float:
        """The configured alpha, or the CA calibration for the given Pfa."""
        if self.alpha is not None:
            return self.alpha
        return ca_alpha(pfa, self.n_train_full)


def ca_alpha(pfa: float, n_train: int) -> float:
    """Threshold multiplier giving the desired false-alarm probability.

    Classical cell-averaging calibration for exponentially distributed
    (square-law detected) noise cells: alpha = N * (pfa^(-1/N) - 1).
    """
    if not (0.0 < pfa < 1.0):
        raise ValueError(f"pfa {pfa} outside (0, 1)")
    if n_train < 1:
        raise ValueError("n_train must be >= 1")
    n = float(n_train)
    return n * (pfa ** (-1.0 / n) - 1.0)


def cfar_2d(rd: np.ndarray, cfg: CfarConfig, pfa: float = 1e-3) -> np.ndarray:
    """Run CA-/OS-CFAR over a 2D power map, returning a boolean mask.

    ``rd`` is indexed (range, doppler). When ``cfg.alpha`` is None the CA
    calibration ``ca_alpha(pfa, N_full)`` is used. Raises if the window
    leaves some cell with no training cells at all.
    """
    rd = np.asarray(rd, dtype=np.float64)
    if rd.ndim != 2:
        raise ValueError(f"expected a 2D map, got shape {rd.shape}")
    n_r, n_d = rd.shape
    t_r, t_d = cfg.train
    g_r, g_d = cfg.guard
    p_r, p_d = t_r + g_r, t_d + g_d
    alpha = cfg.resolved_alpha(pfa)

    # Range borders clip: pad with NaN and count valid cells per window.
    # Doppler wraps: circular padding (same training values as index
    # arithmetic modulo n_d, including repeats if the window exceeds n_d).
    padded = np.pad(rd, ((p_r, p_r), (0, 0)), mode="constant", constant_values=np.nan)
    padded = np.pad(padded, ((0, 0), (p_d, p_d)), mode="wrap")
    win = sliding_window_view(padded, (2 * p_r + 1, 2 * p_d + 1))

    annulus = np.ones((2 * p_r + 1, 2 * p_d + 1), dtype=bool)
    annulus[p_r - g_r:p_r + g_r + 1, p_d - g_d:p_d + g_d + 1] = False
    train = win[:, :, annulus]

    n_valid = np.count_nonzero(~np.isnan(train), axis=-1)
    if np.any(n_valid == 0):
        raise ValueError("window too large: some cell has no training cells")

    if cfg.variant == "ca":
        noise = np.nanmean(train, axis=-1)
    else:
        ranked = np.sort(train, axis=-1)  # NaNs sort to the end
        k = np.ceil(cfg.os_rank * n_valid).astype(np.intp)
        k = np.clip(k, 1, n_valid)
        noise = np.take_along_axis(ranked, (k - 1)[..., None], axis=-1)[..., 0]

    return rd > alpha * noise
