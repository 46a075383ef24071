"""Image quality metrics on the 8-bit scale: PSNR and 5-scale MS-SSIM.

MS-SSIM follows the standard multi-scale construction: an 11x11 Gaussian
window (sigma 1.5), contrast-structure means at five dyadic scales, the
luminance term at the coarsest, and the published exponents. Window
statistics use reflect padding and full-size maps, so the coarsest scale
of a 160-pixel image (10 px, smaller than the window) is still well
defined; implementations that insist on fully valid windows cannot
evaluate that size at all. Scores therefore differ from valid-window
implementations by well under a percent on natural content.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DegenerateInput, ShapeMismatch

PEAK = 255.0
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
MSSSIM_MIN_DIM = 160  # five dyadic scales of a usable window map
_WIN = 11
_SIGMA = 1.5
_K1, _K2 = 0.01, 0.03


def _paired(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB on the 0..255 scale, capped at
    100 dB for (near-)identical inputs."""
    a, b = _paired(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return 100.0
    return min(10.0 * np.log10(PEAK * PEAK / mse), 100.0)


def _gauss_kernel() -> np.ndarray:
    x = np.arange(_WIN, dtype=np.float64) - (_WIN - 1) / 2.0
    k = np.exp(-0.5 * (x / _SIGMA) ** 2)
    return k / k.sum()


_KERNEL = _gauss_kernel()


def _blur(x: np.ndarray) -> np.ndarray:
    y = correlate1d(x, _KERNEL, axis=0, mode="reflect")
    return correlate1d(y, _KERNEL, axis=1, mode="reflect")


def _ssim_terms(a, b, c1, c2):
    mu_a, mu_b = _blur(a), _blur(b)
    var_a = _blur(a * a) - mu_a * mu_a
    var_b = _blur(b * b) - mu_b * mu_b
    cov = _blur(a * b) - mu_a * mu_b
    cs = (2.0 * cov + c2) / (var_a + var_b + c2)
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    return lum, cs


def _halve(x: np.ndarray) -> np.ndarray:
    h, w = x.shape
    x = x[:h - h % 2, :w - w % 2]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2]
                   + x[0::2, 1::2] + x[1::2, 1::2])


def _msssim_channel(a, b) -> float:
    c1 = (_K1 * PEAK) ** 2
    c2 = (_K2 * PEAK) ** 2
    score = 1.0
    for level, weight in enumerate(MSSSIM_WEIGHTS):
        lum, cs = _ssim_terms(a, b, c1, c2)
        if level < len(MSSSIM_WEIGHTS) - 1:
            term = np.mean(cs)
            a, b = _halve(a), _halve(b)
        else:
            term = np.mean(lum * cs)
        score *= max(term, 0.0) ** weight
    return float(score)


def ms_ssim(a, b) -> float:
    """Five-scale MS-SSIM in [0, 1], averaged over channels."""
    a, b = _paired(a, b)
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.ndim != 3:
        raise ShapeMismatch(f"expected 2-D or 3-D images, got {a.shape}")
    h, w = a.shape[:2]
    if h < MSSSIM_MIN_DIM or w < MSSSIM_MIN_DIM:
        raise DegenerateInput(
            f"{h}x{w} is too small for 5 dyadic scales; need at least "
            f"{MSSSIM_MIN_DIM} on each side")
    return float(np.mean([_msssim_channel(a[:, :, c], b[:, :, c])
                          for c in range(a.shape[2])]))
