"""Scalar quantization and discretized-Gaussian probability modeling.

Symbols are integer-quantized residuals q = round_away(x - mean); the
coded probability of q under N(mu, sigma^2) is the Gaussian mass on
[q-0.5, q+0.5], with the tails folded into the range-edge symbols and a
floor of 2^-16 so every symbol in range stays codable.

The normal CDF uses a fixed rational approximation (|error| < 7.5e-8)
rather than the platform erf, so encoder and decoder arithmetic is
identical everywhere; scipy is deliberately not involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EncodingError, NumericalError, ShapeMismatch

SIGMA_MIN = 0.11
SYMBOL_MIN = -255
SYMBOL_MAX = 255
RC_TOTAL_BITS = 16
P_FLOOR = 2.0 ** -RC_TOTAL_BITS

# Abramowitz & Stegun 26.2.17 coefficients
_P = 0.2316419
_B = (0.319381530, -0.356563782, 1.781477937, -1.821255978, 1.330274429)
_INV_SQRT_2PI = 0.3989422804014327


def normal_cdf(x) -> np.ndarray:
    """Standard normal CDF via the 5-term rational tail approximation."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    t = 1.0 / (1.0 + _P * ax)
    poly = t * (_B[0] + t * (_B[1] + t * (_B[2] + t * (_B[3] + t * _B[4]))))
    tail = _INV_SQRT_2PI * np.exp(-0.5 * ax * ax) * poly
    return np.where(x >= 0.0, 1.0 - tail, tail)


def gaussian_symbol_prob(q, mu, sigma) -> np.ndarray:
    """Probability of integer symbol q under the discretized Gaussian.

    Tail mass beyond the symbol range belongs to the edge symbols, and
    the result is floored at 2^-16.
    """
    q = np.asarray(q, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.maximum(np.asarray(sigma, dtype=np.float64), SIGMA_MIN)
    hi = np.where(q >= SYMBOL_MAX, 1.0, normal_cdf((q + 0.5 - mu) / sigma))
    lo = np.where(q <= SYMBOL_MIN, 0.0, normal_cdf((q - 0.5 - mu) / sigma))
    return np.clip(hi - lo, P_FLOOR, 1.0)


def quantize(x, mean) -> np.ndarray:
    """Round half away from zero after removing the predicted mean."""
    x = np.asarray(x, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(mean))):
        raise NumericalError("non-finite value fed to the quantizer")
    r = x - mean
    return (np.sign(r) * np.floor(np.abs(r) + 0.5)).astype(np.int32)


def dequantize(q, mean) -> np.ndarray:
    return (np.asarray(q, dtype=np.float32) +
            np.asarray(mean, dtype=np.float32)).astype(np.float32)


@dataclass
class SymbolPlane:
    """Quantized symbols with their per-element Gaussian parameters."""

    symbols: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=np.int32)
        self.mu = np.asarray(self.mu, dtype=np.float32)
        self.sigma = np.maximum(
            np.asarray(self.sigma, dtype=np.float32), SIGMA_MIN)
        if not (self.symbols.shape == self.mu.shape == self.sigma.shape):
            raise ShapeMismatch(
                f"plane fields disagree: {self.symbols.shape} / "
                f"{self.mu.shape} / {self.sigma.shape}")
        if self.symbols.size and (self.symbols.min() < SYMBOL_MIN or
                                  self.symbols.max() > SYMBOL_MAX):
            raise EncodingError(
                f"symbols outside [{SYMBOL_MIN}, {SYMBOL_MAX}]")


def estimate_rate(plane: SymbolPlane) -> float:
    """Ideal code length in bits: sum of -log2 symbol probabilities."""
    if plane.symbols.size == 0:
        return 0.0
    p = gaussian_symbol_prob(plane.symbols, plane.mu, plane.sigma)
    return float(-np.log2(p).sum())
