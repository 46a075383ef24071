"""Bjontegaard delta-rate between two rate-distortion curves.

Each curve is fitted with a cubic polynomial of log10(rate) as a
function of PSNR; the fits are integrated over the overlapping PSNR
interval and the mean log-rate gap is mapped back to a percentage. A
positive result means curve_b spends more bits than curve_a at equal
quality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput


@dataclass
class RdPoint:
    """One operating point of a codec configuration."""

    bpp: float
    psnr_db: float
    msssim: float = 0.0

    def __post_init__(self):
        if not (self.bpp > 0):
            raise DegenerateInput(f"bpp must be positive, got {self.bpp}")


def _as_curve(points) -> tuple[np.ndarray, np.ndarray]:
    rates, quals = [], []
    for p in points:
        if hasattr(p, "bpp"):
            rates.append(float(p.bpp))
            quals.append(float(p.psnr_db))
        else:
            r, q = p[0], p[1]
            rates.append(float(r))
            quals.append(float(q))
    rates = np.asarray(rates, dtype=np.float64)
    quals = np.asarray(quals, dtype=np.float64)
    if rates.size < 4:
        raise DegenerateInput(
            f"need at least 4 rate points for a cubic fit, got "
            f"{rates.size}")
    if np.any(rates <= 0):
        raise DegenerateInput("rates must be positive")
    if not (np.all(np.isfinite(rates)) and np.all(np.isfinite(quals))):
        raise DegenerateInput("non-finite rate point")
    return rates, quals


def bd_rate(curve_a, curve_b) -> float:
    """Average rate change of curve_b relative to curve_a, in percent."""
    rates_a, quals_a = _as_curve(curve_a)
    rates_b, quals_b = _as_curve(curve_b)
    lo = max(quals_a.min(), quals_b.min())
    hi = min(quals_a.max(), quals_b.max())
    if not hi > lo:
        raise DegenerateInput(
            f"no overlapping quality range: [{quals_a.min():.2f}, "
            f"{quals_a.max():.2f}] vs [{quals_b.min():.2f}, "
            f"{quals_b.max():.2f}]")
    gap = 0.0
    for rates, quals, sign in ((rates_b, quals_b, 1.0),
                               (rates_a, quals_a, -1.0)):
        fit = np.polyfit(quals, np.log10(rates), 3)
        integral = np.polyint(fit)
        gap += sign * (np.polyval(integral, hi) - np.polyval(integral, lo))
    avg = gap / (hi - lo)
    return float((10.0 ** avg - 1.0) * 100.0)
