"""Single-level 1-D and 2-D discrete wavelet transforms via lifting.

Three filter banks are supported:

* Haar, orthonormal (1/sqrt(2) scaling per stage),
* CDF 5/3 (LeGall), lifting predict -1/2 / update +1/4, no scaling,
* CDF 9/7, the irreversible JPEG 2000 filter with the usual four lifting
  coefficients and final scaling K = 1.230174104914 (low band divided by K,
  high band multiplied by K, i.e. lowpass DC gain 1 and highpass Nyquist
  gain -2, matching the 5/3 normalization).

Boundary handling follows JPEG 2000: whole-sample symmetric extension for
5/3 and 9/7, realized per lifting step by index reflection (each step
reaches exactly one neighbor, so a single mirror fold suffices at any
length >= 2).  Haar needs no extension; at odd lengths the final unpaired
sample is copied unscaled into the low band, which keeps both perfect
reconstruction and energy conservation exact.

Conventions fixed here because the bitstream depends on them:

* Even-indexed samples feed the low band; a length-n signal yields
  ceil(n/2) low and floor(n/2) high coefficients.
* 2-D transforms run along rows (the W axis) first, then along columns.
* Subband naming: ``lh`` is high-pass across the row index / low-pass
  across the column index (vertical detail); ``hl`` is the transpose case
  (horizontal detail).
* With odd source dims the detail bands are zero-padded to the ll shape so
  all four subbands of a SubbandSet are the same size; the inverse crops
  the padding away using the stored source dims.

All arithmetic is 32-bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, ShapeMismatch


class WaveletKind(enum.IntEnum):
    """Filter bank selector; the int value is the 1-byte wire code."""

    HAAR = 0
    CDF53 = 1
    CDF97 = 2


class ExtensionMode(enum.Enum):
    WHOLE_SAMPLE = "whole"
    HALF_SAMPLE = "half"


# CDF 9/7 lifting constants (JPEG 2000 irreversible filter).
_ALPHA = -1.586134342
_BETA = -0.052980118
_GAMMA = 0.882911076
_DELTA = 0.443506852
_K97 = 1.230174104914

_SQRT2 = np.sqrt(2.0)

# Each lifting step is (updates_odd, coefficient): an odd step adds
# coef*(left even neighbor + right even neighbor) to the odd samples, an
# even step adds coef*(left odd + right odd) to the even samples.
_LIFT_STEPS = {
    WaveletKind.CDF53: ((True, -0.5), (False, 0.25)),
    WaveletKind.CDF97: ((True, _ALPHA), (False, _BETA),
                        (True, _GAMMA), (False, _DELTA)),
}

# (low_scale, high_scale) applied after lifting.
_LIFT_SCALE = {
    WaveletKind.CDF53: (1.0, 1.0),
    WaveletKind.CDF97: (1.0 / _K97, _K97),
}


@dataclass
class SubbandSet:
    """The four subbands of one 2-D DWT level, plus source geometry.

    All four arrays share the shape (C, ceil(H/2), ceil(W/2)); see module
    docstring for the odd-dimension padding rule.
    """

    ll: np.ndarray
    hl: np.ndarray
    lh: np.ndarray
    hh: np.ndarray
    wavelet: WaveletKind
    src_h: int
    src_w: int

    def __post_init__(self):
        shapes = {self.ll.shape, self.hl.shape, self.lh.shape, self.hh.shape}
        if len(shapes) != 1:
            raise ShapeMismatch(f"subband shapes disagree: {sorted(shapes)}")
        if self.src_h < 2 or self.src_w < 2:
            raise DegenerateInput("source dims must be >= 2")


def symmetric_extend(signal, left: int, right: int,
                     mode: ExtensionMode) -> np.ndarray:
    """Mirror-extend a 1-D signal.

    Whole-sample mirrors about the edge sample without repeating it
    (... x2 x1 | x0 x1 ...); half-sample repeats it (... x1 x0 | x0 x1 ...).
    Only a single mirror fold is supported: left/right must not exceed
    n-1 (whole-sample) or n (half-sample).
    """
    x = np.asarray(signal)
    n = x.shape[-1]
    if n < 2:
        raise DegenerateInput("need at least 2 samples to extend")
    if left < 0 or right < 0:
        raise DegenerateInput("extension counts must be >= 0")
    limit = n - 1 if mode is ExtensionMode.WHOLE_SAMPLE else n
    if left > limit or right > limit:
        raise DegenerateInput(
            f"extension ({left},{right}) exceeds one mirror fold of {limit}")
    if mode is ExtensionMode.WHOLE_SAMPLE:
        li = np.arange(left, 0, -1)          # position -k -> x[k]
        ri = n - 2 - np.arange(right)        # position n-1+k -> x[n-1-k]
    else:
        li = np.arange(left, 0, -1) - 1      # position -k -> x[k-1]
        ri = n - 1 - np.arange(right)        # position n-1+k -> x[n-k]
    return np.concatenate([x[..., li], x, x[..., ri]], axis=-1)


def _split_even_odd(x: np.ndarray):
    # float64 accumulation: the per-step rounding of pure float32 lifting
    # leaves ~2e-6 residuals in the 9/7 detail bands on constant input,
    # which would break the 1e-6 annihilation bound. Band outputs are cast
    # back to float32.
    return (np.ascontiguousarray(x[..., 0::2], dtype=np.float64),
            np.ascontiguousarray(x[..., 1::2], dtype=np.float64))


def _lift_forward(x: np.ndarray, wavelet: WaveletKind):
    """Forward lifting along the last axis. Returns (low, high) float32."""
    n = x.shape[-1]
    even, odd = _split_even_odd(x)
    if wavelet is WaveletKind.HAAR:
        if n % 2:
            pair = even[..., :-1]
            low = np.concatenate(
                [(pair + odd) / _SQRT2, even[..., -1:]], axis=-1)
            high = (pair - odd) / _SQRT2
        else:
            low = (even + odd) / _SQRT2
            high = (even - odd) / _SQRT2
        return low.astype(np.float32), high.astype(np.float32)

    ne = even.shape[-1]
    no = odd.shape[-1]
    for odd_step, coef in _LIFT_STEPS[wavelet]:
        c = coef
        if odd_step:
            # odd[i] += c*(even[i] + even[i+1]); the right neighbor of the
            # final odd sample reflects back onto even[-1] when n is even.
            if ne == no:
                right = np.concatenate([even[..., 1:], even[..., -1:]],
                                       axis=-1)
            else:
                right = even[..., 1:]
            odd = odd + c * (even[..., :no] + right)
        else:
            # even[i] += c*(odd[i-1] + odd[i]); odd[-1] reflects onto
            # odd[0], and the final even sample of an odd-length signal
            # reflects its right neighbor onto odd[-1].
            left = np.concatenate([odd[..., :1], odd[..., :ne - 1]], axis=-1)
            if ne == no:
                cur = odd
            else:
                cur = np.concatenate([odd, odd[..., -1:]], axis=-1)
            even = even + c * (left + cur)
    sl, sh = _LIFT_SCALE[wavelet]
    return (even * sl).astype(np.float32), (odd * sh).astype(np.float32)


def _lift_inverse(low: np.ndarray, high: np.ndarray, wavelet: WaveletKind,
                  n: int) -> np.ndarray:
    """Exact inverse of _lift_forward for a length-n signal."""
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    if wavelet is WaveletKind.HAAR:
        if n % 2:
            pair_l, tail = low[..., :-1], low[..., -1:]
            even = np.concatenate(
                [(pair_l + high) / _SQRT2, tail], axis=-1)
            odd = (pair_l - high) / _SQRT2
        else:
            even = (low + high) / _SQRT2
            odd = (low - high) / _SQRT2
    else:
        sl, sh = _LIFT_SCALE[wavelet]
        even = low / sl
        odd = high / sh
        ne = even.shape[-1]
        no = odd.shape[-1]
        for odd_step, coef in reversed(_LIFT_STEPS[wavelet]):
            c = coef
            if odd_step:
                if ne == no:
                    right = np.concatenate([even[..., 1:], even[..., -1:]],
                                           axis=-1)
                else:
                    right = even[..., 1:]
                odd = odd - c * (even[..., :no] + right)
            else:
                left = np.concatenate([odd[..., :1], odd[..., :ne - 1]],
                                      axis=-1)
                cur = odd if ne == no else np.concatenate(
                    [odd, odd[..., -1:]], axis=-1)
                even = even - c * (left + cur)
    out = np.empty(low.shape[:-1] + (n,), dtype=np.float32)
    out[..., 0::2] = even
    out[..., 1::2] = odd
    return out


def dwt1d(signal, wavelet: WaveletKind):
    """One level of 1-D analysis. Returns (low, high) float32 arrays."""
    x = np.asarray(signal, dtype=np.float32)
    if x.ndim != 1:
        raise ShapeMismatch("dwt1d expects a 1-D signal")
    if x.shape[-1] < 2:
        raise DegenerateInput("signal shorter than 2 samples")
    return _lift_forward(x, WaveletKind(wavelet))


def idwt1d(low, high, wavelet: WaveletKind) -> np.ndarray:
    """Exact inverse of dwt1d."""
    lo = np.asarray(low, dtype=np.float32)
    hi = np.asarray(high, dtype=np.float32)
    if lo.ndim != 1 or hi.ndim != 1:
        raise ShapeMismatch("idwt1d expects 1-D subbands")
    d = lo.shape[-1] - hi.shape[-1]
    if d not in (0, 1):
        raise ShapeMismatch(
            f"len(low)-len(high) must be 0 or 1, got {d}")
    n = lo.shape[-1] + hi.shape[-1]
    return _lift_inverse(lo, hi, WaveletKind(wavelet), n)


def _along_rows(x: np.ndarray, wavelet: WaveletKind):
    """Transform along the H axis (axis -2) of a (..., H, W) array."""
    xt = x.swapaxes(-1, -2)
    lo, hi = _lift_forward(np.ascontiguousarray(xt), wavelet)
    return lo.swapaxes(-1, -2), hi.swapaxes(-1, -2)


def _pad_to(band: np.ndarray, h: int, w: int) -> np.ndarray:
    ph = h - band.shape[-2]
    pw = w - band.shape[-1]
    if ph == 0 and pw == 0:
        return band
    pad = [(0, 0)] * (band.ndim - 2) + [(0, ph), (0, pw)]
    return np.pad(band, pad)


def dwt2d(x, wavelet: WaveletKind) -> SubbandSet:
    """Single-level separable 2-D DWT of a (C, H, W) tensor."""
    wavelet = WaveletKind(wavelet)
    t = np.asarray(x, dtype=np.float32)
    if t.ndim != 3:
        raise ShapeMismatch(f"expected (C, H, W), got shape {t.shape}")
    c, h, w = t.shape
    if h < 2 or w < 2:
        raise DegenerateInput(f"spatial dims must be >= 2, got {h}x{w}")
    xl, xh = _lift_forward(t, wavelet)          # along W
    ll, lh = _along_rows(xl, wavelet)           # along H
    hl, hh = _along_rows(xh, wavelet)
    hc, wc = ll.shape[-2], ll.shape[-1]
    return SubbandSet(ll=ll,
                      hl=_pad_to(hl, hc, wc),
                      lh=_pad_to(lh, hc, wc),
                      hh=_pad_to(hh, hc, wc),
                      wavelet=wavelet, src_h=h, src_w=w)


def idwt2d(s: SubbandSet) -> np.ndarray:
    """Exact inverse of dwt2d; output shape (C, src_h, src_w)."""
    shapes = {s.ll.shape, s.hl.shape, s.lh.shape, s.hh.shape}
    if len(shapes) != 1:
        raise ShapeMismatch(f"subband shapes disagree: {sorted(shapes)}")
    h, w = s.src_h, s.src_w
    hl_rows = h // 2   # rows in the H-high bands
    hw_cols = w // 2   # cols in the W-high bands
    lh = s.lh[..., :hl_rows, :]
    hl = s.hl[..., :, :hw_cols]
    hh = s.hh[..., :hl_rows, :hw_cols]

    def inv_rows(lo, hi, n):
        out = _lift_inverse(np.ascontiguousarray(lo.swapaxes(-1, -2)),
                            np.ascontiguousarray(hi.swapaxes(-1, -2)),
                            s.wavelet, n)
        return out.swapaxes(-1, -2)

    xl = inv_rows(s.ll, lh, h)
    xh = inv_rows(hl, hh, h)
    return _lift_inverse(np.ascontiguousarray(xl),
                         np.ascontiguousarray(xh), s.wavelet, w)
