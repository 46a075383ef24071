"""Bit-exact range coder with 16-bit probability precision.

Architecture: 64-bit low / 32-bit range, renormalizing one byte at a time
with carry propagation through a cache + pending-0xFF run (the classic
LZMA arrangement). The encoder's flush emits exactly five trailing bytes
and the decoder's init consumes exactly five, so over a whole stream the
decoder reads precisely every byte the encoder wrote: any truncation
starves a read and surfaces as DecodingError, never as garbage symbols.

CDF rows are integer cumulatives over a contiguous symbol support with
total 2^16, built either per element from Gaussian (mu, sigma) inside the
coding kernel, or taken from a prebuilt per-channel table. Both encoder
and decoder derive rows through the same jitted routine, which is what
makes the codec deterministic across machines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .cdftable import CdfTable
from .errors import BadShape, DecodingError, EncodingError, ShapeMismatch
from .gaussian import SIGMA_MIN, SYMBOL_MAX, SYMBOL_MIN

RC_TOTAL = 1 << 16
_TOP = 1 << 24
_FLUSH_BYTES = 5
FLUSH_BYTES = _FLUSH_BYTES  # every stream ends with exactly this many bytes

# Abramowitz & Stegun 26.2.17, same constants as gaussian.normal_cdf
_P = 0.2316419
_B1, _B2, _B3, _B4, _B5 = (0.319381530, -0.356563782, 1.781477937,
                           -1.821255978, 1.330274429)
_INV_SQRT_2PI = 0.3989422804014327


@njit(cache=True)
def _phi(x):  # pragma: no cover - jitted
    ax = abs(x)
    t = 1.0 / (1.0 + _P * ax)
    poly = t * (_B1 + t * (_B2 + t * (_B3 + t * (_B4 + t * _B5))))
    tail = _INV_SQRT_2PI * np.exp(-0.5 * ax * ax) * poly
    if x >= 0.0:
        return 1.0 - tail
    return tail


@njit(cache=True)
def _build_row(mu, sigma, smin, nsym, cum):  # pragma: no cover - jitted
    """Fill cum[0..nsym] with a strictly increasing 16-bit cumulative.

    cum[j] is the cumulative frequency below symbol smin+j; cum[0] = 0,
    cum[nsym] = 2^16. One frequency unit per symbol is reserved up front
    and the remaining 2^16 - nsym units follow the Gaussian CDF:
    cum[j] = j + round((2^16 - nsym) * Phi(edge_j)). The affine reserve
    keeps every symbol codable and makes the row strictly increasing
    without any cross-entry fixups, so each entry is a pure function of
    (mu, sigma, j). Tail mass beyond the support lands in the edge
    symbols. Phi is only evaluated inside an 8.5-sigma window; outside
    it the scaled CDF is pinned to 0 or its maximum.
    """
    if sigma < SIGMA_MIN:
        sigma = SIGMA_MIN
    cum[0] = 0
    cum[nsym] = RC_TOTAL
    span = RC_TOTAL - nsym
    lo_x = mu - 8.5 * sigma
    hi_x = mu + 8.5 * sigma
    for j in range(1, nsym):
        x = smin + j - 0.5
        if x <= lo_x:
            scaled = 0
        elif x >= hi_x:
            scaled = span
        else:
            scaled = int(span * _phi((x - mu) / sigma) + 0.5)
        cum[j] = j + scaled


@njit(cache=True)
def _enc_gaussian(syms, mu, sigma, smin, nsym, out, cum):
    # pragma: no cover - jitted
    low = np.int64(0)
    rng = np.int64(0xFFFFFFFF)
    cache = np.int64(0)
    cache_size = np.int64(1)
    pos = np.int64(0)
    cap = out.shape[0]
    for i in range(syms.shape[0]):
        s = syms[i] - smin
        if s < 0 or s >= nsym:
            return pos, 1
        _build_row(np.float64(mu[i]), np.float64(sigma[i]), smin, nsym, cum)
        r = rng // RC_TOTAL
        low += r * cum[s]
        rng = r * (cum[s + 1] - cum[s])
        while rng < _TOP:
            # shift_low
            if low < 0xFF000000 or low > 0xFFFFFFFF:
                carry = low >> 32
                if pos + cache_size > cap:
                    return pos, 2
                out[pos] = (cache + carry) & 0xFF
                pos += 1
                for _ in range(cache_size - 1):
                    out[pos] = (0xFF + carry) & 0xFF
                    pos += 1
                cache_size = 0
                cache = (low >> 24) & 0xFF
            cache_size += 1
            low = (low & 0xFFFFFF) << 8
            rng <<= 8
    for _ in range(_FLUSH_BYTES):
        if low < 0xFF000000 or low > 0xFFFFFFFF:
            carry = low >> 32
            if pos + cache_size > cap:
                return pos, 2
            out[pos] = (cache + carry) & 0xFF
            pos += 1
            for _ in range(cache_size - 1):
                out[pos] = (0xFF + carry) & 0xFF
                pos += 1
            cache_size = 0
            cache = (low >> 24) & 0xFF
        cache_size += 1
        low = (low & 0xFFFFFF) << 8
    return pos, 0


@njit(cache=True)
def _dec_gaussian(data, mu, sigma, smin, nsym, out_syms, cum):
    # pragma: no cover - jitted
    n = out_syms.shape[0]
    size = data.shape[0]
    if size < _FLUSH_BYTES:
        return 1
    code = np.int64(0)
    pos = np.int64(1)
    for _ in range(4):
        code = (code << 8) | data[pos]
        pos += 1
    rng = np.int64(0xFFFFFFFF)
    for i in range(n):
        _build_row(np.float64(mu[i]), np.float64(sigma[i]), smin, nsym, cum)
        r = rng // RC_TOTAL
        f = code // r
        if f >= RC_TOTAL:
            f = RC_TOTAL - 1
        lo_j = np.int64(0)
        hi_j = np.int64(nsym)
        while hi_j - lo_j > 1:
            mid = (lo_j + hi_j) >> 1
            if cum[mid] <= f:
                lo_j = mid
            else:
                hi_j = mid
        out_syms[i] = lo_j + smin
        code -= r * cum[lo_j]
        rng = r * (cum[lo_j + 1] - cum[lo_j])
        while rng < _TOP:
            if pos >= size:
                return 1
            code = ((code << 8) | data[pos]) & 0xFFFFFFFF
            pos += 1
            rng <<= 8
    if pos != size:
        return 2
    return 0


@njit(cache=True)
def _enc_table(syms, chans, mins, nsyms, offs, cum_flat, out):
    # pragma: no cover - jitted
    low = np.int64(0)
    rng = np.int64(0xFFFFFFFF)
    cache = np.int64(0)
    cache_size = np.int64(1)
    pos = np.int64(0)
    cap = out.shape[0]
    for i in range(syms.shape[0]):
        c = chans[i]
        s = syms[i] - mins[c]
        if s < 0 or s >= nsyms[c]:
            return pos, 1
        base = offs[c]
        r = rng // RC_TOTAL
        low += r * cum_flat[base + s]
        rng = r * (cum_flat[base + s + 1] - cum_flat[base + s])
        while rng < _TOP:
            if low < 0xFF000000 or low > 0xFFFFFFFF:
                carry = low >> 32
                if pos + cache_size > cap:
                    return pos, 2
                out[pos] = (cache + carry) & 0xFF
                pos += 1
                for _ in range(cache_size - 1):
                    out[pos] = (0xFF + carry) & 0xFF
                    pos += 1
                cache_size = 0
                cache = (low >> 24) & 0xFF
            cache_size += 1
            low = (low & 0xFFFFFF) << 8
            rng <<= 8
    for _ in range(_FLUSH_BYTES):
        if low < 0xFF000000 or low > 0xFFFFFFFF:
            carry = low >> 32
            if pos + cache_size > cap:
                return pos, 2
            out[pos] = (cache + carry) & 0xFF
            pos += 1
            for _ in range(cache_size - 1):
                out[pos] = (0xFF + carry) & 0xFF
                pos += 1
            cache_size = 0
            cache = (low >> 24) & 0xFF
        cache_size += 1
        low = (low & 0xFFFFFF) << 8
    return pos, 0


@njit(cache=True)
def _dec_table(data, chans, mins, nsyms, offs, cum_flat, out_syms):
    # pragma: no cover - jitted
    n = out_syms.shape[0]
    size = data.shape[0]
    if size < _FLUSH_BYTES:
        return 1
    code = np.int64(0)
    pos = np.int64(1)
    for _ in range(4):
        code = (code << 8) | data[pos]
        pos += 1
    rng = np.int64(0xFFFFFFFF)
    for i in range(n):
        c = chans[i]
        base = offs[c]
        nsym = nsyms[c]
        r = rng // RC_TOTAL
        f = code // r
        if f >= RC_TOTAL:
            f = RC_TOTAL - 1
        lo_j = np.int64(0)
        hi_j = np.int64(nsym)
        while hi_j - lo_j > 1:
            mid = (lo_j + hi_j) >> 1
            if cum_flat[base + mid] <= f:
                lo_j = mid
            else:
                hi_j = mid
        out_syms[i] = lo_j + mins[c]
        code -= r * cum_flat[base + lo_j]
        rng = r * (cum_flat[base + lo_j + 1] - cum_flat[base + lo_j])
        while rng < _TOP:
            if pos >= size:
                return 1
            code = ((code << 8) | data[pos]) & 0xFFFFFFFF
            pos += 1
            rng <<= 8
    if pos != size:
        return 2
    return 0


@njit(cache=True)
def _bits_gaussian(syms, mu, sigma, smin, nsym, cum):
    # pragma: no cover - jitted
    total = 0.0
    for i in range(syms.shape[0]):
        s = syms[i] - smin
        if s < 0 or s >= nsym:
            return -1.0
        _build_row(np.float64(mu[i]), np.float64(sigma[i]), smin, nsym, cum)
        total -= np.log2((cum[s + 1] - cum[s]) / RC_TOTAL)
    return total


def build_gaussian_row(mu: float, sigma: float, smin: int = SYMBOL_MIN,
                       smax: int = SYMBOL_MAX) -> np.ndarray:
    """One quantized CDF row as the coding kernels would build it."""
    nsym = smax - smin + 1
    if nsym < 1 or nsym >= RC_TOTAL:
        raise ShapeMismatch(f"support [{smin}, {smax}] not codable")
    cum = np.empty(nsym + 1, dtype=np.int64)
    _build_row(float(mu), float(sigma), smin, nsym, cum)
    return cum


# --------------------------------------------------------------------------
# CDF providers


@dataclass
class GaussianCdfs:
    """Per-element Gaussian CDFs over the fixed latent symbol range."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.ascontiguousarray(self.mu, dtype=np.float32).ravel()
        self.sigma = np.ascontiguousarray(
            self.sigma, dtype=np.float32).ravel()
        if self.mu.shape != self.sigma.shape:
            raise ShapeMismatch("mu/sigma size mismatch")

    def __len__(self):
        return self.mu.size


@dataclass
class TableCdfs:
    """Per-channel table CDFs; channels maps each symbol to its row."""

    table: CdfTable
    channels: np.ndarray

    def __post_init__(self):
        self.channels = np.ascontiguousarray(
            self.channels, dtype=np.int32).ravel()
        if self.channels.size and (self.channels.min() < 0 or
                                   self.channels.max() >=
                                   self.table.num_channels):
            raise ShapeMismatch("channel index outside table")

    def __len__(self):
        return self.channels.size


def _scratch_for(smin, smax):
    nsym = smax - smin + 1
    if nsym < 1 or nsym >= RC_TOTAL:
        raise ShapeMismatch(f"support [{smin}, {smax}] not codable")
    return nsym, np.empty(nsym + 1, dtype=np.int64)


def range_encode(symbols, cdfs) -> bytes:
    """Encode an integer symbol sequence under the provider's CDFs."""
    syms = np.ascontiguousarray(symbols, dtype=np.int32).ravel()
    if len(cdfs) != syms.size:
        raise ShapeMismatch(
            f"{syms.size} symbols but provider covers {len(cdfs)}")
    out = np.empty(2 * syms.size + 64, dtype=np.uint8)
    if isinstance(cdfs, GaussianCdfs):
        nsym, cum = _scratch_for(SYMBOL_MIN, SYMBOL_MAX)
        nbytes, err = _enc_gaussian(syms, cdfs.mu, cdfs.sigma, SYMBOL_MIN,
                                    nsym, out, cum)
    elif isinstance(cdfs, TableCdfs):
        t = cdfs.table
        nbytes, err = _enc_table(syms, cdfs.channels, t.kernel_mins,
                                 t.kernel_nsyms, t.kernel_offs,
                                 t.kernel_cums, out)
    else:
        raise TypeError(f"unsupported CDF provider {type(cdfs).__name__}")
    if err == 1:
        raise EncodingError("symbol outside CDF support")
    if err == 2:
        raise EncodingError("internal: output buffer overflow")
    return out[:nbytes].tobytes()


def range_decode(data: bytes, cdfs, n: int) -> np.ndarray:
    """Decode exactly n symbols; the stream must be consumed completely."""
    if n != len(cdfs):
        raise ShapeMismatch(f"asked for {n} symbols, provider covers "
                            f"{len(cdfs)}")
    buf = np.frombuffer(data, dtype=np.uint8)
    out = np.empty(n, dtype=np.int32)
    if isinstance(cdfs, GaussianCdfs):
        nsym, cum = _scratch_for(SYMBOL_MIN, SYMBOL_MAX)
        err = _dec_gaussian(buf, cdfs.mu, cdfs.sigma, SYMBOL_MIN, nsym,
                            out, cum)
    elif isinstance(cdfs, TableCdfs):
        t = cdfs.table
        err = _dec_table(buf, cdfs.channels, t.kernel_mins, t.kernel_nsyms,
                         t.kernel_offs, t.kernel_cums, out)
    else:
        raise TypeError(f"unsupported CDF provider {type(cdfs).__name__}")
    if err == 1:
        raise DecodingError("stream truncated")
    if err == 2:
        raise DecodingError("stream length mismatch")
    return out


def exact_bits(symbols, cdfs) -> float:
    """Code length the quantized CDF rows assign to the symbols, in bits.

    This is what the payload converges to, excluding the per-stream flush;
    it differs from gaussian.estimate_rate by the 16-bit quantization of
    the probabilities, so it is the right quantity for byte-level rate
    audits.
    """
    syms = np.ascontiguousarray(symbols, dtype=np.int32).ravel()
    if len(cdfs) != syms.size:
        raise ShapeMismatch(
            f"{syms.size} symbols but provider covers {len(cdfs)}")
    if isinstance(cdfs, GaussianCdfs):
        nsym, cum = _scratch_for(SYMBOL_MIN, SYMBOL_MAX)
        total = _bits_gaussian(syms, cdfs.mu, cdfs.sigma, SYMBOL_MIN, nsym,
                               cum)
        if total < 0.0:
            raise EncodingError("symbol outside CDF support")
        return float(total)
    if isinstance(cdfs, TableCdfs):
        try:
            return cdfs.table.estimate_bits(cdfs.channels, syms)
        except BadShape as e:
            raise EncodingError(str(e)) from e
    raise TypeError(f"unsupported CDF provider {type(cdfs).__name__}")
