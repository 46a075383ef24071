"""Per-channel quantized CDF tables for the hyper latent and table-coded
planes.

A table row is a strictly increasing integer cumulative over a contiguous
symbol support [min, max], starting at 0 and ending at 2^16, so every
in-support symbol keeps nonzero coded probability. Rows are built from
empirical histograms (Laplace-smoothed, with one guard bin on each side)
or parsed back out of a bitstream.

Wire format (little-endian): channel count u16, then per channel
min i16 | max i16 | (max - min) interior cumulatives u16. The leading 0
and trailing 2^16 are implicit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import BadShape, DecodingError, DegenerateInput

RC_TOTAL = 1 << 16


def _quantize_cumulative(probs: np.ndarray) -> np.ndarray:
    """Turn a probability vector into strict integer cumulative edges.

    One frequency unit per symbol is reserved up front; the remaining
    2^16 - k units are split proportionally to the cumulative mass. The
    result is strictly increasing with every symbol at frequency >= 1,
    and each edge depends only on its own cumulative fraction.
    """
    probs = np.asarray(probs, dtype=np.float64)
    k = probs.size
    if k < 1 or k >= RC_TOTAL:
        raise BadShape(f"{k} symbols not quantizable to 16 bits")
    if np.any(probs < 0) or probs.sum() <= 0:
        raise BadShape("probabilities must be nonnegative with mass")
    if k == 1:
        return np.array([0, RC_TOTAL], dtype=np.int64)
    cumfrac = np.cumsum(probs)[:-1] / probs.sum()
    j = np.arange(1, k, dtype=np.int64)
    scaled = np.rint(cumfrac * (RC_TOTAL - k)).astype(np.int64)
    return np.concatenate(([0], j + scaled, [RC_TOTAL]))


@dataclass
class CdfTable:
    """Immutable set of per-channel cumulative rows."""

    mins: np.ndarray
    edges: list                      # per channel int64 array, len nsym+1

    kernel_mins: np.ndarray = field(init=False, repr=False)
    kernel_nsyms: np.ndarray = field(init=False, repr=False)
    kernel_offs: np.ndarray = field(init=False, repr=False)
    kernel_cums: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=np.int32)
        if self.mins.ndim != 1 or len(self.edges) != self.mins.size:
            raise BadShape("one min and one edge row per channel required")
        if self.mins.size == 0:
            raise BadShape("empty CDF table")
        rows = []
        for i, e in enumerate(self.edges):
            e = np.asarray(e, dtype=np.int64)
            if e.size < 2 or e[0] != 0 or e[-1] != RC_TOTAL:
                raise BadShape(f"channel {i}: cumulative must run 0..2^16")
            if np.any(np.diff(e) < 1):
                raise BadShape(f"channel {i}: cumulative not strictly "
                               f"increasing")
            rows.append(e)
        self.edges = rows
        self.kernel_mins = self.mins.copy()
        self.kernel_nsyms = np.array([e.size - 1 for e in rows],
                                     dtype=np.int32)
        lens = np.array([e.size for e in rows], dtype=np.int64)
        self.kernel_offs = np.concatenate(([0], np.cumsum(lens)[:-1]))
        self.kernel_cums = np.concatenate(rows)

    @property
    def num_channels(self) -> int:
        return self.mins.size

    def support(self, c: int):
        return int(self.mins[c]), int(self.mins[c] +
                                      self.kernel_nsyms[c] - 1)

    def prob(self, c: int, s: int) -> float:
        lo, hi = self.support(c)
        if s < lo or s > hi:
            return 0.0
        e = self.edges[c]
        j = s - lo
        return float(e[j + 1] - e[j]) / RC_TOTAL

    def estimate_bits(self, channels, symbols) -> float:
        """Ideal code length of symbols under their channel rows."""
        channels = np.asarray(channels, dtype=np.int64).ravel()
        symbols = np.asarray(symbols, dtype=np.int64).ravel()
        if channels.shape != symbols.shape:
            raise BadShape("channels/symbols size mismatch")
        if symbols.size == 0:
            return 0.0
        j = symbols - self.kernel_mins[channels]
        if np.any(j < 0) or np.any(j >= self.kernel_nsyms[channels]):
            raise BadShape("symbol outside table support")
        base = self.kernel_offs[channels]
        width = self.kernel_cums[base + j + 1] - self.kernel_cums[base + j]
        return float(-np.log2(width / RC_TOTAL).sum())

    # -- construction ----------------------------------------------------

    @classmethod
    def from_counts(cls, mins, counts_per_channel) -> "CdfTable":
        edges = [_quantize_cumulative(c) for c in counts_per_channel]
        return cls(mins=mins, edges=edges)

    # -- wire format -------------------------------------------------------

    def serialize(self) -> bytes:
        parts = [struct.pack("<H", self.num_channels)]
        for c in range(self.num_channels):
            lo, hi = self.support(c)
            if not (-32768 <= lo <= hi <= 32767):
                raise BadShape(f"support [{lo}, {hi}] exceeds i16")
            parts.append(struct.pack("<hh", lo, hi))
            interior = self.edges[c][1:-1]
            parts.append(interior.astype("<u2").tobytes())
        return b"".join(parts)

    @classmethod
    def parse(cls, data: bytes) -> "CdfTable":
        try:
            (count,) = struct.unpack_from("<H", data, 0)
            pos = 2
            mins, edges = [], []
            for _ in range(count):
                lo, hi = struct.unpack_from("<hh", data, pos)
                pos += 4
                if hi < lo:
                    raise DecodingError("CDF support reversed")
                n_int = hi - lo
                interior = np.frombuffer(data, dtype="<u2", count=n_int,
                                         offset=pos).astype(np.int64)
                pos += 2 * n_int
                mins.append(lo)
                edges.append(np.concatenate(([0], interior, [RC_TOTAL])))
            if pos != len(data):
                raise DecodingError("trailing bytes after CDF table")
            return cls(mins=np.array(mins, dtype=np.int32), edges=edges)
        except (struct.error, ValueError, BadShape) as e:
            raise DecodingError(f"malformed CDF table: {e}") from e

    # -- manifest JSON form ------------------------------------------------

    def to_json(self) -> dict:
        return {"mins": [int(m) for m in self.mins],
                "cums": [[int(v) for v in e[1:-1]] for e in self.edges]}

    @classmethod
    def from_json(cls, doc: dict) -> "CdfTable":
        mins = np.asarray(doc["mins"], dtype=np.int32)
        edges = [np.concatenate(([0], np.asarray(c, dtype=np.int64),
                                 [RC_TOTAL]))
                 for c in doc["cums"]]
        return cls(mins=mins, edges=edges)


def build_factorized_cdf(samples) -> CdfTable:
    """Laplace-smoothed per-channel histogram CDF with +-1 guard bins.

    samples: (C, N) integer array or a sequence of per-channel integer
    arrays. Every channel needs at least one sample.
    """
    if isinstance(samples, np.ndarray) and samples.ndim == 2:
        per_channel = [samples[c] for c in range(samples.shape[0])]
    else:
        per_channel = [np.asarray(s) for s in samples]
    if not per_channel:
        raise DegenerateInput("no channels")
    mins, edges = [], []
    for c, vals in enumerate(per_channel):
        vals = np.asarray(vals, dtype=np.int64).ravel()
        if vals.size == 0:
            raise DegenerateInput(f"channel {c} has no samples")
        lo = int(vals.min()) - 1
        hi = int(vals.max()) + 1
        counts = np.bincount(vals - lo, minlength=hi - lo + 1) + 1
        mins.append(lo)
        edges.append(_quantize_cumulative(counts.astype(np.float64)))
    return CdfTable(mins=np.array(mins, dtype=np.int32), edges=edges)
