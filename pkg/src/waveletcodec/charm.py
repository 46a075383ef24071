"""Channel-sliced conditional coding of the latent planes, plus the
self-contained classical wavelet codec path.

Latent coding runs LF first: the LF plane is cut into k channel slices,
each coded with Gaussian parameters predicted from the hyper side
information and every previously decoded slice. The packed HF planes
follow the same pattern with the fully decoded LF tensor joined to every
slice context, which is why HF decoding is impossible before LF decoding
has finished. Contexts are always built from decoded values (q + mu),
never from the raw latents, so the decoder sees bit-identical inputs and
reproduces the encoder's reconstructions exactly.

The classical path applies the same LF-before-HF discipline to raw
multi-level DWT coefficients of an image: uniform quantization, one
zero-mean Gaussian per subband with its standard deviation and symbol
support transmitted in-stream, the coarsest LL subband coded first and
the detail subbands following coarse to fine. It needs no trained
weights, which makes it the reference path for end-to-end codec checks.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .cdftable import CdfTable
from .errors import (
    DecodingError,
    DegenerateInput,
    PreconditionViolation,
    ShapeMismatch,
)
from .gaussian import SIGMA_MIN, dequantize, quantize
from .graph import SliceNetParams, softplus
from .nnops import conv2d, leaky_relu
from .rangecoder import (
    GaussianCdfs,
    TableCdfs,
    build_gaussian_row,
    exact_bits,
    range_decode,
    range_encode,
)
from .wavelets import SubbandSet, WaveletKind, dwt2d, idwt2d

_U32 = struct.Struct("<I")
# channels u8 | levels u8 | wavelet u8 | qstep f32 | height u32 | width u32
_CLASSICAL_HEADER = struct.Struct("<BBBfII")
# per subband: sigma f32 | symbol min i32 | symbol max i32
_SUBBAND_STAT = struct.Struct("<fii")


# --------------------------------------------------------------------------
# channel slices


def split_slices(y: np.ndarray, k: int) -> list:
    """Cut a (C, H, W) tensor into k contiguous channel slices."""
    y = np.asarray(y)
    if y.ndim != 3:
        raise ShapeMismatch(f"expected (C, H, W), got shape {y.shape}")
    c = y.shape[0]
    if k < 1 or c % k:
        raise ShapeMismatch(f"{c} channels not divisible into {k} slices")
    step = c // k
    return [y[i * step:(i + 1) * step] for i in range(k)]


def merge_slices(slices) -> np.ndarray:
    """Exact inverse of split_slices."""
    parts = list(slices)
    if not parts:
        raise ShapeMismatch("no slices to merge")
    return np.concatenate(parts, axis=0)


# --------------------------------------------------------------------------
# slice parameter prediction


@dataclass
class SliceContext:
    """Everything the parameter predictor for one slice is allowed to see.

    decoded_prev holds the reconstructions of strictly earlier slices;
    decoded_lf is set only in HF contexts.
    """

    side_scale: np.ndarray
    side_mean: np.ndarray
    decoded_prev: list = field(default_factory=list)
    decoded_lf: np.ndarray | None = None

    def stack(self) -> np.ndarray:
        parts = [self.side_scale, self.side_mean]
        if self.decoded_lf is not None:
            parts.append(self.decoded_lf)
        parts.extend(self.decoded_prev)
        dims = {np.asarray(p).shape[-2:] for p in parts}
        if len(dims) != 1:
            raise ShapeMismatch(
                f"context tensors not spatially aligned: {sorted(dims)}")
        return np.concatenate(
            [np.asarray(p, dtype=np.float32) for p in parts], axis=0)


def predict_slice_params(ctx: SliceContext, net: SliceNetParams):
    """Run one slice network on a stacked context.

    Returns (mu, sigma) with sigma already through the softplus positivity
    map and clamped at SIGMA_MIN, so the pair can feed the coder directly.
    """
    x = ctx.stack()
    for cp in net.convs:
        x = leaky_relu(conv2d(x, cp), net.slope)
    mu = conv2d(x, net.mu_head)
    sigma = np.maximum(softplus(conv2d(x, net.sigma_head)),
                       np.float32(SIGMA_MIN))
    return mu, sigma


# --------------------------------------------------------------------------
# latent segment wire format: k sub-segments, each u32 length + payload


def _cat_segments(parts) -> bytes:
    return b"".join(_U32.pack(len(p)) + p for p in parts)


def _next_segment(data: bytes, off: int, label: str):
    if off + _U32.size > len(data):
        raise DecodingError(f"{label}: segment header truncated")
    (n,) = _U32.unpack_from(data, off)
    off += _U32.size
    if off + n > len(data):
        raise DecodingError(f"{label}: segment truncated")
    return data[off:off + n], off + n


def _check_plane(y, channels, ref, what):
    if y.ndim != 3 or y.shape[0] != channels:
        raise ShapeMismatch(
            f"{what} must be ({channels}, h, w), got {y.shape}")
    if y.shape[1:] != ref.shape[1:]:
        raise ShapeMismatch(
            f"{what} spatial dims {y.shape[1:]} do not match side info "
            f"{ref.shape[1:]}")


# --------------------------------------------------------------------------
# LF pass


def encode_lf(y_l, side, model, account=None):
    """Code the LF latent plane; returns (bytes, decoded tensor).

    The decoded tensor is what every later coding stage must condition on;
    decode_lf reproduces it bit-exactly. When account is a list, the exact
    table code length of each slice payload is appended to it (bits).
    """
    y_l = np.ascontiguousarray(y_l, dtype=np.float32)
    _check_plane(y_l, model.hp.m, side.l_scale, "LF latent")
    parts, decoded = [], []
    for i, plane in enumerate(split_slices(y_l, model.hp.k)):
        ctx = SliceContext(side.l_scale, side.l_mean, decoded_prev=decoded)
        mu, sigma = predict_slice_params(ctx, model.slice_net("L", i))
        q = quantize(plane, mu)
        cdfs = GaussianCdfs(mu, sigma)
        parts.append(range_encode(q, cdfs))
        if account is not None:
            account.append(exact_bits(q, cdfs))
        decoded.append(dequantize(q, mu))
    return _cat_segments(parts), merge_slices(decoded)


def decode_lf(data: bytes, side, model) -> np.ndarray:
    """Inverse of encode_lf; returns the encoder's decoded tensor."""
    off, decoded = 0, []
    for i in range(model.hp.k):
        payload, off = _next_segment(data, off, f"LF slice {i}")
        ctx = SliceContext(side.l_scale, side.l_mean, decoded_prev=decoded)
        mu, sigma = predict_slice_params(ctx, model.slice_net("L", i))
        try:
            q = range_decode(payload, GaussianCdfs(mu, sigma), mu.size)
        except DecodingError as e:
            raise DecodingError(f"LF slice {i}: {e}") from e
        decoded.append(dequantize(q.reshape(mu.shape), mu))
    if off != len(data):
        raise DecodingError(
            f"{len(data) - off} trailing bytes after the LF slices")
    return merge_slices(decoded)


# --------------------------------------------------------------------------
# HF pass


def _hf_side(side, model):
    if not model.hp.split:
        raise PreconditionViolation(
            "model codes a single latent plane; there is no HF pass")
    if side.h_scale is None or side.h_mean is None:
        raise ShapeMismatch("side info lacks the HF scale/mean tensors")
    return side.h_scale, side.h_mean


def encode_hf(y_h, decoded_lf, side, model, account=None):
    """Code the packed HF planes; returns (bytes, decoded tensor).

    decoded_lf must be the tensor produced by the LF pass: it joins every
    slice context, which is what enforces the LF-before-HF order.
    """
    if decoded_lf is None:
        raise PreconditionViolation("HF coding requires the decoded LF "
                                    "tensor")
    h_scale, h_mean = _hf_side(side, model)
    y_h = np.ascontiguousarray(y_h, dtype=np.float32)
    _check_plane(y_h, 3 * model.hp.m, h_scale, "HF latent")
    decoded_lf = np.ascontiguousarray(decoded_lf, dtype=np.float32)
    _check_plane(decoded_lf, model.hp.m, h_scale, "decoded LF")
    parts, decoded = [], []
    for i, plane in enumerate(split_slices(y_h, model.hp.k)):
        ctx = SliceContext(h_scale, h_mean, decoded_prev=decoded,
                           decoded_lf=decoded_lf)
        mu, sigma = predict_slice_params(ctx, model.slice_net("H", i))
        q = quantize(plane, mu)
        cdfs = GaussianCdfs(mu, sigma)
        parts.append(range_encode(q, cdfs))
        if account is not None:
            account.append(exact_bits(q, cdfs))
        decoded.append(dequantize(q, mu))
    return _cat_segments(parts), merge_slices(decoded)


def decode_hf(data: bytes, decoded_lf, side, model) -> np.ndarray:
    """Inverse of encode_hf given the identical decoded LF tensor."""
    if decoded_lf is None:
        raise PreconditionViolation("HF decoding requires the decoded LF "
                                    "tensor")
    h_scale, h_mean = _hf_side(side, model)
    decoded_lf = np.ascontiguousarray(decoded_lf, dtype=np.float32)
    _check_plane(decoded_lf, model.hp.m, h_scale, "decoded LF")
    off, decoded = 0, []
    for i in range(model.hp.k):
        payload, off = _next_segment(data, off, f"HF slice {i}")
        ctx = SliceContext(h_scale, h_mean, decoded_prev=decoded,
                           decoded_lf=decoded_lf)
        mu, sigma = predict_slice_params(ctx, model.slice_net("H", i))
        try:
            q = range_decode(payload, GaussianCdfs(mu, sigma), mu.size)
        except DecodingError as e:
            raise DecodingError(f"HF slice {i}: {e}") from e
        decoded.append(dequantize(q.reshape(mu.shape), mu))
    if off != len(data):
        raise DecodingError(
            f"{len(data) - off} trailing bytes after the HF slices")
    return merge_slices(decoded)


# --------------------------------------------------------------------------
# classical codec path


def _image_to_planes(image):
    """(H, W) or (H, W, C) pixel array -> (C, H, W) float32."""
    arr = np.asarray(image)
    if arr.ndim == 2:
        return arr[None].astype(np.float32), False
    if arr.ndim == 3 and arr.shape[2] <= 4:
        return (np.ascontiguousarray(arr.transpose(2, 0, 1),
                                     dtype=np.float32), True)
    raise ShapeMismatch(
        f"expected an (H, W) or (H, W, C<=4) image, got shape {arr.shape}")


def _level_dims(h, w, levels):
    """dims[l] = LL plane shape after l transform levels."""
    dims = [(h, w)]
    for _ in range(levels):
        ph, pw = dims[-1]
        dims.append(((ph + 1) // 2, (pw + 1) // 2))
    return dims


def _subband_shapes(dims, levels):
    """Per-plane subband shapes in coding order: LL, then per level
    coarse->fine HL, LH, HH, with the odd-dimension padding cropped."""
    shapes = [dims[levels]]
    for lev in range(levels, 0, -1):
        sh, sw = dims[lev - 1]
        ch, cw = dims[lev]
        shapes.append((ch, sw // 2))       # HL: W-highpass keeps floor cols
        shapes.append((sh // 2, cw))       # LH: H-highpass keeps floor rows
        shapes.append((sh // 2, sw // 2))  # HH
    return shapes


def _analyze(planes, wavelet, levels):
    """Multi-level DWT of a (C, H, W) tensor.

    Returns the subband tensors in coding order, cropped to their true
    (unpadded) sizes so no padding zeros are ever coded.
    """
    sets = []
    cur = planes
    for _ in range(levels):
        s = dwt2d(cur, wavelet)
        sets.append(s)
        cur = s.ll
    bands = [cur]
    for s in reversed(sets):
        hr, wc = s.src_h // 2, s.src_w // 2
        bands.append(s.hl[:, :, :wc])
        bands.append(s.lh[:, :hr, :])
        bands.append(s.hh[:, :hr, :wc])
    return bands


def _pad_band(band, target):
    ph = target[0] - band.shape[-2]
    pw = target[1] - band.shape[-1]
    if ph == 0 and pw == 0:
        return band
    return np.pad(band, ((0, 0), (0, ph), (0, pw)))


def _synthesize(ll, details, dims, levels, wavelet):
    """Inverse of _analyze given dequantized subband tensors."""
    cur = ll
    bi = 0
    for lev in range(levels, 0, -1):
        sh, sw = dims[lev - 1]
        target = dims[lev]
        hl, lh, hh = details[bi], details[bi + 1], details[bi + 2]
        bi += 3
        cur = idwt2d(SubbandSet(ll=cur,
                                hl=_pad_band(hl, target),
                                lh=_pad_band(lh, target),
                                hh=_pad_band(hh, target),
                                wavelet=wavelet, src_h=sh, src_w=sw))
    return cur


def _validate_classical_args(planes, levels, qstep):
    levels = int(levels)
    if levels < 1 or levels > 255:
        raise DegenerateInput(f"levels must be in 1..255, got {levels}")
    # quantization must agree with the f32 wire value bit for bit
    qs = float(np.float32(qstep))
    if not np.isfinite(qs) or qs <= 0.0:
        raise DegenerateInput(f"qstep must be a positive real, got {qstep}")
    c, h, w = planes.shape
    if h < (1 << levels) or w < (1 << levels):
        raise DegenerateInput(
            f"{h}x{w} image cannot hold {levels} DWT levels")
    return levels, qs


def classical_encode(image, wavelet=WaveletKind.CDF53, levels=3,
                     qstep=1.0, account=None) -> bytes:
    """Self-contained wavelet coding of an 8-bit style image array.

    Accepts (H, W) or channel-last (H, W, C) pixel data. The stream holds
    its own geometry, the per-subband statistics and two range-coded
    payloads: the coarsest LL subband first, then all detail subbands from
    coarse to fine. When account is a list the exact code length of each
    payload is appended to it (bits).
    """
    planes, _ = _image_to_planes(image)
    levels, qs = _validate_classical_args(planes, levels, qstep)
    wavelet = WaveletKind(wavelet)
    c, h, w = planes.shape
    bands = _analyze(planes, wavelet, levels)
    syms = [quantize(np.asarray(b, dtype=np.float64) / qs, 0.0)
            for b in bands]
    stats, rows = [], []
    for q in syms:
        sigma = float(np.float32(q.std()))
        lo, hi = int(q.min()), int(q.max())
        stats.append((sigma, lo, hi))
        rows.append(build_gaussian_row(0.0, sigma, lo, hi))
    table = CdfTable(mins=[lo for _, lo, _ in stats], edges=rows)

    ll = syms[0].ravel()
    ll_cdfs = TableCdfs(table, np.zeros(ll.size, dtype=np.int32))
    ll_bytes = range_encode(ll, ll_cdfs)
    det = np.concatenate([q.ravel() for q in syms[1:]])
    chan = np.concatenate([np.full(q.size, j + 1, dtype=np.int32)
                           for j, q in enumerate(syms[1:])])
    det_cdfs = TableCdfs(table, chan)
    det_bytes = range_encode(det, det_cdfs)
    if account is not None:
        account.append(exact_bits(ll, ll_cdfs))
        account.append(exact_bits(det, det_cdfs))

    head = _CLASSICAL_HEADER.pack(c, levels, int(wavelet), qs, h, w)
    recs = b"".join(_SUBBAND_STAT.pack(*s) for s in stats)
    return b"".join([head, recs,
                     _U32.pack(len(ll_bytes)), ll_bytes,
                     _U32.pack(len(det_bytes)), det_bytes])


def classical_decode(data: bytes) -> np.ndarray:
    """Inverse of classical_encode.

    Returns the float32 reconstruction (the IDWT of the dequantized
    coefficients, unclipped), shaped (H, W) for single-plane streams and
    (H, W, C) otherwise.
    """
    try:
        c, levels, wav, qs, h, w = _CLASSICAL_HEADER.unpack_from(data, 0)
    except struct.error as e:
        raise DecodingError(f"classical header truncated: {e}") from e
    try:
        wavelet = WaveletKind(wav)
    except ValueError:
        raise DecodingError(f"unknown wavelet code {wav}") from None
    if c < 1 or levels < 1 or not np.isfinite(qs) or qs <= 0.0:
        raise DecodingError("inconsistent classical header")
    if h < (1 << levels) or w < (1 << levels):
        raise DecodingError(f"{h}x{w} image cannot hold {levels} DWT levels")

    off = _CLASSICAL_HEADER.size
    nsub = 1 + 3 * levels
    stats = []
    for j in range(nsub):
        try:
            sigma, lo, hi = _SUBBAND_STAT.unpack_from(data, off)
        except struct.error:
            raise DecodingError(
                f"subband {j}: statistics truncated") from None
        off += _SUBBAND_STAT.size
        if not np.isfinite(sigma) or lo > hi:
            raise DecodingError(f"subband {j}: malformed statistics")
        stats.append((sigma, lo, hi))
    try:
        rows = [build_gaussian_row(0.0, s, lo, hi) for s, lo, hi in stats]
    except ShapeMismatch as e:
        raise DecodingError(f"subband support not codable: {e}") from e
    table = CdfTable(mins=[lo for _, lo, _ in stats], edges=rows)

    ll_payload, off = _next_segment(data, off, "LL stream")
    det_payload, off = _next_segment(data, off, "detail stream")
    if off != len(data):
        raise DecodingError(f"{len(data) - off} trailing bytes after the "
                            f"subband payloads")

    dims = _level_dims(h, w, levels)
    shapes = _subband_shapes(dims, levels)
    counts = [c * sh * sw for sh, sw in shapes]
    try:
        ll = range_decode(ll_payload,
                          TableCdfs(table, np.zeros(counts[0], np.int32)),
                          counts[0])
    except DecodingError as e:
        raise DecodingError(f"LL stream: {e}") from e
    chan = np.concatenate([np.full(n, j + 1, dtype=np.int32)
                           for j, n in enumerate(counts[1:])])
    try:
        det = range_decode(det_payload, TableCdfs(table, chan), chan.size)
    except DecodingError as e:
        raise DecodingError(f"detail stream: {e}") from e

    def deq(symbols, shape):
        t = symbols.reshape(c, *shape).astype(np.float64) * qs
        return t.astype(np.float32)

    details = []
    pos = 0
    for n, shape in zip(counts[1:], shapes[1:]):
        details.append(deq(det[pos:pos + n], shape))
        pos += n
    out = _synthesize(deq(ll, shapes[0]), details, dims, levels, wavelet)
    return out[0] if c == 1 else np.ascontiguousarray(
        out.transpose(1, 2, 0))


def sparsity_fractions(image, wavelet=WaveletKind.CDF53, levels=3,
                       qstep=1.0):
    """Zero fractions of (quantized DWT coefficients, quantized
    mean-removed pixels) at the same step, for sparsity comparisons."""
    planes, _ = _image_to_planes(image)
    levels, qs = _validate_classical_args(planes, levels, qstep)
    zeros = total = 0
    for b in _analyze(planes, WaveletKind(wavelet), levels):
        q = quantize(np.asarray(b, dtype=np.float64) / qs, 0.0)
        zeros += int(np.count_nonzero(q == 0))
        total += q.size
    centered = planes - planes.mean(axis=(1, 2), keepdims=True)
    qp = quantize(centered.astype(np.float64) / qs, 0.0)
    pixel_frac = float(np.count_nonzero(qp == 0)) / qp.size
    return zeros / total, pixel_frac
