"""Bitstream container and file-level codec entry points.

Layout (all little-endian):

    "WCVN" | version u8 | mode u8 (0 = neural, 1 = classical)
    | wavelet u8 | slices u8 | orig_w u32 | orig_h u32
    | mode block: manifest digest (16 bytes, neural) or
      qstep f32 + levels u8 (classical)
    | z_len u32 + z segment | lf_len u32 + LF segment
    | hf_len u32 + HF segment

The neural z segment starts with a flag byte: 0 means a factorized CDF
table built from this image follows in-stream (u32 length + wire bytes),
1 means the table is taken from the manifest. The hyper-latent payload
fills the rest. Classical mode reuses the slots: z carries the
per-subband statistics records, LF the LL payload, HF the detail
payload; geometry, qstep and levels live in the header, so the classical
decoder needs no model.

bpp accounting includes every byte of the file. RateReport.est_bits adds
the known structural costs (header, tables, length prefixes, per-stream
flush bytes) to the per-symbol table code lengths, so the
estimate-vs-actual gap isolates pure coder slack, which is at most a few
bytes per coded stream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .cdftable import CdfTable, build_factorized_cdf
from .charm import (
    _CLASSICAL_HEADER,
    _SUBBAND_STAT,
    _next_segment,
    classical_decode,
    classical_encode,
    decode_hf,
    decode_lf,
    encode_hf,
    encode_lf,
)
from .errors import (
    BadMagic,
    DecodingError,
    IoError,
    ModelMismatch,
    PreconditionViolation,
    ShapeMismatch,
    VersionUnsupported,
)
from .gaussian import dequantize, quantize
from .graph import TILE, CodecGraph, LatentPair, normalize_image
from .rangecoder import (
    FLUSH_BYTES,
    TableCdfs,
    exact_bits,
    range_decode,
    range_encode,
)
from .wavelets import WaveletKind

MAGIC = b"WCVN"
VERSION = 1
MODE_NEURAL = 0
MODE_CLASSICAL = 1

_U32 = struct.Struct("<I")
_HEADER = struct.Struct("<4sBBBBII")
_CLASSICAL_BLOCK = struct.Struct("<fB")


@dataclass
class RateReport:
    """Byte-exact rate accounting for one encoded image."""

    bpp: float
    actual_bits: int
    est_bits: float
    pixels: int

    def audit_error(self) -> float:
        """|actual - estimated| as a fraction of the estimate."""
        return abs(self.actual_bits - self.est_bits) / self.est_bits


def _check_rgb(image) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ShapeMismatch(
            f"expected an (H, W, 3) uint8 image, got {arr.dtype} "
            f"{arr.shape}")
    return arr


def _pad_to_tile(img: np.ndarray) -> np.ndarray:
    """Edge-replicate an (H, W, 3) image up to the tile grid, as (3, H, W)."""
    h, w = img.shape[:2]
    padded = np.pad(img, ((0, -h % TILE), (0, -w % TILE), (0, 0)),
                    mode="edge")
    return np.ascontiguousarray(padded.transpose(2, 0, 1))


def _seg(payload: bytes) -> bytes:
    return _U32.pack(len(payload)) + payload


def _finish_report(data: bytes, streams, pixels) -> RateReport:
    payload_bytes = sum(p for _, p in streams)
    est = (sum(b for b, _ in streams)
           + 8.0 * FLUSH_BYTES * len(streams)
           + 8.0 * (len(data) - payload_bytes))
    return RateReport(bpp=8.0 * len(data) / pixels,
                      actual_bits=8 * len(data), est_bits=est,
                      pixels=pixels)


# --------------------------------------------------------------------------
# encoding


def _hyper_dims(hp, orig_h, orig_w):
    ph = -orig_h % TILE + orig_h
    pw = -orig_w % TILE + orig_w
    factor = 128 if hp.split else 64
    return hp.zdim, ph // factor, pw // factor


def _encode_neural(img: np.ndarray, model: CodecGraph):
    hp = model.hp
    h, w = img.shape[:2]
    latents = model.analysis(normalize_image(_pad_to_tile(img)))
    z = model.hyper_analysis(latents)
    zq = quantize(z, 0.0)
    side = model.hyper_synthesis(dequantize(zq, 0.0))

    if model.manifest.zcdf is not None:
        table = CdfTable.from_json(model.manifest.zcdf)
        z_head = bytes([1])
    else:
        table = build_factorized_cdf(zq.reshape(zq.shape[0], -1))
        wire = table.serialize()
        z_head = bytes([0]) + _seg(wire)
    chan = np.repeat(np.arange(zq.shape[0], dtype=np.int32),
                     zq.shape[1] * zq.shape[2])
    z_cdfs = TableCdfs(table, chan)
    z_payload = range_encode(zq, z_cdfs)
    streams = [(exact_bits(zq, z_cdfs), len(z_payload))]

    acc = []
    lf_seg, dec_lf = encode_lf(latents.y_l, side, model, account=acc)
    if hp.split:
        hf_seg, _ = encode_hf(latents.y_h, dec_lf, side, model, account=acc)
    else:
        hf_seg = b""
    for bits, seg, k in [(acc[:hp.k], lf_seg, hp.k),
                         (acc[hp.k:], hf_seg, hp.k if hp.split else 0)]:
        if k:
            payload = len(seg) - _U32.size * k
            # per-slice payload sizes are not needed, only the total
            streams.append((float(np.sum(bits)), payload))

    header = _HEADER.pack(MAGIC, VERSION, MODE_NEURAL, int(hp.wavelet),
                          hp.k, w, h) + model.manifest.digest
    data = header + _seg(z_head + z_payload) + _seg(lf_seg) + _seg(hf_seg)
    # streams holds merged LF/HF entries; expand the flush count to the
    # true stream count (one per slice payload plus the z stream)
    n_streams = 1 + hp.k + (hp.k if hp.split else 0)
    payload_bytes = sum(p for _, p in streams)
    est = (sum(b for b, _ in streams) + 8.0 * FLUSH_BYTES * n_streams
           + 8.0 * (len(data) - payload_bytes))
    report = RateReport(bpp=8.0 * len(data) / (w * h),
                        actual_bits=8 * len(data), est_bits=est,
                        pixels=w * h)
    return data, report


def _split_classical_blob(blob: bytes):
    c, levels, wav, qs, h, w = _CLASSICAL_HEADER.unpack_from(blob, 0)
    off = _CLASSICAL_HEADER.size
    nrec = (1 + 3 * levels) * _SUBBAND_STAT.size
    stats = blob[off:off + nrec]
    off += nrec
    ll, off = _next_segment(blob, off, "LL stream")
    det, off = _next_segment(blob, off, "detail stream")
    return (wav, qs, levels), stats, ll, det


def _encode_classical(img, wavelet, levels, qstep):
    h, w = img.shape[:2]
    acc = []
    blob = classical_encode(img, wavelet=wavelet, levels=levels,
                            qstep=qstep, account=acc)
    (wav, qs, lv), stats, ll, det = _split_classical_blob(blob)
    header = (_HEADER.pack(MAGIC, VERSION, MODE_CLASSICAL, wav, 0, w, h)
              + _CLASSICAL_BLOCK.pack(qs, lv))
    data = header + _seg(stats) + _seg(ll) + _seg(det)
    streams = [(acc[0], len(ll)), (acc[1], len(det))]
    return data, _finish_report(data, streams, h * w)


def encode_array(image, model: CodecGraph | None = None, *,
                 mode: str = "neural", qstep: float = 1.0, levels: int = 3,
                 wavelet=WaveletKind.CDF53):
    """Encode an (H, W, 3) uint8 array; returns (bitstream, RateReport)."""
    img = _check_rgb(image)
    if mode == "neural":
        if model is None:
            raise PreconditionViolation("neural mode needs a loaded model")
        return _encode_neural(img, model)
    if mode == "classical":
        return _encode_classical(img, wavelet, levels, qstep)
    raise PreconditionViolation(f"unknown mode {mode!r}")


# --------------------------------------------------------------------------
# decoding


def _decode_neural(data, off, wav, slices, w, h, model: CodecGraph):
    if len(data) < off + 16:
        raise DecodingError("model digest truncated")
    digest = data[off:off + 16]
    off += 16
    if model is None:
        raise PreconditionViolation("neural stream needs its model")
    if digest != model.manifest.digest:
        raise ModelMismatch("bitstream was produced by a different model")
    hp = model.hp
    if wav != int(hp.wavelet) or slices != hp.k:
        raise DecodingError("header disagrees with the model's "
                            "hyperparameters")

    z_seg, off = _next_segment(data, off, "hyper segment")
    lf_seg, off = _next_segment(data, off, "LF segment")
    hf_seg, off = _next_segment(data, off, "HF segment")
    if off != len(data):
        raise DecodingError(f"{len(data) - off} trailing bytes after the "
                            f"HF segment")

    if not z_seg:
        raise DecodingError("hyper segment empty")
    flag, z_seg = z_seg[0], z_seg[1:]
    if flag == 1:
        if model.manifest.zcdf is None:
            raise DecodingError("stream expects a model-borne hyper CDF "
                                "table but the manifest has none")
        table = CdfTable.from_json(model.manifest.zcdf)
        z_payload = z_seg
    elif flag == 0:
        wire, pos = _next_segment(z_seg, 0, "hyper CDF table")
        try:
            table = CdfTable.parse(wire)
        except DecodingError as e:
            raise DecodingError(f"hyper CDF table: {e}") from e
        z_payload = z_seg[pos:]
    else:
        raise DecodingError(f"unknown hyper table flag {flag}")

    zdim, hz, wz = _hyper_dims(hp, h, w)
    chan = np.repeat(np.arange(zdim, dtype=np.int32), hz * wz)
    try:
        zq = range_decode(z_payload, TableCdfs(table, chan), chan.size)
    except DecodingError as e:
        raise DecodingError(f"hyper payload: {e}") from e
    side = model.hyper_synthesis(
        dequantize(zq.reshape(zdim, hz, wz), 0.0))

    dec_lf = decode_lf(lf_seg, side, model)
    if hp.split:
        dec_hf = decode_hf(hf_seg, dec_lf, side, model)
        latents = LatentPair(y_l=dec_lf, y_h=dec_hf)
    else:
        if hf_seg:
            raise DecodingError("unexpected HF payload for a single-plane "
                                "model")
        latents = LatentPair(y_l=dec_lf, y_h=None)
    img = model.synthesis(latents, out_hw=(h, w))
    return np.clip(np.round(img), 0, 255).astype(np.uint8).transpose(
        1, 2, 0)


def _decode_classical(data, off, wav, w, h):
    if len(data) < off + _CLASSICAL_BLOCK.size:
        raise DecodingError("classical mode block truncated")
    qs, levels = _CLASSICAL_BLOCK.unpack_from(data, off)
    off += _CLASSICAL_BLOCK.size
    stats, off = _next_segment(data, off, "statistics segment")
    ll, off = _next_segment(data, off, "LL segment")
    det, off = _next_segment(data, off, "detail segment")
    if off != len(data):
        raise DecodingError(f"{len(data) - off} trailing bytes after the "
                            f"detail segment")
    expect = (1 + 3 * levels) * _SUBBAND_STAT.size
    if len(stats) != expect:
        raise DecodingError(f"statistics segment holds {len(stats)} bytes, "
                            f"{levels} levels need {expect}")
    blob = (_CLASSICAL_HEADER.pack(3, levels, wav, qs, h, w) + stats
            + _seg(ll) + _seg(det))
    rec = classical_decode(blob)
    return np.clip(np.round(rec), 0, 255).astype(np.uint8)


def decode_array(data: bytes, model: CodecGraph | None = None):
    """Decode a bitstream; returns the (H, W, 3) uint8 reconstruction."""
    if len(data) < _HEADER.size:
        raise BadMagic("bitstream shorter than its header")
    magic, version, mode, wav, slices, w, h = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad bitstream magic {magic!r}")
    if version != VERSION:
        raise VersionUnsupported(f"bitstream version {version}, "
                                 f"decoder supports {VERSION}")
    if w < 1 or h < 1:
        raise DecodingError(f"bad image dims {w}x{h}")
    off = _HEADER.size
    if mode == MODE_NEURAL:
        return _decode_neural(data, off, wav, slices, w, h, model)
    if mode == MODE_CLASSICAL:
        return _decode_classical(data, off, wav, w, h)
    raise DecodingError(f"unknown mode byte {mode}")


# --------------------------------------------------------------------------
# file-level wrappers


def load_image(path) -> np.ndarray:
    """Read an 8-bit RGB image file as an (H, W, 3) uint8 array."""
    try:
        with Image.open(path) as im:
            if im.mode != "RGB":
                raise IoError(f"{path}: need an 8-bit RGB image, got "
                              f"mode {im.mode}")
            return np.asarray(im, dtype=np.uint8)
    except IoError:
        raise
    except (OSError, ValueError) as e:
        raise IoError(f"cannot read image {path}: {e}") from e


def save_image(arr: np.ndarray, path):
    try:
        Image.fromarray(_check_rgb(arr), "RGB").save(path)
    except (OSError, ValueError) as e:
        raise IoError(f"cannot write image {path}: {e}") from e
    return path


def encode_file(image_path, output_path, model: CodecGraph | None = None,
                **options):
    """Encode an image file; writes the bitstream, returns a RateReport."""
    data, report = encode_array(load_image(image_path), model, **options)
    try:
        with open(output_path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise IoError(f"cannot write bitstream {output_path}: {e}") from e
    return report


def decode_file(bitstream_path, output_path,
                model: CodecGraph | None = None):
    """Decode a bitstream file to an 8-bit RGB image file."""
    try:
        with open(bitstream_path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise IoError(f"cannot read bitstream {bitstream_path}: {e}") from e
    return save_image(decode_array(data, model), output_path)
