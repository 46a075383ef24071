"""Model weight manifests.

File layout (little-endian throughout):

    "WCVM" | version u8 | json_len u32 | JSON index (UTF-8) | blob | crc32 u32

The blob is a packed sequence of float32 tensors; the JSON index maps
tensor names to shapes and byte offsets and carries the architecture
hyperparameters. The CRC covers the blob.

JSON structure::

    {
      "tensors": [{"name": "...", "shape": [...], "offset": 0}, ...],
      "hyperparams": {"N": ..., "M": ..., "slices": ..., "wavelet": ...,
                      "lambda_index": ..., ...},
      "slopes": {"ga.stage1": 0.2, ...},      # optional per-layer LeakyReLU
      "zcdf": {...}                           # optional hyper-latent CDF
    }

A manifest containing any tensor under the graph prefixes (ga./gs./ha./
hs./charm.) is treated as a codec model and validated against the full
tensor set implied by its hyperparameters; a manifest without such names
is a plain tensor store and only checked structurally.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    BadShape,
    CorruptBlob,
    MissingTensor,
    VersionUnsupported,
)

MAGIC = b"WCVM"
VERSION = 1

REQUIRED_HYPERPARAMS = ("N", "M", "slices", "wavelet", "lambda_index")
GRAPH_PREFIXES = ("ga.", "gs.", "ha.", "hs.", "charm.")

# Defaults for optional hyperparameters; "zdim" is the hyper-latent channel
# count, "hidden" the slice-network width (0 = derive from slice size),
# "weconv"/"split" the ablation toggles.
OPTIONAL_DEFAULTS = {
    "zdim": 0,           # 0 = same as N
    "hidden": 0,         # 0 = 2x slice channels
    "leaky_slope": 0.01,
    "weconv": 1,
    "split": 1,
}


@dataclass
class ModelManifest:
    hyperparams: dict
    index: dict            # name -> (shape tuple, byte offset)
    blob: bytes
    digest: bytes          # md5 of the whole file, 16 bytes
    slopes: dict = field(default_factory=dict)
    zcdf: dict | None = None

    def has(self, name: str) -> bool:
        return name in self.index

    def tensor(self, name: str) -> np.ndarray:
        """Read-only float32 view of one named tensor."""
        if name not in self.index:
            raise MissingTensor(name)
        shape, offset = self.index[name]
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(self.blob, dtype="<f4", count=count,
                            offset=offset)
        return arr.reshape(shape)

    def hp(self, key: str):
        if key in self.hyperparams:
            return self.hyperparams[key]
        if key in OPTIONAL_DEFAULTS:
            return OPTIONAL_DEFAULTS[key]
        raise KeyError(key)

    def slope(self, layer: str) -> float:
        return float(self.slopes.get(layer, self.hp("leaky_slope")))


def save_manifest(path, tensors: dict, hyperparams: dict,
                  slopes: dict | None = None, zcdf: dict | None = None):
    """Write a manifest file; tensors is an ordered name->array mapping."""
    for key in REQUIRED_HYPERPARAMS:
        if key not in hyperparams:
            raise KeyError(f"hyperparams missing required key {key!r}")
    entries = []
    chunks = []
    offset = 0
    for name, arr in tensors.items():
        a = np.ascontiguousarray(arr, dtype="<f4")
        entries.append({"name": name, "shape": list(a.shape),
                        "offset": offset})
        raw = a.tobytes()
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    doc = {"tensors": entries, "hyperparams": hyperparams}
    if slopes:
        doc["slopes"] = slopes
    if zcdf is not None:
        doc["zcdf"] = zcdf
    payload = json.dumps(doc, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<B", VERSION))
        f.write(struct.pack("<I", len(payload)))
        f.write(payload)
        f.write(blob)
        f.write(struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF))
    return path


def load_manifest(path) -> ModelManifest:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 13 or raw[:4] != MAGIC:
        raise BadMagic(f"{path}: not a model manifest")
    version = raw[4]
    if version != VERSION:
        raise VersionUnsupported(f"manifest version {version}")
    (json_len,) = struct.unpack_from("<I", raw, 5)
    body_start = 9 + json_len
    if body_start + 4 > len(raw):
        raise CorruptBlob("manifest truncated before blob")
    try:
        doc = json.loads(raw[9:body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptBlob(f"manifest index unreadable: {e}") from e
    blob = raw[body_start:-4]
    (crc_stored,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(blob) & 0xFFFFFFFF != crc_stored:
        raise CorruptBlob("blob checksum mismatch")

    hyperparams = doc.get("hyperparams", {})
    for key in REQUIRED_HYPERPARAMS:
        if key not in hyperparams:
            raise BadShape(f"hyperparams missing required key {key!r}")

    index = {}
    spans = []
    for entry in doc.get("tensors", []):
        name = entry["name"]
        shape = tuple(int(d) for d in entry["shape"])
        offset = int(entry["offset"])
        if name in index:
            raise BadShape(f"tensor {name!r} appears twice")
        nbytes = int(np.prod(shape)) * 4 if shape else 4
        if offset < 0 or offset + nbytes > len(blob):
            raise BadShape(
                f"tensor {name!r} spans [{offset}, {offset + nbytes}) "
                f"outside blob of {len(blob)} bytes")
        spans.append((offset, offset + nbytes, name))
        index[name] = (shape, offset)
    spans.sort()
    for (s0, e0, n0), (s1, e1, n1) in zip(spans, spans[1:]):
        if s1 < e0:
            raise BadShape(f"tensors {n0!r} and {n1!r} overlap in blob")

    m = ModelManifest(hyperparams=hyperparams, index=index, blob=blob,
                      digest=hashlib.md5(raw).digest(),
                      slopes=doc.get("slopes", {}),
                      zcdf=doc.get("zcdf"))
    if any(name.startswith(GRAPH_PREFIXES) for name in index):
        from .graph import validate_codec_manifest
        validate_codec_manifest(m)
    return m
