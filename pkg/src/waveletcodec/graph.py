"""Composite layers and network assembly.

The codec's four subnetworks are built from manifest tensors by name:

* ``ga.stage0..6``  analysis: wavelet-conv downsampling stages interleaved
  with residual groups, then a plain stride-2 conv to M channels, then a
  latent DWT that splits y into the LF subband y_l (M channels) and the
  packed HF subbands y_h (3M channels, order [HL | LH | HH]).
* ``gs.stage0..6``  synthesis: the mirror image (transposed stem first,
  inverse wavelet-conv stages after).
* ``ha.*`` / ``hs.*``  hyper networks: x4 down to the hyper latent z and
  back up to the side-information tensors (scale/mean for LF and, when the
  latent split is active, for HF).
* ``charm.L.sliceI.*`` / ``charm.H.sliceI.*``  slice-network weights used
  by the conditional entropy model (see the charm module).

A wavelet-conv layer is: stem conv (stride 2, or transposed stride 2 on
the synthesis side) -> single-level DWT -> one conv stack on the LL band
and one on the concatenated detail bands -> inverse DWT -> (I)GDN -> plus
a 1x1 stem-strided shortcut of the layer input. With the ``weconv``
hyperparameter off the DWT sandwich is skipped (plain stem + GDN +
shortcut), which is the ablation baseline; with ``split`` off the latent
DWT is skipped and y is coded as a single plane.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .errors import (
    BadShape,
    DegenerateInput,
    MissingTensor,
    ShapeMismatch,
)
from .manifest import ModelManifest, save_manifest
from .nnops import (
    ConvParams,
    GdnParams,
    ResidualBlockParams,
    conv2d,
    gdn,
    leaky_relu,
    residual_block,
)
from .wavelets import SubbandSet, WaveletKind, dwt2d, idwt2d

TILE = 128  # input dims must be padded to a multiple of this


def softplus(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    return (np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)).astype(
        np.float32)


def normalize_image(img) -> np.ndarray:
    """uint8 pixel tensor -> float32 in [-1, 1]."""
    return (np.asarray(img, dtype=np.float32) / 127.5 - 1.0).astype(
        np.float32)


def denormalize_image(x) -> np.ndarray:
    """[-1, 1] float tensor -> float32 pixel values clipped to [0, 255]."""
    return np.clip((np.asarray(x, dtype=np.float32) + 1.0) * 127.5,
                   0.0, 255.0).astype(np.float32)


# --------------------------------------------------------------------------
# wavelet-conv layers


@dataclass
class WeConvParams:
    stem: ConvParams
    lf_convs: list
    hf_convs: list
    gdn: GdnParams
    shortcut: ConvParams
    wavelet: WaveletKind
    wavelet_path: bool = True

    def __post_init__(self):
        if self.lf_convs and self.hf_convs:
            lf_in = self.lf_convs[0].kernel.shape[1]
            hf_in = self.hf_convs[0].kernel.shape[1]
            if hf_in != 3 * lf_in:
                raise ShapeMismatch(
                    f"detail-band conv takes {hf_in} channels, expected "
                    f"3x{lf_in}")
        if self.shortcut.stride != self.stem.stride or \
                self.shortcut.transposed != self.stem.transposed:
            raise ShapeMismatch("shortcut must match stem stride/direction")


def _weconv_eval(x: np.ndarray, p: WeConvParams) -> np.ndarray:
    t = conv2d(x, p.stem)
    if p.wavelet_path:
        if t.shape[-2] < 2 or t.shape[-1] < 2:
            raise DegenerateInput(
                f"stem output {t.shape[-2]}x{t.shape[-1]} too small for a "
                f"DWT level")
        s = dwt2d(t, p.wavelet)
        f1 = s.ll
        for c in p.lf_convs:
            f1 = conv2d(f1, c)
        fh = np.concatenate([s.hl, s.lh, s.hh], axis=0)
        for c in p.hf_convs:
            fh = conv2d(fh, c)
        n = f1.shape[0]
        if fh.shape[0] != 3 * n:
            raise ShapeMismatch(
                f"subband convs produced {fh.shape[0]} detail channels for "
                f"{n} LL channels")
        t = idwt2d(SubbandSet(ll=f1, hl=fh[:n], lh=fh[n:2 * n],
                              hh=fh[2 * n:], wavelet=p.wavelet,
                              src_h=t.shape[-2], src_w=t.shape[-1]))
    u = gdn(t, p.gdn)
    return u + conv2d(x, p.shortcut)


def weconv_forward(x: np.ndarray, p: WeConvParams) -> np.ndarray:
    """Downsampling wavelet-conv layer (stride-2 stem)."""
    if p.stem.transposed:
        raise ShapeMismatch("transposed stem: use iweconv_forward")
    return _weconv_eval(x, p)


def iweconv_forward(x: np.ndarray, p: WeConvParams) -> np.ndarray:
    """Upsampling counterpart (transposed stem, inverse GDN)."""
    if not p.stem.transposed:
        raise ShapeMismatch("non-transposed stem: use weconv_forward")
    return _weconv_eval(x, p)


# --------------------------------------------------------------------------
# latent containers


@dataclass
class LatentPair:
    """LF latent plane plus (optionally) the packed HF planes."""

    y_l: np.ndarray
    y_h: np.ndarray | None

    def __post_init__(self):
        if self.y_h is not None:
            if self.y_h.shape[0] != 3 * self.y_l.shape[0]:
                raise ShapeMismatch(
                    f"HF needs 3x{self.y_l.shape[0]} channels, got "
                    f"{self.y_h.shape[0]}")
            if self.y_h.shape[1:] != self.y_l.shape[1:]:
                raise ShapeMismatch("LF/HF spatial dims disagree")


def pack_hf(hl: np.ndarray, lh: np.ndarray, hh: np.ndarray) -> np.ndarray:
    return np.concatenate([hl, lh, hh], axis=0)


def unpack_hf(y_h: np.ndarray):
    n = y_h.shape[0]
    if n % 3:
        raise ShapeMismatch(f"{n} HF channels not divisible by 3")
    m = n // 3
    return y_h[:m], y_h[m:2 * m], y_h[2 * m:]


@dataclass
class SideInfo:
    """Hyper-decoder outputs feeding the slice networks."""

    l_scale: np.ndarray
    l_mean: np.ndarray
    h_scale: np.ndarray | None = None
    h_mean: np.ndarray | None = None


# --------------------------------------------------------------------------
# manifest layout


def resolve_hp(hyperparams: dict) -> SimpleNamespace:
    def geti(key, default=None):
        v = hyperparams.get(key, default)
        if v is None:
            raise BadShape(f"hyperparams missing {key!r}")
        return int(v)

    n = geti("N")
    m = geti("M")
    k = geti("slices")
    if m % k:
        raise BadShape(f"M={m} not divisible by slices={k}")
    zdim = geti("zdim", 0) or n
    split = bool(geti("split", 1))
    weconv = bool(geti("weconv", 1))
    hidden = geti("hidden", 0)
    return SimpleNamespace(
        n=n, m=m, k=k, zdim=zdim, split=split, weconv=weconv, hidden=hidden,
        wavelet=WaveletKind(geti("wavelet")))


def _weconv_layout(prefix, cin, cout, weconv_path):
    yield f"{prefix}.stem.kernel", (cout, cin, 3, 3)
    yield f"{prefix}.stem.bias", (cout,)
    if weconv_path:
        yield f"{prefix}.lf0.kernel", (cout, cout, 3, 3)
        yield f"{prefix}.lf0.bias", (cout,)
        yield f"{prefix}.hf0.kernel", (3 * cout, 3 * cout, 3, 3)
        yield f"{prefix}.hf0.bias", (3 * cout,)
    yield f"{prefix}.gdn.beta", (cout,)
    yield f"{prefix}.gdn.gamma", (cout, cout)
    yield f"{prefix}.shortcut.kernel", (cout, cin, 1, 1)
    yield f"{prefix}.shortcut.bias", (cout,)


def _resgroup_layout(prefix, c):
    for b in range(3):
        for conv in ("conv0", "conv1"):
            yield f"{prefix}.block{b}.{conv}.kernel", (c, c, 3, 3)
            yield f"{prefix}.block{b}.{conv}.bias", (c,)


def _conv_layout(prefix, cin, cout, k=3):
    yield f"{prefix}.kernel", (cout, cin, k, k)
    yield f"{prefix}.bias", (cout,)


def _slice_net_layout(prefix, cin, hidden, cout):
    for i, (ci, co) in enumerate([(cin, hidden), (hidden, hidden),
                                  (hidden, hidden)]):
        yield from _conv_layout(f"{prefix}.conv{i}", ci, co)
    yield from _conv_layout(f"{prefix}.mu", hidden, cout)
    yield from _conv_layout(f"{prefix}.sigma", hidden, cout)


def codec_layout(hp: SimpleNamespace):
    """Yield (name, shape) for every tensor the codec graph requires."""
    n, m = hp.n, hp.m
    for i, stage in enumerate(("weconv", "res", "weconv", "res",
                               "weconv", "res")):
        cin = 3 if i == 0 else n
        if stage == "weconv":
            yield from _weconv_layout(f"ga.stage{i}", cin, n, hp.weconv)
        else:
            yield from _resgroup_layout(f"ga.stage{i}", n)
    yield from _conv_layout("ga.stage6", n, m)

    yield from _conv_layout("gs.stage0", m, n)
    for i in (1, 3, 5):
        yield from _resgroup_layout(f"gs.stage{i}", n)
    for i in (2, 4):
        yield from _weconv_layout(f"gs.stage{i}", n, n, hp.weconv)
    yield from _weconv_layout("gs.stage6", n, 3, hp.weconv)

    ha_in = 4 * m if hp.split else m
    yield from _conv_layout("ha.stage0", ha_in, n)
    yield from _weconv_layout("ha.stage1", n, n, hp.weconv)
    yield from _conv_layout("ha.stage2", n, hp.zdim)

    yield from _conv_layout("hs.stage0", hp.zdim, n)
    yield from _weconv_layout("hs.stage1", n, n, hp.weconv)
    yield from _conv_layout("hs.head.lscale", n, m)
    yield from _conv_layout("hs.head.lmean", n, m)
    if hp.split:
        yield from _conv_layout("hs.head.hscale", n, 3 * m)
        yield from _conv_layout("hs.head.hmean", n, 3 * m)

    s_l = m // hp.k
    hid_l = hp.hidden or 2 * s_l
    for i in range(hp.k):
        cin = 2 * m + i * s_l
        yield from _slice_net_layout(f"charm.L.slice{i}", cin, hid_l, s_l)
    if hp.split:
        s_h = 3 * m // hp.k
        hid_h = hp.hidden or 2 * s_h
        for i in range(hp.k):
            cin = 2 * (3 * m) + m + i * s_h
            yield from _slice_net_layout(f"charm.H.slice{i}", cin, hid_h,
                                         s_h)


def validate_codec_manifest(m: ModelManifest):
    """Check the manifest holds every graph tensor with the right shape."""
    hp = resolve_hp(m.hyperparams)
    for name, shape in codec_layout(hp):
        if not m.has(name):
            raise MissingTensor(name)
        actual = tuple(m.index[name][0])
        if actual != shape:
            raise BadShape(
                f"tensor {name!r} has shape {actual}, graph expects {shape}")


# --------------------------------------------------------------------------
# graph construction and evaluation


@dataclass
class SliceNetParams:
    convs: list
    mu_head: ConvParams
    sigma_head: ConvParams
    slope: float


class CodecGraph:
    """Runnable codec networks bound to one loaded manifest."""

    def __init__(self, m: ModelManifest):
        self.manifest = m
        self.hp = resolve_hp(m.hyperparams)
        self.wavelet = self.hp.wavelet
        self._conv_cache = {}

    # -- parameter assembly ------------------------------------------------

    def _conv(self, prefix, stride=1, transposed=False) -> ConvParams:
        key = (prefix, stride, transposed)
        if key not in self._conv_cache:
            self._conv_cache[key] = ConvParams(
                kernel=self.manifest.tensor(f"{prefix}.kernel"),
                bias=self.manifest.tensor(f"{prefix}.bias"),
                stride=stride, transposed=transposed)
        return self._conv_cache[key]

    def _conv_list(self, prefix, slot, transposed=False):
        out = []
        i = 0
        while self.manifest.has(f"{prefix}.{slot}{i}.kernel"):
            out.append(self._conv(f"{prefix}.{slot}{i}", 1, False))
            i += 1
        return out

    def _weconv(self, prefix, transposed) -> WeConvParams:
        return WeConvParams(
            stem=self._conv(f"{prefix}.stem", 2, transposed),
            lf_convs=self._conv_list(prefix, "lf"),
            hf_convs=self._conv_list(prefix, "hf"),
            gdn=GdnParams(beta=self.manifest.tensor(f"{prefix}.gdn.beta"),
                          gamma=self.manifest.tensor(f"{prefix}.gdn.gamma"),
                          inverse=transposed),
            shortcut=self._conv(f"{prefix}.shortcut", 2, transposed),
            wavelet=self.wavelet,
            wavelet_path=self.hp.weconv)

    def _resgroup(self, prefix):
        slope = self.manifest.slope(prefix)
        return [ResidualBlockParams(
                    conv0=self._conv(f"{prefix}.block{b}.conv0"),
                    conv1=self._conv(f"{prefix}.block{b}.conv1"),
                    slope=slope)
                for b in range(3)]

    def slice_net(self, origin: str, i: int) -> SliceNetParams:
        prefix = f"charm.{origin}.slice{i}"
        return SliceNetParams(
            convs=[self._conv(f"{prefix}.conv{j}") for j in range(3)],
            mu_head=self._conv(f"{prefix}.mu"),
            sigma_head=self._conv(f"{prefix}.sigma"),
            slope=self.manifest.slope(prefix))

    # -- network evaluation --------------------------------------------

    def analysis(self, x: np.ndarray) -> LatentPair:
        """Normalized [-1,1] image tensor -> latent pair."""
        x = np.ascontiguousarray(x, dtype=np.float32)
        if x.ndim != 3 or x.shape[0] != 3:
            raise ShapeMismatch(f"expected a (3, H, W) image, got {x.shape}")
        h, w = x.shape[1:]
        if h < TILE or w < TILE:
            raise DegenerateInput(
                f"input {h}x{w} smaller than one {TILE}-pixel tile")
        if h % TILE or w % TILE:
            raise DegenerateInput(
                f"input dims must be padded to a multiple of {TILE}")
        for i in range(6):
            if i % 2 == 0:
                x = weconv_forward(x, self._weconv(f"ga.stage{i}", False))
            else:
                for blk in self._resgroup(f"ga.stage{i}"):
                    x = residual_block(x, blk)
        y = conv2d(x, self._conv("ga.stage6", stride=2))
        if not self.hp.split:
            return LatentPair(y_l=y, y_h=None)
        s = dwt2d(y, self.wavelet)
        return LatentPair(y_l=s.ll, y_h=pack_hf(s.hl, s.lh, s.hh))

    def synthesis(self, latents: LatentPair,
                  out_hw: tuple | None = None) -> np.ndarray:
        """Latent pair -> pixel-domain float image (0..255), optionally
        cropped to out_hw."""
        if self.hp.split:
            if latents.y_h is None:
                raise ShapeMismatch("model codes an LF/HF split latent")
            hl, lh, hh = unpack_hf(latents.y_h)
            h2, w2 = latents.y_l.shape[1:]
            y = idwt2d(SubbandSet(ll=latents.y_l, hl=hl, lh=lh, hh=hh,
                                  wavelet=self.wavelet,
                                  src_h=2 * h2, src_w=2 * w2))
        else:
            if latents.y_h is not None:
                raise ShapeMismatch("model codes a single latent plane")
            y = latents.y_l
        x = conv2d(y, self._conv("gs.stage0", 2, transposed=True))
        for i in range(1, 7):
            if i % 2 == 1:
                for blk in self._resgroup(f"gs.stage{i}"):
                    x = residual_block(x, blk)
            else:
                x = iweconv_forward(x, self._weconv(f"gs.stage{i}", True))
        img = denormalize_image(x)
        if out_hw is not None:
            img = img[:, :out_hw[0], :out_hw[1]]
        return img

    def hyper_analysis(self, latents: LatentPair) -> np.ndarray:
        if self.hp.split:
            if latents.y_h is None:
                raise ShapeMismatch("model expects an LF/HF split latent")
            feats = np.concatenate([latents.y_l, latents.y_h], axis=0)
        else:
            feats = latents.y_l
        f = conv2d(feats, self._conv("ha.stage0"))
        f = leaky_relu(f, self.manifest.slope("ha.stage0"))
        f = weconv_forward(f, self._weconv("ha.stage1", False))
        return conv2d(f, self._conv("ha.stage2", stride=2))

    def hyper_synthesis(self, zhat: np.ndarray) -> SideInfo:
        f = conv2d(np.asarray(zhat, dtype=np.float32),
                   self._conv("hs.stage0", 2, transposed=True))
        f = leaky_relu(f, self.manifest.slope("hs.stage0"))
        f = iweconv_forward(f, self._weconv("hs.stage1", True))
        side = SideInfo(
            l_scale=softplus(conv2d(f, self._conv("hs.head.lscale"))),
            l_mean=conv2d(f, self._conv("hs.head.lmean")))
        if self.hp.split:
            side.h_scale = softplus(conv2d(f, self._conv("hs.head.hscale")))
            side.h_mean = conv2d(f, self._conv("hs.head.hmean"))
        return side


# --------------------------------------------------------------------------
# random-weight manifests (tests, demos, ablation sweeps)


def make_random_manifest(path, seed=0, n=8, m=20, slices=5,
                         wavelet=WaveletKind.CDF53, zdim=0, hidden=0,
                         weconv=True, split=True, lambda_index=0):
    """Write a loadable manifest with seeded random weights.

    Kernels are fan-in scaled normals; GDN parameters sit near identity so
    activations stay O(1) through the stacks. Deterministic in all
    arguments.
    """
    hyperparams = {
        "N": n, "M": m, "slices": slices, "wavelet": int(wavelet),
        "lambda_index": lambda_index, "zdim": zdim, "hidden": hidden,
        "weconv": int(weconv), "split": int(split),
    }
    hp = resolve_hp(hyperparams)
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in codec_layout(hp):
        if name.endswith("gdn.beta"):
            t = rng.uniform(0.7, 1.3, size=shape)
        elif name.endswith("gdn.gamma"):
            t = rng.uniform(0.0, 0.02 / shape[0], size=shape)
        elif name.endswith(".bias"):
            t = rng.normal(0.0, 0.01, size=shape)
        elif len(shape) == 4:
            fan_in = shape[1] * shape[2] * shape[3]
            t = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)
        else:
            t = rng.normal(0.0, 0.1, size=shape)
        tensors[name] = t.astype(np.float32)
    return save_manifest(path, tensors, hyperparams)
