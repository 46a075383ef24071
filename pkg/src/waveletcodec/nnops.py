"""Deterministic inference primitives: conv2d (plain and transposed),
LeakyReLU, GDN/IGDN, residual blocks.

Everything operates on (C, H, W) float32 arrays. Convolutions accumulate
per output element in a fixed loop order inside a single-threaded numba
kernel, so results are bit-identical regardless of how many BLAS/OMP
threads the host process has configured.

Sizing rules (stride 2, odd kernel k, replicate padding floor(k/2)):
forward conv maps H -> ceil(H/2); transposed conv maps H -> exactly 2H by
computing the full scatter output of length 2(H-1)+k and cropping
floor((k-2)/2) rows/cols at the top/left and the rest at the bottom/right.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import NumericalError, ShapeMismatch


@dataclass
class ConvParams:
    """Weights of one convolution layer.

    kernel has shape (out_ch, in_ch, k, k) for both plain and transposed
    layers; a transposed layer scatters its input through the kernel
    (output[s*i + a] accumulates input[i] * kernel[..., a]).
    """

    kernel: np.ndarray
    bias: np.ndarray
    stride: int = 1
    transposed: bool = False

    def __post_init__(self):
        self.kernel = np.ascontiguousarray(self.kernel, dtype=np.float32)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float32)
        if self.kernel.ndim != 4 or self.kernel.shape[-1] != self.kernel.shape[-2]:
            raise ShapeMismatch(f"bad kernel shape {self.kernel.shape}")
        if self.kernel.shape[-1] % 2 != 1:
            raise ShapeMismatch("kernel size must be odd")
        if self.stride not in (1, 2):
            raise ShapeMismatch(f"stride must be 1 or 2, got {self.stride}")
        if self.bias.shape != (self.kernel.shape[0],):
            raise ShapeMismatch("bias length must equal out_ch")


@dataclass
class GdnParams:
    """Generalized divisive normalization parameters.

    beta is clamped to >= 1e-6 and gamma to >= 0 on construction, the
    usual reparameterization bounds.
    """

    beta: np.ndarray
    gamma: np.ndarray
    inverse: bool = False

    beta_min: float = field(default=1e-6, repr=False)

    def __post_init__(self):
        self.beta = np.maximum(
            np.asarray(self.beta, dtype=np.float32), self.beta_min)
        self.gamma = np.maximum(
            np.asarray(self.gamma, dtype=np.float32), 0.0)
        c = self.beta.shape[0]
        if self.gamma.shape != (c, c):
            raise ShapeMismatch(
                f"gamma must be ({c},{c}), got {self.gamma.shape}")


@njit(cache=True)
def _conv_kernel(x, w, bias, stride, out):  # pragma: no cover - jitted
    co, ci, k, _ = w.shape
    ho, wo = out.shape[1], out.shape[2]
    for o in range(co):
        for oy in range(ho):
            for ox in range(wo):
                acc = 0.0
                for i in range(ci):
                    for ky in range(k):
                        for kx in range(k):
                            acc += x[i, oy * stride + ky,
                                     ox * stride + kx] * w[o, i, ky, kx]
                out[o, oy, ox] = np.float32(acc) + bias[o]


def _replicate_pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (pad, pad), (pad, pad)), mode="edge")


def conv2d(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Apply one convolution layer to a (C, H, W) float32 tensor."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected (C, H, W), got {x.shape}")
    if x.shape[0] != p.kernel.shape[1]:
        raise ShapeMismatch(
            f"input has {x.shape[0]} channels, kernel expects "
            f"{p.kernel.shape[1]}")
    if p.transposed:
        return _tconv(x, p)
    k = p.kernel.shape[-1]
    pad = k // 2
    xp = np.ascontiguousarray(_replicate_pad(x, pad))
    _, h, w = x.shape
    ho = (h - 1) // p.stride + 1
    wo = (w - 1) // p.stride + 1
    out = np.empty((p.kernel.shape[0], ho, wo), dtype=np.float32)
    _conv_kernel(xp, p.kernel, p.bias, p.stride, out)
    return out


def _tconv(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Transposed conv as zero-stuffing + stride-1 correlation with the
    spatially flipped kernel, then symmetric crop to (2H, 2W)."""
    if p.stride != 2:
        raise ShapeMismatch("transposed convolution requires stride 2")
    c, h, w = x.shape
    k = p.kernel.shape[-1]
    if k == 1:
        # pure scatter: even positions get the 1x1 channel mix, the odd
        # row/col that the scatter never reaches carries just the bias
        out = np.empty((p.kernel.shape[0], 2 * h, 2 * w), dtype=np.float32)
        out[:] = p.bias[:, None, None]
        mix = np.einsum("oi,ihw->ohw", p.kernel[:, :, 0, 0], x,
                        optimize=False)
        out[:, 0::2, 0::2] = mix + p.bias[:, None, None]
        return out
    # scatter target: positions 2i..2i+k-1; full output 2(n-1)+k
    stuffed = np.zeros((c, 2 * h - 1 + 2 * (k - 1), 2 * w - 1 + 2 * (k - 1)),
                       dtype=np.float32)
    stuffed[:, k - 1:k + 2 * h - 2:2, k - 1:k + 2 * w - 2:2] = x
    flipped = np.ascontiguousarray(p.kernel[:, :, ::-1, ::-1])
    full_h = 2 * (h - 1) + k
    full_w = 2 * (w - 1) + k
    out = np.empty((p.kernel.shape[0], full_h, full_w), dtype=np.float32)
    _conv_kernel(stuffed, flipped, p.bias, 1, out)
    top = (k - 2) // 2
    return np.ascontiguousarray(out[:, top:top + 2 * h, top:top + 2 * w])


def leaky_relu(x: np.ndarray, slope: float = 0.01) -> np.ndarray:
    if not 0.0 < slope < 1.0:
        raise ValueError(f"slope must be in (0, 1), got {slope}")
    x = np.asarray(x, dtype=np.float32)
    return np.maximum(x, np.float32(slope) * x)


def gdn(x: np.ndarray, p: GdnParams) -> np.ndarray:
    """Divisive normalization: y_i = x_i / sqrt(beta_i + sum_j g_ij x_j^2).

    With p.inverse the division becomes a multiplication (the standard
    decoder-side form, using the layer's own parameters).
    """
    x = np.asarray(x, dtype=np.float32)
    if x.shape[0] != p.beta.shape[0]:
        raise ShapeMismatch(
            f"{x.shape[0]} channels vs {p.beta.shape[0]} GDN params")
    # einsum keeps the channel reduction single-threaded and fixed-order
    pool = np.einsum("ij,jhw->ihw", p.gamma, x * x, optimize=False)
    norm = np.sqrt(pool + p.beta[:, None, None])
    out = x * norm if p.inverse else x / norm
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite value in GDN output")
    return out.astype(np.float32)


def gdn_inverse_exact(y: np.ndarray, p: GdnParams) -> np.ndarray:
    """Exact algebraic inverse of the forward GDN with the same params.

    Writing u_j = beta_j + sum_k g_jk x_k^2 and using x_j^2 = y_j^2 u_j,
    u solves the linear system (I - Gamma diag(y^2)) u = beta per spatial
    site; then x = y * sqrt(u). Diagnostic tool, not a codec-path op.
    """
    y = np.asarray(y, dtype=np.float64)
    c, h, w = y.shape
    g = p.gamma.astype(np.float64)
    beta = p.beta.astype(np.float64)
    ysq = (y * y).reshape(c, -1)                       # (C, S)
    # per-site system matrices (S, C, C)
    mats = np.eye(c)[None, :, :] - g[None, :, :] * \
        ysq.T[:, None, :]
    rhs = np.broadcast_to(beta[:, None], (h * w, c, 1))
    u = np.linalg.solve(mats, rhs)[..., 0]
    x = y.reshape(c, -1) * np.sqrt(u.T)
    return x.reshape(c, h, w).astype(np.float32)


@dataclass
class ResidualBlockParams:
    conv0: ConvParams
    conv1: ConvParams
    slope: float = 0.01


def residual_block(x: np.ndarray, p: ResidualBlockParams) -> np.ndarray:
    """conv 3x3 -> LeakyReLU -> conv 3x3, plus identity shortcut."""
    if p.conv0.stride != 1 or p.conv1.stride != 1:
        raise ShapeMismatch("residual blocks require stride 1")
    branch = conv2d(leaky_relu(conv2d(x, p.conv0), p.slope), p.conv1)
    if branch.shape != x.shape:
        raise ShapeMismatch(
            f"branch shape {branch.shape} != input shape {x.shape}")
    return x + branch
