"""Deterministic synthetic photographs for sweeps and self-tests.

Real test sets cannot ship with the code, so the evaluation harness
draws images with the two statistics the codec actually exploits: a
power-law (roughly 1/f) radial spectrum, which gives natural-looking
multi-scale detail, and a handful of soft-edged objects, which give the
localized discontinuities wavelets are good at. Every image is a pure
function of its seed.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInput

_SPECTRAL_ALPHA = 1.1  # amplitude falloff exponent of the random field


def _spectral_field(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Zero-mean random field with a 1/f^alpha amplitude spectrum."""
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    radius = np.hypot(fy, fx)
    radius[0, 0] = 1.0  # DC handled separately
    spectrum = (rng.standard_normal((h, radius.shape[1]))
                + 1j * rng.standard_normal((h, radius.shape[1])))
    spectrum /= radius ** _SPECTRAL_ALPHA
    spectrum[0, 0] = 0.0
    field = np.fft.irfft2(spectrum, s=(h, w))
    return field / max(np.abs(field).max(), 1e-12)


def _soft_disc(h, w, cy, cx, radius, softness):
    yy = np.arange(h, dtype=np.float64)[:, None]
    xx = np.arange(w, dtype=np.float64)[None, :]
    d = np.hypot(yy - cy, xx - cx)
    t = np.clip((d - radius) / softness, -60.0, 60.0)
    return 1.0 / (1.0 + np.exp(t))


def natural_image(seed: int, h: int = 384, w: int = 512) -> np.ndarray:
    """Synthesize an (h, w, 3) uint8 image from a seed."""
    if h < 8 or w < 8:
        raise DegenerateInput(f"image dims too small: {h}x{w}")
    rng = np.random.default_rng(seed)
    luma = _spectral_field(rng, h, w)
    chroma_a = _spectral_field(rng, h, w)
    chroma_b = _spectral_field(rng, h, w)

    objects = np.zeros((h, w))
    for _ in range(rng.integers(4, 9)):
        disc = _soft_disc(h, w,
                          cy=rng.uniform(0, h), cx=rng.uniform(0, w),
                          radius=rng.uniform(0.05, 0.25) * min(h, w),
                          softness=rng.uniform(0.5, 4.0))
        objects += rng.uniform(-0.5, 0.5) * disc

    base = 0.8 * luma + objects
    base -= base.mean()
    base /= max(np.abs(base).max(), 1e-12)

    channels = [base + 0.25 * chroma_a,
                base,
                base + 0.25 * chroma_b]
    img = np.stack(channels, axis=-1)
    img -= img.min()
    img /= max(img.max(), 1e-12)
    return np.round(8.0 + 239.0 * img).astype(np.uint8)


def write_corpus(directory, count: int = 3, seed: int = 0,
                 h: int = 384, w: int = 512) -> list:
    """Write `count` seeded PNG images into a directory; returns paths."""
    from .container import save_image  # local import: avoids a cycle

    if count < 1:
        raise DegenerateInput("corpus needs at least one image")
    import os
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i in range(count):
        path = os.path.join(directory, f"synth{i:02d}.png")
        save_image(natural_image(seed + i, h, w), path)
        paths.append(path)
    return paths
