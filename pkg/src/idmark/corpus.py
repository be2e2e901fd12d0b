"""Deterministic synthetic test images.

Images follow a 1/f amplitude spectrum (the usual statistical model of
natural scenes) with a few soft-edged elliptical regions layered on top, so
they have both smooth areas and edges.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .codec import load_image


def _pink_field(rng: np.random.Generator, size: int) -> np.ndarray:
    f = np.fft.fftfreq(size)
    radius = np.hypot(*np.meshgrid(f, f))
    radius[0, 0] = 1.0
    phase = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    field = np.real(np.fft.ifft2(phase / radius))
    return (field - field.mean()) / field.std()


def synth_image(rng: np.random.Generator, size: int = 256) -> np.ndarray:
    lum = _pink_field(rng, size)
    img = np.stack([lum + 0.3 * _pink_field(rng, size), lum, lum + 0.3 * _pink_field(rng, size)], axis=-1)
    img = 128.0 + 40.0 * img
    yy, xx = np.mgrid[:size, :size]
    for _ in range(3):
        cx, cy = rng.uniform(0, size, 2)
        a, b = rng.uniform(size / 10, size / 3, 2)
        inside = ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2
        weight = np.clip(1.5 - inside, 0.0, 1.0)[..., None]
        img += weight * rng.uniform(-50, 50, 3)
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def synth_corpus(n: int, size: int = 256, seed: int = 0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [synth_image(rng, size) for _ in range(n)]


def load_corpus(directory: str | Path) -> list[np.ndarray]:
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in {".png", ".jpg", ".jpeg"})
    return [load_image(p) for p in paths]
