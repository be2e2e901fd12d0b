"""Blind block-DCT watermark codec.

Each watermark bit is written into ``redundancy`` pseudo-randomly chosen
``block_size`` x ``block_size`` luminance blocks.  Inside a block, every
selected zig-zag coefficient is snapped onto a dithered quantisation lattice
of step ``quant_step``: even multiples encode 0, odd multiples encode 1.
Extraction decodes each coefficient's lattice parity and takes a majority
vote per bit.

Images are ``(H, W, 3)`` uint8 RGB arrays.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import cv2
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dctn, idctn

from .errors import CapacityError, InputError, LengthMismatchError, PreconditionError
from .watermark import BinaryWatermark

MIN_SIDE = 64
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

# a coefficient within quant_step / _SETTLE_DIV of its target counts as placed;
# pixel rounding alone moves coefficients by well under that
_SETTLE_DIV = 32.0
_MAX_PASSES = 32


@dataclass(frozen=True)
class CodecConfig:
    block_size: int = 8
    quant_step: float = 118.0
    redundancy: int = 1
    coeff_positions: tuple[int, ...] = (1,)
    assignment_seed: int = 20240101

    def __post_init__(self):
        object.__setattr__(self, "coeff_positions", tuple(int(p) for p in self.coeff_positions))
        if self.block_size < 2:
            raise PreconditionError(f"block_size must be >= 2, got {self.block_size}")
        if not self.quant_step > 0:
            raise PreconditionError(f"quant_step must be positive, got {self.quant_step}")
        if self.redundancy < 1:
            raise PreconditionError(f"redundancy must be >= 1, got {self.redundancy}")
        if not self.coeff_positions:
            raise PreconditionError("coeff_positions must not be empty")
        if len(set(self.coeff_positions)) != len(self.coeff_positions):
            raise PreconditionError("coeff_positions contains duplicates")
        for p in self.coeff_positions:
            if not 0 < p < self.block_size**2:
                raise PreconditionError(
                    f"coefficient index {p} must be an AC zig-zag index in [1, {self.block_size**2 - 1}]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coeff_positions"] = list(self.coeff_positions)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "CodecConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown codec settings: {sorted(unknown)}")
        return cls(**doc)


@lru_cache(maxsize=None)
def zigzag_order(n: int) -> tuple[tuple[int, int], ...]:
    """JPEG zig-zag scan of an ``n`` x ``n`` block as (row, col) pairs."""
    cells = [(i, j) for i in range(n) for j in range(n)]
    return tuple(sorted(cells, key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else -rc[0])))


def check_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
        raise InputError(f"{name} must be an (H, W, 3) array")
    if img.dtype != np.uint8:
        raise InputError(f"{name} must be uint8, got {img.dtype}")
    h, w = img.shape[:2]
    if h < MIN_SIDE or w < MIN_SIDE:
        raise InputError(f"{name} is {w}x{h}; both sides must be >= {MIN_SIDE}")
    return img


def luminance(img: np.ndarray) -> np.ndarray:
    return img.astype(np.float64) @ LUMA_WEIGHTS


def capacity(shape: tuple[int, ...], cfg: CodecConfig) -> int:
    """Number of whole blocks; trailing partial blocks are not used."""
    return (shape[0] // cfg.block_size) * (shape[1] // cfg.block_size)


@dataclass
class _Layout:
    """Bit-to-block assignment and dither for one (image size, l, config)."""

    cfg: CodecConfig
    shape: tuple[int, int]
    n_bits: int
    blocks: np.ndarray = field(init=False)   # (l * R,) block indices, bit-major
    dither: np.ndarray = field(init=False)   # (l * R, K) lattice offsets
    rows: np.ndarray = field(init=False)
    cols: np.ndarray = field(init=False)

    def __post_init__(self):
        cfg = self.cfg
        nb = capacity(self.shape, cfg)
        if nb == 0:
            raise CapacityError(f"image {self.shape[1]}x{self.shape[0]} is smaller than one block")
        need = self.n_bits * cfg.redundancy
        if need > nb:
            raise CapacityError(
                f"watermark needs {self.n_bits} bits x {cfg.redundancy} blocks = {need} blocks, "
                f"image {self.shape[1]}x{self.shape[0]} has {nb} blocks of {cfg.block_size}px")
        rng = np.random.default_rng(cfg.assignment_seed)
        self.blocks = rng.permutation(nb)[:need]
        self.dither = rng.uniform(0.0, 2.0 * cfg.quant_step, size=(need, len(cfg.coeff_positions)))
        zz = zigzag_order(cfg.block_size)
        self.rows = np.array([zz[p][0] for p in cfg.coeff_positions])
        self.cols = np.array([zz[p][1] for p in cfg.coeff_positions])

    def _tiles(self, Y: np.ndarray) -> np.ndarray:
        B = self.cfg.block_size
        ny, nx = self.shape[0] // B, self.shape[1] // B
        grid = Y[:ny * B, :nx * B].reshape(ny, B, nx, B).swapaxes(1, 2).reshape(-1, B, B)
        return grid[self.blocks]

    def coefficients(self, Y: np.ndarray) -> np.ndarray:
        """Selected DCT coefficients of the assigned blocks, shape (l * R, K)."""
        C = dctn(self._tiles(Y), axes=(1, 2), norm="ortho")
        return C[:, self.rows, self.cols]

    def spatial_delta(self, dcoef: np.ndarray) -> np.ndarray:
        """Luminance offset image produced by coefficient changes ``dcoef``."""
        B = self.cfg.block_size
        ny, nx = self.shape[0] // B, self.shape[1] // B
        spec = np.zeros((len(self.blocks), B, B))
        spec[:, self.rows, self.cols] = dcoef
        grid = np.zeros((ny * nx, B, B))
        grid[self.blocks] = idctn(spec, axes=(1, 2), norm="ortho")
        out = np.zeros(self.shape)
        out[:ny * B, :nx * B] = grid.reshape(ny, nx, B, B).swapaxes(1, 2).reshape(ny * B, nx * B)
        return out


def _lattice_target(c: np.ndarray, bits: np.ndarray, dither: np.ndarray, step: float) -> np.ndarray:
    """Nearest point of the dithered lattice whose parity equals ``bits``."""
    u = (c - dither) / step
    k = 2.0 * np.round((u - bits) / 2.0) + bits
    return k * step + dither


def _lattice_parity(c: np.ndarray, dither: np.ndarray, step: float) -> tuple[np.ndarray, np.ndarray]:
    u = (c - dither) / step
    k = np.round(u)
    parity = np.mod(k, 2).astype(np.uint8)
    confidence = 1.0 - 2.0 * np.abs(u - k)
    return parity, confidence


def embed(img: np.ndarray, m: BinaryWatermark, cfg: CodecConfig | None = None) -> np.ndarray:
    """Return a watermarked copy of ``img`` carrying the bits of ``m``.

    Only the luminance of assigned blocks changes; the same offset is added
    to all three channels.  Rounding and clipping can push a coefficient off
    its lattice point, so the embedding is re-applied to the quantised result
    until every coefficient has settled.
    """
    cfg = cfg or CodecConfig()
    check_image(img)
    layout = _Layout(cfg, img.shape[:2], len(m))
    bits = np.repeat(m.bits.astype(np.float64), cfg.redundancy)[:, None]
    bits = np.broadcast_to(bits, layout.dither.shape)
    step = cfg.quant_step

    base = img.astype(np.float64)
    offset = np.zeros(img.shape[:2])
    out = img
    coeffs = layout.coefficients(luminance(img))
    targets = _lattice_target(coeffs, bits, layout.dither, step)
    gain = np.ones_like(coeffs)
    requested = np.zeros_like(coeffs)
    for _ in range(_MAX_PASSES):
        miss = coeffs - targets
        pending = np.abs(miss) > step / _SETTLE_DIV
        if not pending.any():
            break
        requested = np.where(pending, -miss / gain, 0.0)
        offset += layout.spatial_delta(requested)
        out = np.clip(np.round(base + offset[..., None]), 0, 255).astype(np.uint8)
        before, coeffs = coeffs, layout.coefficients(luminance(out))
        # small corrections are dominated by rounding; don't learn from them
        moved = np.abs(requested) > step / 8
        achieved = np.where(moved, (coeffs - before) / np.where(moved, requested, 1.0), 1.0)
        # clipping absorbs part of each correction; compensate next pass
        gain = np.where(moved, np.clip(achieved, 0.05, 1.0), gain)
        stalled = moved & (achieved < 0.05)
        # saturated pixels block this direction: use the same-parity
        # lattice point on the other side of the coefficient
        targets = np.where(stalled, targets - np.sign(requested) * 2.0 * step, targets)
    return out


def extract(img: np.ndarray, cfg: CodecConfig | None = None, length: int = 128) -> BinaryWatermark:
    """Recover ``length`` bits by per-bit majority vote over the lattice decodes.

    Ties (possible with an even number of votes) go to the side with the
    larger summed decoding confidence.
    """
    cfg = cfg or CodecConfig()
    check_image(img)
    layout = _Layout(cfg, img.shape[:2], length)
    parity, confidence = _lattice_parity(layout.coefficients(luminance(img)), layout.dither,
                                         cfg.quant_step)
    votes = parity.reshape(length, -1)
    soft = np.where(parity == 1, confidence, -confidence).reshape(length, -1).sum(axis=1)
    ones = votes.sum(axis=1).astype(np.int64)
    n = votes.shape[1]
    bits = np.where(2 * ones == n, soft > 0, 2 * ones > n)
    return BinaryWatermark(bits.astype(np.uint8), encrypted=True)


# -- quality metrics -----------------------------------------------------------

def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise LengthMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB over all channels; ``math.inf`` for identical images."""
    _same_shape(a, b)
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(255.0**2 / mse))


def ssim(a: np.ndarray, b: np.ndarray, window: int = 8) -> float:
    """Mean SSIM of the luminance over all ``window`` x ``window`` sliding windows."""
    _same_shape(a, b)
    if a.shape[0] < window or a.shape[1] < window:
        raise InputError(f"images must be at least {window}x{window}")
    x = sliding_window_view(luminance(a) if a.ndim == 3 else a.astype(np.float64), (window, window))
    y = sliding_window_view(luminance(b) if b.ndim == 3 else b.astype(np.float64), (window, window))
    mx = x.mean(axis=(-2, -1))
    my = y.mean(axis=(-2, -1))
    vx = x.var(axis=(-2, -1))
    vy = y.var(axis=(-2, -1))
    cov = (x * y).mean(axis=(-2, -1)) - mx * my
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2
    s = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2))
    return float(s.mean())


# -- image files ---------------------------------------------------------------

def load_image(path: str | Path) -> np.ndarray:
    data = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if data is None:
        raise InputError(f"cannot read image: {path}")
    return np.ascontiguousarray(data[..., ::-1])


def save_image(path: str | Path, img: np.ndarray) -> None:
    path = Path(path)
    if path.suffix.lower() != ".png":
        raise InputError(f"watermarked images must be written as PNG, got {path.name}")
    if not cv2.imwrite(str(path), np.ascontiguousarray(img[..., ::-1])):
        raise InputError(f"cannot write image: {path}")
