"""Common image manipulations and the simulated face-swap channel.

Parameter conventions:

* ``dropout(ratio)`` replaces a ``ratio`` fraction of pixels with the
  corresponding pixels of the clean, unwatermarked original.
* ``resize(ratio)`` shrinks each side by ``ratio`` (to ``1 - ratio`` of its
  length) with bilinear interpolation and scales back up, so larger ratios
  are harsher, matching the difficulty ordering of the presets.
* ``gaussian_noise(mean, std)`` is expressed on the [0, 1] pixel scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import cv2
import numpy as np

from .errors import InputError, LengthMismatchError, PreconditionError
from .watermark import BinaryWatermark

PARAMS = {
    "dropout": ("ratio",),
    "resize": ("ratio",),
    "jpeg": ("quality",),
    "gaussian_noise": ("mean", "std"),
    "salt_pepper": ("ratio",),
    "gaussian_blur": ("sigma", "kernel"),
    "median_blur": ("kernel",),
}
FAMILIES = tuple(PARAMS)
DIFFICULTIES = ("easy", "regular", "hard")


def _packaged_presets() -> dict:
    doc = json.loads(resources.files("idmark").joinpath("default_config.json").read_text())
    return {name: {kind: tuple(v) for kind, v in table.items()} for name, table in doc["presets"].items()}


# easy / regular / hard parameter tuples, as shipped in default_config.json
DEFAULT_PRESETS = _packaged_presets()


def _odd_kernel(k: float) -> None:
    if k != int(k) or k < 1 or int(k) % 2 == 0:
        raise PreconditionError(f"kernel size must be an odd integer >= 1, got {k}")


@dataclass(frozen=True)
class ManipulationSpec:
    kind: str
    params: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PARAMS:
            raise PreconditionError(f"unknown manipulation {self.kind!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "params", tuple(self.params))
        names = PARAMS[self.kind]
        if len(self.params) != len(names):
            raise PreconditionError(f"{self.kind} takes parameters {names}, got {self.params}")
        p = dict(zip(names, self.params))
        if "ratio" in p and not 0.0 <= p["ratio"] <= 1.0:
            raise PreconditionError(f"{self.kind} ratio must lie in [0, 1], got {p['ratio']}")
        if self.kind == "resize" and p["ratio"] >= 1.0:
            raise PreconditionError("resize ratio must be < 1 (the image cannot shrink to nothing)")
        if "quality" in p and (p["quality"] != int(p["quality"]) or not 1 <= p["quality"] <= 100):
            raise PreconditionError(f"jpeg quality must be an integer in [1, 100], got {p['quality']}")
        if "std" in p and p["std"] < 0:
            raise PreconditionError(f"noise std must be >= 0, got {p['std']}")
        if "sigma" in p and p["sigma"] < 0:
            raise PreconditionError(f"blur sigma must be >= 0, got {p['sigma']}")
        if "kernel" in p:
            _odd_kernel(p["kernel"])

    @property
    def named_params(self) -> dict[str, float]:
        return dict(zip(PARAMS[self.kind], self.params))

    def label(self) -> str:
        return ",".join(f"{v:g}" for v in self.params)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.named_params, "seed": self.seed}

    @classmethod
    def from_dict(cls, doc: dict) -> "ManipulationSpec":
        doc = dict(doc)
        kind = doc.pop("kind", None)
        if kind not in PARAMS:
            raise InputError(f"unknown manipulation kind {kind!r}")
        seed = int(doc.pop("seed", 0))
        try:
            params = tuple(doc.pop(name) for name in PARAMS[kind])
        except KeyError as exc:
            raise InputError(f"{kind} needs parameter {exc}") from None
        if doc:
            raise InputError(f"unexpected {kind} parameters: {sorted(doc)}")
        return cls(kind, params, seed)


def preset(difficulty: str, table: dict | None = None, seed: int = 0) -> list[ManipulationSpec]:
    """All seven manipulations at the given difficulty."""
    table = DEFAULT_PRESETS if table is None else table
    if difficulty not in table:
        raise PreconditionError(f"unknown preset {difficulty!r}; expected one of {sorted(table)}")
    return [ManipulationSpec(kind, tuple(params), seed) for kind, params in table[difficulty].items()]


def _round_clip(x: np.ndarray) -> np.ndarray:
    return np.clip(np.round(x), 0, 255).astype(np.uint8)


def _pick_pixels(rng: np.random.Generator, shape: tuple[int, int], ratio: float) -> np.ndarray:
    n = shape[0] * shape[1]
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=int(round(ratio * n)), replace=False)] = True
    return mask.reshape(shape)


def apply(img: np.ndarray, original: np.ndarray | None, spec: ManipulationSpec) -> np.ndarray:
    """Apply one manipulation; ``original`` is only read by dropout."""
    p = spec.named_params
    rng = np.random.default_rng(spec.seed)
    h, w = img.shape[:2]
    kind = spec.kind

    if kind == "dropout":
        if original is None or original.shape != img.shape:
            raise LengthMismatchError("dropout needs the clean original at the same size")
        out = img.copy()
        mask = _pick_pixels(rng, (h, w), p["ratio"])
        out[mask] = original[mask]
        return out

    if kind == "resize":
        if p["ratio"] == 0:
            return img.copy()
        scale = 1.0 - p["ratio"]
        small = cv2.resize(img, (max(1, round(w * scale)), max(1, round(h * scale))),
                           interpolation=cv2.INTER_LINEAR)
        return cv2.resize(small, (w, h), interpolation=cv2.INTER_LINEAR)

    if kind == "jpeg":
        ok, buf = cv2.imencode(".jpg", np.ascontiguousarray(img[..., ::-1]),
                               [cv2.IMWRITE_JPEG_QUALITY, int(p["quality"])])
        if not ok:
            raise RuntimeError("JPEG encoding failed")
        return np.ascontiguousarray(cv2.imdecode(buf, cv2.IMREAD_COLOR)[..., ::-1])

    if kind == "gaussian_noise":
        if p["std"] == 0 and p["mean"] == 0:
            return img.copy()
        noise = rng.normal(p["mean"] * 255.0, p["std"] * 255.0, img.shape)
        return _round_clip(img.astype(np.float64) + noise)

    if kind == "salt_pepper":
        out = img.copy()
        mask = _pick_pixels(rng, (h, w), p["ratio"])
        salt = rng.random(int(mask.sum())) < 0.5
        out[mask] = np.where(salt[:, None], 255, 0).astype(np.uint8)
        return out

    if kind == "gaussian_blur":
        k = int(p["kernel"])
        if k == 1:
            return img.copy()
        return cv2.GaussianBlur(img, (k, k), p["sigma"])

    if kind == "median_blur":
        k = int(p["kernel"])
        if k == 1:
            return img.copy()
        return cv2.medianBlur(img, k)

    raise AssertionError(kind)


# -- face-swap stand-in --------------------------------------------------------

@dataclass(frozen=True)
class SwapChannelSpec:
    """Binary symmetric channel used in place of a real face-swap model.

    ``bit_flip_rate`` is the per-bit error probability of watermark recovery
    after swapping.
    """

    bit_flip_rate: float = 0.05
    swapped_identity: str = ""
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.bit_flip_rate <= 0.5:
            raise PreconditionError(f"bit_flip_rate must lie in [0, 0.5], got {self.bit_flip_rate}")


def swap_channel(m_recovered_clean: BinaryWatermark, spec: SwapChannelSpec) -> BinaryWatermark:
    rng = np.random.default_rng(spec.seed)
    flips = rng.random(len(m_recovered_clean)) < spec.bit_flip_rate
    return BinaryWatermark(m_recovered_clean.bits ^ flips.astype(np.uint8),
                           encrypted=m_recovered_clean.encrypted)
