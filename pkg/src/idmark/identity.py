"""Identity-perceptual watermarks.

An identity embedding is projected onto its top-``l`` principal axes, each
projected coordinate is min-max scaled into [0, 1] using the extrema seen on
the training set, and the scaled vector is thresholded at a cutoff ``c``.
The resulting bit string is finally XOR-encrypted with a chaotic keystream.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .chaos import KeyStream, xor_apply
from .errors import InputError, PreconditionError
from .watermark import BinaryWatermark

logger = logging.getLogger(__name__)

MODEL_FORMAT = "idmark.projection"
MODEL_VERSION = 1

# projected ranges narrower than this (relative to the largest range) are degenerate
_DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class IdentityEmbedding:
    identity_id: str
    vector: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.identity_id:
            raise InputError("identity_id must be nonempty")
        vec = np.asarray(self.vector, dtype=np.float64).ravel()
        if vec.size == 0 or not np.isfinite(vec).all():
            raise InputError(f"embedding for {self.identity_id!r} must be a finite, nonempty vector")
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return int(self.vector.size)


@dataclass(frozen=True)
class ProjectionModel:
    """Fitted PCA projection plus the per-dimension scaling range.

    ``components`` holds the principal axes as rows, ordered by decreasing
    explained variance.
    """

    mean: np.ndarray
    components: np.ndarray
    per_dim_min: np.ndarray
    per_dim_max: np.ndarray
    cutoff: float
    explained_variance: np.ndarray

    def __post_init__(self):
        for name in ("mean", "components", "per_dim_min", "per_dim_max", "explained_variance"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        l, d = self.components.shape
        if self.mean.shape != (d,):
            raise InputError(f"mean has shape {self.mean.shape}, expected ({d},)")
        for name in ("per_dim_min", "per_dim_max", "explained_variance"):
            if getattr(self, name).shape != (l,):
                raise InputError(f"{name} must have length {l}")
        if (self.per_dim_min > self.per_dim_max).any():
            raise InputError("per_dim_min exceeds per_dim_max")
        if not 0.0 <= self.cutoff <= 1.0:
            raise PreconditionError(f"cutoff must lie in [0, 1], got {self.cutoff}")

    @property
    def watermark_length(self) -> int:
        return int(self.components.shape[0])

    @property
    def embedding_dim(self) -> int:
        return int(self.components.shape[1])

    @property
    def degenerate_dims(self) -> tuple[int, ...]:
        ranges = self.per_dim_max - self.per_dim_min
        tol = _DEGENERATE_RTOL * max(float(ranges.max(initial=0.0)), 1.0)
        return tuple(int(i) for i in np.flatnonzero(ranges <= tol))

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "watermark_length": self.watermark_length,
            "embedding_dim": self.embedding_dim,
            "cutoff": self.cutoff,
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "per_dim_min": self.per_dim_min.tolist(),
            "per_dim_max": self.per_dim_max.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProjectionModel":
        if doc.get("format") != MODEL_FORMAT:
            raise InputError(f"not a projection model document (format={doc.get('format')!r})")
        if doc.get("version") != MODEL_VERSION:
            raise InputError(f"unsupported projection model version {doc.get('version')!r}")
        try:
            model = cls(
                mean=doc["mean"],
                components=doc["components"],
                per_dim_min=doc["per_dim_min"],
                per_dim_max=doc["per_dim_max"],
                cutoff=float(doc["cutoff"]),
                explained_variance=doc["explained_variance"],
            )
        except KeyError as exc:
            raise InputError(f"projection model missing field {exc}") from None
        if (model.watermark_length, model.embedding_dim) != (doc["watermark_length"], doc["embedding_dim"]):
            raise InputError("declared watermark_length/embedding_dim disagree with stored arrays")
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ProjectionModel":
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise InputError(f"projection model not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"projection model {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)


def _stack(embeddings: Sequence[IdentityEmbedding]) -> np.ndarray:
    dims = {e.dim for e in embeddings}
    if len(dims) > 1:
        raise InputError(f"inconsistent embedding dimensions: {sorted(dims)}")
    return np.vstack([e.vector for e in embeddings])


def fit_projection(embeddings: Sequence[IdentityEmbedding], l: int, c: float = 0.5) -> ProjectionModel:
    """Fit the PCA projection to ``l`` dimensions and record the scaling range."""
    embeddings = list(embeddings)
    if l < 1:
        raise PreconditionError(f"watermark length must be >= 1, got {l}")
    if len(embeddings) < l:
        raise PreconditionError(f"need at least l={l} embeddings, got {len(embeddings)}")
    X = _stack(embeddings)
    n, d = X.shape
    if d < l:
        raise PreconditionError(f"embedding dimension {d} is smaller than watermark length {l}")
    if not 0.0 <= c <= 1.0:
        raise PreconditionError(f"cutoff must lie in [0, 1], got {c}")

    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise PreconditionError("embeddings have zero variance")
    components = vt[:l].copy()
    # fix the sign ambiguity: largest-magnitude coordinate positive
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(l), pivots])
    components *= signs[:, None]
    variance = np.zeros(l)
    k = min(l, s.size)
    variance[:k] = s[:k] ** 2 / max(n - 1, 1)

    projected = centered @ components.T
    model = ProjectionModel(
        mean=mean,
        components=components,
        per_dim_min=projected.min(axis=0),
        per_dim_max=projected.max(axis=0),
        cutoff=float(c),
        explained_variance=variance,
    )
    if model.degenerate_dims:
        logger.warning("projection dimensions %s have zero range; they will scale to 0.5",
                       list(model.degenerate_dims))
    return model


def project_and_scale(model: ProjectionModel, e: IdentityEmbedding | np.ndarray) -> np.ndarray:
    vec = e.vector if isinstance(e, IdentityEmbedding) else np.asarray(e, dtype=np.float64)
    if vec.shape != (model.embedding_dim,):
        raise InputError(f"embedding has dimension {vec.size}, model expects {model.embedding_dim}")
    proj = model.components @ (vec - model.mean)
    span = model.per_dim_max - model.per_dim_min
    degenerate = np.zeros(span.shape, dtype=bool)
    degenerate[list(model.degenerate_dims)] = True
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = (proj - model.per_dim_min) / np.where(degenerate, 1.0, span)
    scaled = np.clip(scaled, 0.0, 1.0)
    scaled[degenerate] = 0.5
    return scaled


def binarize(scaled: Sequence[float] | np.ndarray, c: float) -> BinaryWatermark:
    if not 0.0 <= c <= 1.0:
        raise PreconditionError(f"cutoff must lie in [0, 1], got {c}")
    return BinaryWatermark(np.asarray(scaled, dtype=np.float64) >= c, encrypted=False)


def plain_watermark(model: ProjectionModel, e: IdentityEmbedding) -> BinaryWatermark:
    return binarize(project_and_scale(model, e), model.cutoff)


def generate_watermark(model: ProjectionModel, e: IdentityEmbedding, key: KeyStream) -> BinaryWatermark:
    """Full generator: project, scale, binarize, then encrypt with ``key``."""
    if len(key) != model.watermark_length:
        raise PreconditionError(
            f"key length {len(key)} differs from watermark length {model.watermark_length}")
    return xor_apply(plain_watermark(model, e), key)


# -- embedding files ---------------------------------------------------------

def write_embeddings(path: str | Path, embeddings: Iterable[IdentityEmbedding]) -> None:
    embeddings = list(embeddings)
    if not embeddings:
        raise InputError("no embeddings to write")
    d = embeddings[0].dim
    lines = [f"# d_E={d}"]
    for e in embeddings:
        if e.dim != d:
            raise InputError(f"inconsistent embedding dimensions: {d} vs {e.dim}")
        if "," in e.identity_id or "\n" in e.identity_id:
            raise InputError(f"identity_id {e.identity_id!r} cannot contain commas or newlines")
        lines.append(",".join([e.identity_id, *map(repr, e.vector.tolist())]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_embeddings(path: str | Path) -> list[IdentityEmbedding]:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise InputError(f"embeddings file not found: {path}") from None
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# d_E="):
        raise InputError(f"{path}: missing '# d_E=<n>' header")
    try:
        d = int(lines[0].split("=", 1)[1])
    except ValueError:
        raise InputError(f"{path}: bad header {lines[0]!r}") from None
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        ident, *values = line.split(",")
        if len(values) != d:
            raise InputError(f"{path}:{lineno}: expected {d} values, found {len(values)}")
        try:
            vec = np.array([float(v) for v in values])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
        out.append(IdentityEmbedding(ident.strip(), vec))
    if not out:
        raise InputError(f"{path}: no embeddings")
    return out


def synthesize_embeddings(
    n_identities: int,
    dim: int = 512,
    samples_per_identity: int = 1,
    noise: float = 0.05,
    seed: int = 0,
) -> list[IdentityEmbedding]:
    """Synthetic identity clusters.

    Each identity gets an isotropic random unit-norm center; its samples are
    the center plus Gaussian noise of total norm about ``noise``, renormalised
    to unit length as face-recognition descriptors usually are.
    """
    if n_identities < 1 or dim < 1 or samples_per_identity < 1:
        raise PreconditionError("n_identities, dim and samples_per_identity must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_identities, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    width = len(str(n_identities - 1))
    out = []
    for i, center in enumerate(centers):
        for _ in range(samples_per_identity):
            v = center + rng.standard_normal(dim) * (noise / math.sqrt(dim))
            out.append(IdentityEmbedding(f"id{i:0{width}d}", v / np.linalg.norm(v)))
    return out
