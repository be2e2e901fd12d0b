"""Scoring: bit accuracy, consistency-based detection, AUC and collision checks."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import InputError, LengthMismatchError, PreconditionError
from .watermark import BinaryWatermark

DEFAULT_THRESHOLD = 0.75


def bit_accuracy(m_rec: BinaryWatermark, m: BinaryWatermark) -> float:
    """Fraction of agreeing bits, ``(l - hamming) / l``."""
    return (len(m) - m_rec.hamming(m)) / len(m)


@dataclass(frozen=True)
class DetectionReport:
    matching_rate: float
    verdict: str
    threshold: float
    recovered: BinaryWatermark
    content_watermark: BinaryWatermark

    @property
    def is_real(self) -> bool:
        return self.verdict == "real"

    def to_dict(self) -> dict:
        return {
            "matching_rate": self.matching_rate,
            "verdict": self.verdict,
            "threshold": self.threshold,
            "recovered": str(self.recovered),
            "content_watermark": str(self.content_watermark),
        }


def detect(m_rec: BinaryWatermark, m_content: BinaryWatermark,
           threshold: float = DEFAULT_THRESHOLD) -> DetectionReport:
    """Call an image fake when its recovered watermark disagrees with its content.

    Both watermarks must be in the same domain (both encrypted with the same
    key, or both plain); the matching rate is identical either way.
    """
    if not 0.5 < threshold <= 1.0:
        raise PreconditionError(f"threshold must lie in (0.5, 1], got {threshold}")
    score = bit_accuracy(m_rec, m_content)
    return DetectionReport(
        matching_rate=score,
        verdict="real" if score >= threshold else "fake",
        threshold=threshold,
        recovered=m_rec,
        content_watermark=m_content,
    )


def roc_auc(real_scores: Sequence[float], fake_scores: Sequence[float]) -> float:
    """Area under the ROC curve via the Mann-Whitney rank sum (ties count half)."""
    real = np.asarray(real_scores, dtype=np.float64)
    fake = np.asarray(fake_scores, dtype=np.float64)
    if real.size == 0 or fake.size == 0:
        raise InputError("roc_auc needs at least one real and one fake score")
    ranks = rankdata(np.concatenate([real, fake]))
    u = ranks[: real.size].sum() - real.size * (real.size + 1) / 2.0
    return float(u / (real.size * fake.size))


@dataclass
class CollisionReport:
    identity_count: int
    watermark_count: int
    colliding_pairs: list[tuple[str, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.colliding_pairs

    def to_dict(self) -> dict:
        return {
            "identity_count": self.identity_count,
            "watermark_count": self.watermark_count,
            "colliding_pairs": [list(p) for p in self.colliding_pairs],
            "passed": self.passed,
        }


def collision_check(watermarks: Mapping[str, Iterable[BinaryWatermark]]) -> CollisionReport:
    """Find every pair of distinct identities sharing an identical watermark."""
    owners: dict[BinaryWatermark, set[str]] = defaultdict(set)
    length = None
    count = 0
    for identity, marks in watermarks.items():
        for wm in marks:
            if length is None:
                length = len(wm)
            elif len(wm) != length:
                raise LengthMismatchError(
                    f"watermark of {identity!r} has {len(wm)} bits, expected {length}")
            owners[wm].add(identity)
            count += 1
    pairs = set()
    for ids in owners.values():
        if len(ids) > 1:
            ordered = sorted(ids)
            pairs.update((a, b) for i, a in enumerate(ordered) for b in ordered[i + 1:])
    return CollisionReport(len(watermarks), count, sorted(pairs))
