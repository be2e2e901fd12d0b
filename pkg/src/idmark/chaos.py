"""Logistic-map keystream and XOR watermark encryption.

The keystream is ``k_i = floor((x_i * p**q) mod 2)`` where ``x_i`` iterates
``x <- r * x * (1 - x)`` from ``x0``.  Iteration happens in IEEE-754 double
precision with the product evaluated as ``(r * x) * (1 - x)``; chaotic orbits
amplify rounding differences, so that order is part of the key definition.
The scaling and ``mod 2`` are then done exactly on each double's rational value.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError, PreconditionError
from .watermark import BinaryWatermark

CHAOTIC_REGIME = (3.57, 4.0)

# products x * p**q stay exact-ish only while p**q fits a double mantissa
_MAX_EXACT_INT = 2**53


class NonChaoticWarning(UserWarning):
    """Parameters lie outside the chaotic regime or hit a fixed point."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class ChaoticParams:
    x0: float
    r: float
    p: int
    q: int
    length: int

    def __post_init__(self):
        if not 0.0 <= self.x0 <= 1.0:
            raise PreconditionError(f"x0 must lie in [0, 1], got {self.x0}")
        if not (is_prime(self.p) and is_prime(self.q)):
            raise PreconditionError(f"p and q must be prime, got p={self.p}, q={self.q}")
        if self.length < 1:
            raise PreconditionError(f"key length must be >= 1, got {self.length}")

    def __repr__(self) -> str:
        # keep the secret constants out of logs and tracebacks
        return f"ChaoticParams(length={self.length}, <redacted>)"

    @property
    def degenerate(self) -> bool:
        return self.x0 in (0.0, 1.0) or self.r == 0.0

    @property
    def chaotic(self) -> bool:
        lo, hi = CHAOTIC_REGIME
        return not self.degenerate and lo < self.r <= hi


@dataclass(frozen=True)
class KeyStream:
    bits: tuple[int, ...]

    def __post_init__(self):
        if not self.bits or any(b not in (0, 1) for b in self.bits):
            raise PreconditionError("key stream must be a nonempty 0/1 sequence")

    def __len__(self) -> int:
        return len(self.bits)

    @classmethod
    def zeros(cls, length: int) -> "KeyStream":
        return cls((0,) * length)


def logistic_sequence(params: ChaoticParams) -> list[float]:
    """Return ``x_1 .. x_l`` (``x0`` itself is excluded)."""
    if params.degenerate:
        warnings.warn("logistic map started at a fixed point; sequence is not chaotic",
                      NonChaoticWarning, stacklevel=2)
    elif not params.chaotic:
        warnings.warn(f"r={params.r} is outside the chaotic regime {CHAOTIC_REGIME}",
                      NonChaoticWarning, stacklevel=2)
    x = float(params.x0)
    r = float(params.r)
    out = []
    for _ in range(params.length):
        x = r * x * (1.0 - x)
        out.append(x)
    return out


def derive_key(params: ChaoticParams) -> KeyStream:
    scale = params.p**params.q
    if scale > _MAX_EXACT_INT:
        raise PreconditionError(
            f"p**q = {scale} exceeds 2**53; key bits would come from below float64 resolution")
    bits = []
    for x in logistic_sequence(params):
        # exact floor(x * p**q) mod 2; a float product could round across an integer
        num, den = x.as_integer_ratio()
        bits.append((num * scale // den) % 2)
    return KeyStream(tuple(bits))


def xor_apply(wm: BinaryWatermark, key: KeyStream) -> BinaryWatermark:
    """XOR ``wm`` with ``key``; the result carries the opposite ``encrypted`` flag."""
    if len(wm) != len(key):
        raise LengthMismatchError(f"watermark has {len(wm)} bits but key has {len(key)}")
    out = np.bitwise_xor(wm.bits, np.asarray(key.bits, dtype=np.uint8))
    return BinaryWatermark(out, encrypted=not wm.encrypted)


encrypt = xor_apply
decrypt = xor_apply
