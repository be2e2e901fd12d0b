"""Binary watermark container shared by every stage of the pipeline."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import InputError, LengthMismatchError


class BinaryWatermark:
    """Immutable length-``l`` bit sequence with an ``encrypted`` flag.

    Equality and hashing consider the bits only, so an encrypted and a plain
    watermark with the same bit pattern compare equal.  That is what the
    collision checks need.
    """

    __slots__ = ("_bits", "encrypted")

    def __init__(self, bits: Iterable[int] | np.ndarray, encrypted: bool = False):
        arr = np.array(bits, dtype=np.int64).ravel()
        if arr.size == 0:
            raise InputError("watermark must contain at least one bit")
        if not np.isin(arr, (0, 1)).all():
            raise InputError("watermark bits must be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.flags.writeable = False
        self._bits = arr
        self.encrypted = bool(encrypted)

    @classmethod
    def from_string(cls, text: str, encrypted: bool = False) -> "BinaryWatermark":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise InputError(f"not a bit string: {text!r}")
        return cls(np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0"), encrypted)

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    def __len__(self) -> int:
        return int(self._bits.size)

    def __iter__(self):
        return iter(self._bits.tolist())

    def __eq__(self, other):
        if not isinstance(other, BinaryWatermark):
            return NotImplemented
        return len(self) == len(other) and bool(np.array_equal(self._bits, other._bits))

    def __hash__(self):
        return hash(self._bits.tobytes())

    def __str__(self) -> str:
        return (self._bits + ord("0")).tobytes().decode("ascii")

    def __repr__(self) -> str:
        return f"BinaryWatermark('{self}', encrypted={self.encrypted})"

    def hamming(self, other: "BinaryWatermark") -> int:
        if len(self) != len(other):
            raise LengthMismatchError(f"watermark lengths differ: {len(self)} vs {len(other)}")
        return int(np.count_nonzero(self._bits != other._bits))

    def with_flag(self, encrypted: bool) -> "BinaryWatermark":
        return BinaryWatermark(self._bits, encrypted)
