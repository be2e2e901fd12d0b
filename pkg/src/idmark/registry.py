"""Append-only identity <-> watermark registry used for source tracing.

File format, one record per line::

    identity_id<TAB>bitstring<TAB>image_ref<TAB>unix_seconds

Records are appended and fsynced before ``register`` returns.  A torn final
line (crash during a write) is skipped on load and dropped by ``compact``.
Writers serialise on an exclusive ``flock``; each writer first replays any
lines other processes appended since it last looked.
"""

from __future__ import annotations

import fcntl
import logging
import os
import tempfile
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CollisionError, EmptyRegistryError, InputError, LengthMismatchError, RegistryError
from .watermark import BinaryWatermark

logger = logging.getLogger(__name__)

_FORBIDDEN = ("\t", "\n", "\r")


@dataclass(frozen=True)
class RegistryRecord:
    identity_id: str
    watermark: BinaryWatermark
    image_ref: str = ""
    created_at: int = field(default_factory=lambda: int(time.time()))

    def __post_init__(self):
        if not self.identity_id:
            raise InputError("identity_id must be nonempty")
        for name in ("identity_id", "image_ref"):
            if any(ch in getattr(self, name) for ch in _FORBIDDEN):
                raise InputError(f"{name} may not contain tabs or newlines")

    def to_line(self) -> str:
        return f"{self.identity_id}\t{self.watermark}\t{self.image_ref}\t{self.created_at}\n"

    @classmethod
    def from_line(cls, line: str) -> "RegistryRecord":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 4:
            raise InputError(f"expected 4 tab-separated fields, got {len(parts)}")
        ident, bits, ref, stamp = parts
        return cls(ident, BinaryWatermark.from_string(bits), ref, int(stamp))


class Registry:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: list[RegistryRecord] = []
        self._owner: dict[BinaryWatermark, str] = {}
        self._pairs: set[tuple[str, BinaryWatermark]] = set()
        self._offset = 0
        self.length: int | None = None
        with self._lock:
            self._refresh()

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list[RegistryRecord]:
        return list(self._records)

    def _index(self, rec: RegistryRecord) -> None:
        if self.length is None:
            self.length = len(rec.watermark)
        self._records.append(rec)
        self._owner.setdefault(rec.watermark, rec.identity_id)
        self._pairs.add((rec.identity_id, rec.watermark))

    def _refresh(self) -> None:
        """Load lines appended since the last read."""
        if not self.path.exists():
            return
        if self.path.stat().st_size < self._offset:
            # another process compacted the file; start over
            self._records, self._owner, self._pairs = [], {}, set()
            self._offset, self.length = 0, None
        with open(self.path, "rb") as fh:
            fh.seek(self._offset)
            data = fh.read()
        consumed = 0
        for raw in data.splitlines(keepends=True):
            if not raw.endswith(b"\n"):
                logger.warning("%s: ignoring incomplete trailing record", self.path)
                break
            consumed += len(raw)
            try:
                rec = RegistryRecord.from_line(raw.decode("utf-8"))
            except (InputError, ValueError, UnicodeDecodeError) as exc:
                logger.warning("%s: skipping malformed record: %s", self.path, exc)
                continue
            if self.length is not None and len(rec.watermark) != self.length:
                logger.warning("%s: skipping record of length %d (registry length %d)",
                               self.path, len(rec.watermark), self.length)
                continue
            owner = self._owner.get(rec.watermark)
            if owner is not None and owner != rec.identity_id:
                logger.warning("%s: skipping colliding record for %s", self.path, rec.identity_id)
                continue
            self._index(rec)
        self._offset += consumed

    @contextmanager
    def _writer(self):
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            fd = os.open(self.path, os.O_RDWR | os.O_CREAT | os.O_APPEND, 0o644)
            try:
                fcntl.flock(fd, fcntl.LOCK_EX)
                self._refresh()
                yield fd
            finally:
                os.close(fd)

    def register(self, record: RegistryRecord) -> bool:
        """Store ``record`` durably.

        Returns True when a new line was written and False when the same
        (identity, watermark) pair was already present.
        """
        with self._writer() as fd:
            if self.length is not None and len(record.watermark) != self.length:
                raise LengthMismatchError(
                    f"registry holds {self.length}-bit watermarks, got {len(record.watermark)} bits")
            owner = self._owner.get(record.watermark)
            if owner is not None and owner != record.identity_id:
                raise CollisionError(owner, record.identity_id, str(record.watermark))
            if (record.identity_id, record.watermark) in self._pairs:
                return False
            line = record.to_line().encode("utf-8")
            torn = os.fstat(fd).st_size - self._offset
            if torn:
                # terminate the incomplete line so it stays a single bad record
                line = b"\n" + line
            try:
                os.write(fd, line)
                os.fsync(fd)
            except OSError as exc:
                raise RegistryError(f"cannot write registry {self.path}: {exc}") from exc
            self._offset = os.fstat(fd).st_size
            self._index(record)
            return True

    def trace(self, m_rec: BinaryWatermark, max_distance: int) -> list[tuple[str, int]]:
        """Identities whose registered watermark lies within ``max_distance`` bits.

        Each identity is listed once, at its closest watermark, in ascending
        distance with ties broken by identity id.
        """
        with self._lock:
            self._refresh()
            records = list(self._records)
        if not records:
            raise EmptyRegistryError(f"registry {self.path} is empty")
        if len(m_rec) != self.length:
            raise LengthMismatchError(f"query has {len(m_rec)} bits, registry holds {self.length}")
        if not 0 <= max_distance <= self.length:
            raise InputError(f"max_distance must lie in [0, {self.length}], got {max_distance}")
        table = np.stack([r.watermark.bits for r in records])
        dist = np.count_nonzero(table != m_rec.bits, axis=1)
        best: dict[str, int] = {}
        for rec, d in zip(records, dist.tolist()):
            if d <= max_distance and d < best.get(rec.identity_id, d + 1):
                best[rec.identity_id] = d
        return sorted(best.items(), key=lambda item: (item[1], item[0]))

    def compact(self) -> int:
        """Rewrite the file without malformed or duplicate lines.

        Returns the number of records kept.
        """
        with self._writer():
            seen = set()
            kept = []
            for rec in self._records:
                key = (rec.identity_id, rec.watermark)
                if key not in seen:
                    seen.add(key)
                    kept.append(rec)
            tmp = tempfile.NamedTemporaryFile("w", dir=self.path.parent, delete=False,
                                              prefix=self.path.name, suffix=".tmp")
            try:
                with tmp:
                    tmp.writelines(r.to_line() for r in kept)
                    tmp.flush()
                    os.fsync(tmp.fileno())
                os.replace(tmp.name, self.path)
            except OSError as exc:
                Path(tmp.name).unlink(missing_ok=True)
                raise RegistryError(f"compaction of {self.path} failed: {exc}") from exc
            dir_fd = os.open(self.path.parent, os.O_RDONLY)
            try:
                os.fsync(dir_fd)
            finally:
                os.close(dir_fd)
            self._records = []
            self._owner = {}
            self._pairs = set()
            self.length = None
            for rec in kept:
                self._index(rec)
            self._offset = self.path.stat().st_size
            return len(kept)
