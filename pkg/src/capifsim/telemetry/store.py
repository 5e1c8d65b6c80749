"""Append-only span store backed by one ``.spans.jsonl`` file.

The first line of the file is a header naming the format and the clock that
produced the timestamps; every following line is one span record.  An
in-memory index is rebuilt from the file on open.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Iterable

from ..errors import CapifSimError
from .span import Span, SchemaViolation, as_span

STORE_SUFFIX = ".spans.jsonl"
STORE_FORMAT = "capifsim-spans"
STORE_VERSION = 1


class StorageFull(CapifSimError):
    """The store reached its configured record cap."""


class StoreUnavailable(CapifSimError):
    """The backing file cannot be opened, read or appended to."""


class StoreNotFound(StoreUnavailable, FileNotFoundError):
    """No store exists at the given path."""


class SpanStore:
    """Durable, deduplicating span log.

    ``append`` is serialized by a lock; ``spans`` returns a snapshot so
    queries running alongside ingestion see a consistent prefix.
    """

    def __init__(self, path: str | Path, clock: str = "virtual", max_spans: int | None = None,
                 fsync: bool = True, create: bool = True):
        self.path = Path(path)
        self.clock = clock
        self.max_spans = max_spans
        self._fsync = fsync
        self._lock = threading.Lock()
        self._spans: list[Span] = []
        self._keys: set[tuple[str, str, str]] = set()
        self.duplicates = 0
        if self.path.exists():
            self._load()
        elif create:
            self._create()
        else:
            raise StoreNotFound(f"no span store at {self.path}")

    @classmethod
    def open(cls, path: str | Path) -> "SpanStore":
        """Open an existing store read/write without creating it."""
        return cls(path, create=False)

    def _create(self) -> None:
        header = {"format": STORE_FORMAT, "version": STORE_VERSION, "clock": self.clock}
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "x", encoding="utf-8") as fh:
                fh.write(json.dumps(header, sort_keys=True) + "\n")
        except OSError as exc:
            raise StoreUnavailable(f"cannot create {self.path}: {exc}") from exc

    def _load(self) -> None:
        try:
            with open(self.path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise StoreUnavailable(f"cannot read {self.path}: {exc}") from exc
        if not lines:
            raise StoreUnavailable(f"{self.path} has no header line")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise StoreUnavailable(f"{self.path}: bad header: {exc}") from exc
        if not isinstance(header, dict) or header.get("format") != STORE_FORMAT:
            raise StoreUnavailable(f"{self.path} is not a span store")
        self.clock = header.get("clock", self.clock)
        for n, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                span = Span.from_dict(json.loads(line))
            except (json.JSONDecodeError, SchemaViolation) as exc:
                # a torn final write is tolerated; corruption elsewhere is not
                if n == len(lines):
                    break
                raise StoreUnavailable(f"{self.path}:{n}: {exc}") from exc
            if span.key not in self._keys:
                self._keys.add(span.key)
                self._spans.append(span)

    def append(self, spans: Iterable[Span | dict]) -> int:
        """Persist new spans, skipping (traceId, spanId, side) duplicates.

        Returns the number of records actually written.
        """
        batch = [as_span(s) for s in spans]
        with self._lock:
            fresh: list[Span] = []
            seen = set()
            for s in batch:
                if s.key in self._keys or s.key in seen:
                    self.duplicates += 1
                    continue
                seen.add(s.key)
                fresh.append(s)
            if not fresh:
                return 0
            if self.max_spans is not None and len(self._spans) + len(fresh) > self.max_spans:
                raise StorageFull(
                    f"store holds {len(self._spans)} spans; cap is {self.max_spans}"
                )
            payload = "".join(s.to_json() + "\n" for s in fresh)
            try:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(payload)
                    if self._fsync:
                        fh.flush()
                        os.fsync(fh.fileno())
            except OSError as exc:
                raise StoreUnavailable(f"cannot append to {self.path}: {exc}") from exc
            self._spans.extend(fresh)
            self._keys.update(s.key for s in fresh)
            return len(fresh)

    def spans(self) -> list[Span]:
        with self._lock:
            return list(self._spans)

    def __len__(self) -> int:
        return len(self._spans)
