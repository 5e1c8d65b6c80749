"""W3C-style ``traceparent`` propagation and span/trace id minting."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

_TRACEPARENT = re.compile(r"^00-([0-9a-f]{32})-([0-9a-f]{16})-([0-9a-f]{2})$")


@dataclass(frozen=True)
class TraceContext:
    trace_id: str
    parent_span_id: str

    def __post_init__(self):
        if int(self.trace_id, 16) == 0:
            raise ValueError("trace id must be nonzero")
        if int(self.parent_span_id, 16) == 0:
            raise ValueError("parent span id must be nonzero")

    def header(self) -> str:
        return format_traceparent(self.trace_id, self.parent_span_id)


def format_traceparent(trace_id: str, span_id: str) -> str:
    return f"00-{trace_id}-{span_id}-01"


def parse_traceparent(value: str | None) -> TraceContext | None:
    """Decode a header; anything malformed is treated as absent."""
    if not value:
        return None
    m = _TRACEPARENT.match(value.strip().lower())
    if m is None:
        return None
    try:
        return TraceContext(m.group(1), m.group(2))
    except ValueError:
        return None


class IdGenerator:
    """Nonzero random ids from a private, optionally seeded, generator."""

    def __init__(self, seed: int | str | None = None):
        self._rng = random.Random(seed)

    def _nonzero(self, bits: int) -> str:
        while True:
            v = self._rng.getrandbits(bits)
            if v:
                return f"{v:0{bits // 4}x}"

    def trace_id(self) -> str:
        return self._nonzero(128)

    def span_id(self) -> str:
        return self._nonzero(64)
