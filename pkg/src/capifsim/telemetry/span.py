"""Span records, their wire schema, and trace assembly."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Iterator, Mapping

from jsonschema import Draft202012Validator

from ..errors import CapifSimError
from ..model import Category, VnfKind, ZoneId, find_transaction


class SchemaViolation(CapifSimError, ValueError):
    """A span record does not match the wire schema."""


class Side(str, Enum):
    SENDER = "Sender"
    RECEIVER = "Receiver"


SPAN_FIELDS = (
    "traceId", "spanId", "parentSpanId", "operation", "srcVnf", "dstVnf",
    "srcZone", "dstZone", "category", "startUs", "durationUs", "side",
)

_ZONE_PATTERN = r"^[a-z0-9]+-(az|lz|wz)$"

SPAN_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "capifsim span",
    "type": "object",
    "additionalProperties": False,
    "required": list(SPAN_FIELDS),
    "properties": {
        "traceId": {"type": "string", "pattern": "^(?!0{32})[0-9a-f]{32}$"},
        "spanId": {"type": "string", "pattern": "^(?!0{16})[0-9a-f]{16}$"},
        "parentSpanId": {"type": ["string", "null"], "pattern": "^(?!0{16})[0-9a-f]{16}$"},
        "operation": {"type": "string", "pattern": "^[A-Z]+ /[^/?#\\s]+$"},
        "srcVnf": {"enum": [k.value for k in VnfKind]},
        "dstVnf": {"enum": [k.value for k in VnfKind]},
        "srcZone": {"type": "string", "pattern": _ZONE_PATTERN},
        "dstZone": {"type": "string", "pattern": _ZONE_PATTERN},
        "category": {"enum": [c.value for c in Category]},
        "startUs": {"type": "integer"},
        "durationUs": {"type": "integer", "minimum": 0},
        "side": {"enum": [s.value for s in Side]},
        "error": {"type": "string", "minLength": 1},
    },
}

_VALIDATOR = Draft202012Validator(SPAN_SCHEMA)


def validate_span_dict(doc: Mapping[str, Any]) -> None:
    """Raise SchemaViolation unless ``doc`` is a well-formed span record."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.path) or "<record>"
        raise SchemaViolation(f"{where}: {first.message}")
    if doc["parentSpanId"] == doc["spanId"]:
        raise SchemaViolation("parentSpanId equals spanId")
    method, service = doc["operation"].split(" ", 1)
    msg = find_transaction(method, service, VnfKind(doc["srcVnf"]), VnfKind(doc["dstVnf"]))
    if msg is not None and msg.category.value != doc["category"]:
        raise SchemaViolation(
            f"category {doc['category']} does not match {msg.id} ({msg.category.value})"
        )


@dataclass(frozen=True)
class Span:
    trace_id: str
    span_id: str
    parent_span_id: str | None
    operation: str
    src_vnf: VnfKind
    dst_vnf: VnfKind
    src_zone: ZoneId
    dst_zone: ZoneId
    category: Category
    start_us: int
    duration_us: int
    side: Side
    error: str | None = None

    @property
    def end_us(self) -> int:
        return self.start_us + self.duration_us

    @property
    def method(self) -> str:
        return self.operation.split(" ", 1)[0]

    @property
    def service(self) -> str:
        return self.operation.split(" ", 1)[1]

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.trace_id, self.span_id, self.side.value)

    @property
    def transaction(self):
        """The catalog entry (or heartbeat) this span observed, if any."""
        return find_transaction(self.method, self.service, self.src_vnf, self.dst_vnf)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "traceId": self.trace_id,
            "spanId": self.span_id,
            "parentSpanId": self.parent_span_id,
            "operation": self.operation,
            "srcVnf": self.src_vnf.value,
            "dstVnf": self.dst_vnf.value,
            "srcZone": str(self.src_zone),
            "dstZone": str(self.dst_zone),
            "category": self.category.value,
            "startUs": self.start_us,
            "durationUs": self.duration_us,
            "side": self.side.value,
        }
        if self.error:
            doc["error"] = self.error
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], validate: bool = True) -> "Span":
        if validate:
            validate_span_dict(doc)
        return cls(
            trace_id=doc["traceId"],
            span_id=doc["spanId"],
            parent_span_id=doc["parentSpanId"],
            operation=doc["operation"],
            src_vnf=VnfKind(doc["srcVnf"]),
            dst_vnf=VnfKind(doc["dstVnf"]),
            src_zone=ZoneId.parse(doc["srcZone"]),
            dst_zone=ZoneId.parse(doc["dstZone"]),
            category=Category(doc["category"]),
            start_us=int(doc["startUs"]),
            duration_us=int(doc["durationUs"]),
            side=Side(doc["side"]),
            error=doc.get("error"),
        )


def as_span(obj: Span | Mapping[str, Any]) -> Span:
    return obj if isinstance(obj, Span) else Span.from_dict(obj)


def _order(span: Span) -> tuple:
    return (span.start_us, 0 if span.side is Side.SENDER else 1, span.span_id)


class Trace:
    """The spans sharing one trace id, linked into a tree by parent ids.

    Spans whose parent is not part of the trace are kept as ``orphans``
    rather than being attached anywhere.
    """

    def __init__(self, trace_id: str, spans: Iterable[Span]):
        self.trace_id = trace_id
        self.spans: tuple[Span, ...] = tuple(sorted(spans, key=_order))
        ids = {s.span_id for s in self.spans}
        self._children: dict[str, list[Span]] = {}
        self.roots: list[Span] = []
        self.orphans: list[Span] = []
        for s in self.spans:
            if s.trace_id != trace_id:
                raise ValueError(f"span {s.span_id} belongs to trace {s.trace_id}")
            if s.parent_span_id is None:
                self.roots.append(s)
            elif s.parent_span_id in ids:
                self._children.setdefault(s.parent_span_id, []).append(s)
            else:
                self.orphans.append(s)

    def __len__(self) -> int:
        return len(self.spans)

    def __iter__(self) -> Iterator[Span]:
        return iter(self.spans)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Trace) and self.trace_id == other.trace_id and self.spans == other.spans

    def __repr__(self) -> str:
        return f"Trace({self.trace_id[:8]}..., spans={len(self.spans)}, orphans={len(self.orphans)})"

    @property
    def root(self) -> Span | None:
        return self.roots[0] if len(self.roots) == 1 else None

    def children(self, span: Span | str) -> list[Span]:
        sid = span if isinstance(span, str) else span.span_id
        return list(self._children.get(sid, ()))

    def is_tree(self) -> bool:
        if len(self.roots) != 1 or self.orphans:
            return False
        # spans are unique per (spanId, side); a parent id can therefore be
        # reached at most once from the root
        seen: set[tuple[str, str]] = set()
        stack = [self.roots[0]]
        while stack:
            s = stack.pop()
            k = (s.span_id, s.side.value)
            if k in seen:
                return False
            seen.add(k)
            stack.extend(self._children.get(s.span_id, ()))
        return len(seen) == len(self.spans)

    def walk(self) -> Iterator[tuple[int, Span]]:
        """Depth-first (depth, span) pairs from every root, children by start time."""
        for root in self.roots + self.orphans:
            stack = [(0, root)]
            while stack:
                depth, s = stack.pop()
                yield depth, s
                for child in reversed(self._children.get(s.span_id, ())):
                    stack.append((depth + 1, child))

    def to_dict(self) -> dict[str, Any]:
        return {"traceId": self.trace_id, "spans": [s.to_dict() for s in self.spans]}


def assemble_traces(spans: Iterable[Span]) -> list[Trace]:
    """Group spans by trace id; traces come back ordered by their first span."""
    groups: dict[str, list[Span]] = {}
    for s in spans:
        groups.setdefault(s.trace_id, []).append(s)
    traces = [Trace(tid, group) for tid, group in groups.items()]
    traces.sort(key=lambda t: (_order(t.spans[0]), t.trace_id))
    return traces
