"""Span filtering, trace assembly for queries, and the ``GET /traces`` endpoint."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from ..errors import CapifSimError
from ..model import Category, VnfKind
from .span import Side, Span, Trace, assemble_traces
from .store import SpanStore


class MalformedFilter(CapifSimError, ValueError):
    """A query parameter could not be understood."""


@dataclass(frozen=True)
class SpanFilter:
    """Every supplied field must match.

    ``service`` is either a VNF kind (matching the span's source or
    destination) or a CAPIF service path such as ``/nsmf-pdusession``.
    ``start``/``end`` bound ``startUs`` inclusively.
    """

    service: str | None = None
    category: Category | None = None
    start: int | None = None
    end: int | None = None
    trace_id: str | None = None
    side: Side | None = None

    def __post_init__(self):
        if self.start is not None and self.end is not None and self.start > self.end:
            raise MalformedFilter(f"start {self.start} is after end {self.end}")
        if self.service is not None and not self.service.startswith("/"):
            try:
                VnfKind.parse(self.service)
            except ValueError as exc:
                raise MalformedFilter(str(exc)) from None

    @classmethod
    def from_params(cls, params: Mapping[str, Any]) -> "SpanFilter":
        known = {"service", "category", "start", "end", "traceId", "trace_id", "side"}
        unknown = set(params) - known
        if unknown:
            raise MalformedFilter(f"unknown filter field(s): {', '.join(sorted(unknown))}")

        def text(key: str) -> str | None:
            v = params.get(key)
            if v is None or v == "":
                return None
            return str(v)

        def integer(key: str) -> int | None:
            v = text(key)
            if v is None:
                return None
            try:
                return int(v)
            except ValueError:
                raise MalformedFilter(f"{key} must be an integer microsecond timestamp, got {v!r}") from None

        category = None
        if text("category") is not None:
            try:
                category = Category.parse(text("category"))
            except ValueError as exc:
                raise MalformedFilter(str(exc)) from None
        side = None
        if text("side") is not None:
            try:
                side = Side(text("side").capitalize())
            except ValueError:
                raise MalformedFilter(f"side must be Sender or Receiver, got {text('side')!r}") from None
        trace_id = text("traceId") or text("trace_id")
        if trace_id is not None:
            trace_id = trace_id.lower()
            if len(trace_id) != 32 or any(c not in "0123456789abcdef" for c in trace_id):
                raise MalformedFilter(f"traceId must be 32 hex digits, got {trace_id!r}")
        return cls(text("service"), category, integer("start"), integer("end"), trace_id, side)

    def matches(self, span: Span) -> bool:
        if self.trace_id is not None and span.trace_id != self.trace_id:
            return False
        if self.category is not None and span.category is not self.category:
            return False
        if self.side is not None and span.side is not self.side:
            return False
        if self.start is not None and span.start_us < self.start:
            return False
        if self.end is not None and span.start_us > self.end:
            return False
        if self.service is not None:
            if self.service.startswith("/"):
                return span.service == self.service
            kind = VnfKind.parse(self.service)
            return kind in (span.src_vnf, span.dst_vnf)
        return True


def filter_spans(spans: Iterable[Span], flt: SpanFilter) -> list[Span]:
    return [s for s in spans if flt.matches(s)]


def query(store: SpanStore | Iterable[Span], flt: SpanFilter | Mapping[str, Any] | None = None) -> list[Trace]:
    """Traces built from the spans that match ``flt``.

    Spans whose parent was filtered out show up as orphans of their trace.
    """
    if flt is None:
        flt = SpanFilter()
    elif not isinstance(flt, SpanFilter):
        flt = SpanFilter.from_params(flt)
    spans = store.spans() if isinstance(store, SpanStore) else list(store)
    return assemble_traces(filter_spans(spans, flt))


def make_query_app(store: SpanStore):
    """aiohttp application serving ``GET /traces``."""
    from aiohttp import web

    async def traces(request: web.Request) -> web.Response:
        try:
            flt = SpanFilter.from_params(dict(request.query))
        except MalformedFilter as exc:
            return web.json_response({"error": "MalformedFilter", "detail": str(exc)}, status=400)
        found = query(store, flt)
        return web.json_response({"traces": [t.to_dict() for t in found]})

    app = web.Application()
    app.router.add_get("/traces", traces)
    return app
