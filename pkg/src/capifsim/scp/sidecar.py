"""The per-VNF sidecar proxy.

Every VNF talks to the rest of the core only through its own sidecar.  The
application addresses a request to its local sidecar and names the
destination VNF in the ``Host`` header.  The sidecar then plays one of two
roles:

* sender (request came from its own app): resolves the destination in the
  route table, charges the request leg of the emulated RTT, forwards to the
  destination's sidecar, charges the response leg plus its own VNF's
  processing time and records a ``Sender`` span covering all of it;
* receiver (request carries ``x-scp-src``): charges its VNF's processing
  time, forwards to the application port and records a ``Receiver`` span.

Trace context travels in a ``traceparent`` header.  The sender also returns
a ``traceresponse`` header naming its span so an application can hang later
calls of the same procedure under it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Protocol

from ..http import HttpRequest, HttpResponse, UpstreamUnreachable, json_response
from ..model import CapifMessage, VnfKind, ZoneId, find_transaction
from ..netem.latency import LatencyEmulator
from ..runtime import Runtime
from ..telemetry.span import Side, Span
from .exporter import SpanExporter
from .paths import MalformedUrl, extract_capif_path
from .routes import RouteTable, UnknownRoute
from .tracecontext import IdGenerator, format_traceparent, parse_traceparent

if TYPE_CHECKING:
    from ..vnf.processing import ProcessingModel

log = logging.getLogger(__name__)

HDR_SRC = "x-scp-src"
HDR_SRC_ZONE = "x-scp-src-zone"
HDR_TRACEPARENT = "traceparent"
HDR_TRACERESPONSE = "traceresponse"
# emulated link delays are charged against these stamps, so the time a message
# really spends in transit counts toward its leg instead of adding to it
HDR_DELIVER_AT = "x-scp-deliver-at"
HDR_SENT_AT = "x-scp-sent-at"
_SIDECAR_HEADERS = (HDR_SRC, HDR_SRC_ZONE, HDR_DELIVER_AT)

DEFAULT_DEADLINE_US = 5_000_000


class Transport(Protocol):
    async def serve(self, address: str, handler) -> None: ...
    async def stop(self, address: str) -> None: ...
    async def send(self, address: str, request: HttpRequest) -> HttpResponse: ...


@dataclass
class SidecarStats:
    sent: int = 0
    received: int = 0
    untraced: int = 0
    upstream_errors: int = 0
    timeouts: int = 0
    unknown_routes: int = 0


class Sidecar:
    def __init__(self, runtime: Runtime, network: Transport, routes: RouteTable,
                 latency: LatencyEmulator, processing: ProcessingModel,
                 exporter: SpanExporter | None, ids: IdGenerator,
                 passthrough: bool = False, deadline_us: int = DEFAULT_DEADLINE_US,
                 listen_host: str = "127.0.0.1"):
        self.rt = runtime
        self.network = network
        self.routes = routes
        self.latency = latency
        self.processing = processing
        self.exporter = exporter
        self.ids = ids
        self.passthrough = passthrough
        self.deadline_us = deadline_us
        self.address = f"{listen_host}:{routes.sidecar_port}"
        self.stats = SidecarStats()

    @property
    def vnf(self) -> VnfKind:
        return self.routes.own_vnf

    @property
    def zone(self) -> ZoneId:
        return self.routes.own_zone

    def passthrough_mode(self, on: bool) -> None:
        self.passthrough = bool(on)

    async def start(self) -> None:
        await self.network.serve(self.address, self.intercept)

    async def stop(self) -> None:
        await self.network.stop(self.address)

    # -- request handling ------------------------------------------------------

    async def intercept(self, request: HttpRequest) -> HttpResponse:
        if HDR_SRC in request.headers:
            return await self._inbound(request)
        return await self._outbound(request)

    def _tracing(self) -> bool:
        return not self.passthrough and self.exporter is not None

    def _emit(self, side: Side, msg: CapifMessage, operation: str, trace_id: str, span_id: str,
              parent: str | None, src_zone: ZoneId, dst_zone: ZoneId, start: int,
              error: str | None = None) -> None:
        span = Span(
            trace_id=trace_id,
            span_id=span_id,
            parent_span_id=parent,
            operation=operation,
            src_vnf=msg.src,
            dst_vnf=msg.dst,
            src_zone=src_zone,
            dst_zone=dst_zone,
            category=msg.category,
            start_us=start,
            duration_us=max(0, self.rt.now_us() - start),
            side=side,
            error=error,
        )
        assert self.exporter is not None
        self.exporter.emit(span)

    async def _outbound(self, request: HttpRequest) -> HttpResponse:
        start = self.rt.now_us()
        try:
            route = self.routes.resolve(request.headers.get("host"))
        except UnknownRoute as exc:
            self.stats.unknown_routes += 1
            return json_response(502, {"cause": "UnknownRoute", "detail": str(exc)})
        try:
            service = extract_capif_path(request.target)
        except MalformedUrl as exc:
            return json_response(400, {"cause": "MalformedUrl", "detail": str(exc)})

        msg = find_transaction(request.method, service, self.vnf, route.kind)
        traced = self._tracing() and msg is not None
        if msg is None:
            self.stats.untraced += 1

        headers = {k: v for k, v in request.headers.items() if k not in (HDR_TRACEPARENT, "host")}
        headers["host"] = route.kind.host
        headers[HDR_SRC] = self.vnf.value
        headers[HDR_SRC_ZONE] = str(self.zone)
        trace_id = span_id = parent = None
        if traced:
            ctx = parse_traceparent(request.headers.get(HDR_TRACEPARENT))
            trace_id = ctx.trace_id if ctx else self.ids.trace_id()
            parent = ctx.parent_span_id if ctx else None
            span_id = self.ids.span_id()
            headers[HDR_TRACEPARENT] = format_traceparent(trace_id, span_id)
        elif HDR_TRACEPARENT in request.headers:
            headers[HDR_TRACEPARENT] = request.headers[HDR_TRACEPARENT]
        delay = self.latency.transaction_delay(self.zone, route.zone)
        headers[HDR_DELIVER_AT] = str(self.rt.now_us() + delay.request_us)
        forward = HttpRequest(request.method, request.target, headers, request.body)

        operation = f"{request.method} {service}"
        self.stats.sent += 1
        error = None
        try:
            response = await self.rt.wait_for(
                self.network.send(route.sidecar_address, forward), delay.request_us + self.deadline_us
            )
        except UpstreamUnreachable as exc:
            self.stats.upstream_errors += 1
            error = "UpstreamUnreachable"
            response = json_response(502, {"cause": error, "detail": str(exc)})
        except TimeoutError:
            self.stats.timeouts += 1
            error = "UpstreamTimeout"
            response = json_response(504, {"cause": error})
        else:
            sent_at = _stamp(response.headers.pop(HDR_SENT_AT, None))
            proc = self.processing.us(self.vnf, msg.id if msg else None)
            base = sent_at if sent_at is not None else self.rt.now_us()
            await self._sleep_until(base + delay.response_us + proc)

        if traced:
            assert msg is not None and trace_id and span_id
            self._emit(Side.SENDER, msg, operation, trace_id, span_id, parent,
                       self.zone, route.zone, start, error)
            out_headers = dict(response.headers)
            out_headers[HDR_TRACERESPONSE] = format_traceparent(trace_id, span_id)
            return HttpResponse(response.status, out_headers, response.body)
        return response

    async def _inbound(self, request: HttpRequest) -> HttpResponse:
        deliver_at = _stamp(request.headers.get(HDR_DELIVER_AT))
        if deliver_at is not None:
            await self._sleep_until(deliver_at)
        start = self.rt.now_us()
        src_label = request.headers.get(HDR_SRC, "")
        try:
            src = VnfKind.parse(src_label)
            src_zone = ZoneId.parse(request.headers.get(HDR_SRC_ZONE, ""))
            service = extract_capif_path(request.target)
        except ValueError as exc:
            return json_response(400, {"cause": "BadProxyHeaders", "detail": str(exc)})

        msg = find_transaction(request.method, service, src, self.vnf)
        if msg is None:
            self.stats.untraced += 1
        ctx = parse_traceparent(request.headers.get(HDR_TRACEPARENT))
        traced = self._tracing() and msg is not None and ctx is not None

        headers = {k: v for k, v in request.headers.items() if k not in _SIDECAR_HEADERS}
        span_id = None
        if traced:
            assert ctx is not None
            span_id = self.ids.span_id()
            headers[HDR_TRACEPARENT] = format_traceparent(ctx.trace_id, span_id)
        forward = HttpRequest(request.method, request.target, headers, request.body)

        self.stats.received += 1
        await self.rt.sleep_us(self.processing.us(self.vnf, msg.id if msg else None))
        error = None
        try:
            response = await self.network.send(self.routes.app_address, forward)
        except UpstreamUnreachable as exc:
            self.stats.upstream_errors += 1
            error = "UpstreamUnreachable"
            response = json_response(502, {"cause": error, "detail": str(exc)})

        if traced:
            assert msg is not None and ctx is not None and span_id
            self._emit(Side.RECEIVER, msg, f"{request.method} {service}", ctx.trace_id, span_id,
                       ctx.parent_span_id, src_zone, self.zone, start, error)
        return HttpResponse(response.status, dict(response.headers, **{HDR_SENT_AT: str(self.rt.now_us())}),
                            response.body)

    async def _sleep_until(self, t_us: int) -> None:
        await self.rt.sleep_us(max(0, t_us - self.rt.now_us()))


def _stamp(value: str | None) -> int | None:
    try:
        return int(value) if value is not None else None
    except ValueError:
        return None
