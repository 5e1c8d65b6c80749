"""Minimal HTTP/1.1 message model and the two transports it travels over.

``VirtualNetwork`` hands requests straight to the registered handler
coroutine; ``AiohttpNetwork`` serves handlers on real TCP sockets and sends
requests with an aiohttp client.  Both expose the same ``serve`` / ``send`` /
``stop`` / ``ready`` surface so VNFs and sidecars do not care which one
they run on.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Awaitable, Callable
from urllib.parse import parse_qs, urlsplit

from .errors import CapifSimError

log = logging.getLogger(__name__)

JSON_TYPE = "application/json"


class UpstreamUnreachable(CapifSimError, ConnectionError):
    """Nothing is listening at the target address."""


def _lower(headers: dict[str, str] | None) -> dict[str, str]:
    return {k.lower(): v for k, v in (headers or {}).items()}


@dataclass
class HttpRequest:
    method: str
    target: str
    headers: dict[str, str] = field(default_factory=dict)
    body: bytes = b""

    def __post_init__(self):
        self.method = self.method.upper()
        self.headers = _lower(self.headers)

    @property
    def path(self) -> str:
        return urlsplit(self.target).path

    @property
    def query(self) -> dict[str, str]:
        return {k: v[0] for k, v in parse_qs(urlsplit(self.target).query).items()}

    def json(self) -> Any:
        return json.loads(self.body) if self.body else None


@dataclass
class HttpResponse:
    status: int
    headers: dict[str, str] = field(default_factory=dict)
    body: bytes = b""

    def __post_init__(self):
        self.headers = _lower(self.headers)

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300

    def json(self) -> Any:
        return json.loads(self.body) if self.body else None


def encode_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def json_response(status: int, obj: Any = None) -> HttpResponse:
    if obj is None:
        return HttpResponse(status)
    return HttpResponse(status, {"content-type": JSON_TYPE}, encode_json(obj))


def json_request(method: str, target: str, obj: Any = None,
                 headers: dict[str, str] | None = None) -> HttpRequest:
    hdrs = _lower(headers)
    body = b""
    if obj is not None:
        body = encode_json(obj)
        hdrs["content-type"] = JSON_TYPE
    return HttpRequest(method, target, hdrs, body)


Handler = Callable[[HttpRequest], Awaitable[HttpResponse]]


class VirtualNetwork:
    """In-process 'network': addresses map directly to handler coroutines."""

    def __init__(self):
        self._handlers: dict[str, Handler] = {}

    async def serve(self, address: str, handler: Handler) -> None:
        self._handlers[address] = handler

    async def stop(self, address: str) -> None:
        self._handlers.pop(address, None)

    async def send(self, address: str, request: HttpRequest) -> HttpResponse:
        handler = self._handlers.get(address)
        if handler is None:
            raise UpstreamUnreachable(f"connection refused: {address}")
        return await handler(request)

    async def ready(self) -> None:
        """Nothing to warm: handlers are reachable as soon as they are served."""

    async def close(self) -> None:
        self._handlers.clear()


READY_PATH = "/.well-known/capifsim-ready"

_HOP_HEADERS = {"content-length", "transfer-encoding", "connection", "keep-alive", "date", "server"}


class AiohttpNetwork:
    """Real HTTP/1.1 over TCP, one aiohttp server per served address."""

    def __init__(self):
        from aiohttp import ClientSession, TCPConnector

        self._runners: dict[str, Any] = {}
        self._session = ClientSession(
            connector=TCPConnector(limit=0, force_close=False),
            auto_decompress=False,
        )

    async def serve(self, address: str, handler: Handler) -> None:
        from aiohttp import web

        async def entry(request: web.Request) -> web.StreamResponse:
            if request.raw_path == READY_PATH:
                return web.Response(status=204)
            req = HttpRequest(
                request.method,
                request.raw_path,
                {k: v for k, v in request.headers.items()},
                await request.read(),
            )
            try:
                resp = await handler(req)
            except Exception:  # noqa: BLE001 - never leak a traceback onto the wire
                log.exception("handler failed for %s %s", req.method, req.target)
                resp = json_response(500, {"cause": "SYSTEM_FAILURE"})
            headers = {k: v for k, v in resp.headers.items() if k not in _HOP_HEADERS}
            return web.Response(status=resp.status, body=resp.body, headers=headers)

        app = web.Application()
        app.router.add_route("*", "/{tail:.*}", entry)
        runner = web.AppRunner(app, access_log=None)
        await runner.setup()
        host, port = address.rsplit(":", 1)
        site = web.TCPSite(runner, host, int(port), reuse_address=True)
        await site.start()
        self._runners[address] = runner

    async def stop(self, address: str) -> None:
        runner = self._runners.pop(address, None)
        if runner is not None:
            await runner.cleanup()

    async def send(self, address: str, request: HttpRequest) -> HttpResponse:
        from aiohttp import ClientConnectorError, ClientOSError, ServerDisconnectedError
        from yarl import URL

        headers = dict(request.headers)
        headers.setdefault("host", address)
        try:
            async with self._session.request(
                request.method,
                URL(f"http://{address}{request.target}", encoded=True),
                headers=headers,
                data=request.body or None,
                allow_redirects=False,
            ) as resp:
                body = await resp.read()
                out = {k.lower(): v for k, v in resp.headers.items() if k.lower() not in _HOP_HEADERS}
                return HttpResponse(resp.status, out, body)
        except (ClientConnectorError, ClientOSError, ServerDisconnectedError) as exc:
            raise UpstreamUnreachable(f"connection refused: {address}") from exc

    async def ready(self) -> None:
        """Probe every served address once.

        The probe is answered by the transport, never by the handler, so it
        leaves no trace.  It confirms each listener is up and leaves a pooled
        keep-alive connection behind, so the first real request on a hop does
        not pay for connection setup.
        """
        for address in list(self._runners):
            await self.send(address, HttpRequest("GET", READY_PATH, {}, b""))

    async def close(self) -> None:
        for address in list(self._runners):
            await self.stop(address)
        await self._session.close()
