"""Shared plumbing for the VNF applications."""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Awaitable, Callable

from ..errors import CapifSimError
from ..http import HttpRequest, HttpResponse, json_request, json_response
from ..model import VnfKind, ZoneId
from ..runtime import Runtime

log = logging.getLogger(__name__)

Route = tuple[str, "re.Pattern[str]", Callable[..., Awaitable[HttpResponse]]]


class ProcedureFailed(CapifSimError):
    """A peer answered a procedure step with an unexpected status."""

    def __init__(self, step: str, status: int, cause: str | None = None):
        super().__init__(f"{step} failed with HTTP {status}" + (f" ({cause})" if cause else ""))
        self.step = step
        self.status = status
        self.cause = cause


class AuthState(str, Enum):
    IDLE = "Idle"
    CHALLENGED = "Challenged"
    AUTHENTICATED = "Authenticated"


class SessionState(str, Enum):
    NONE = "None"
    CONTEXT_CREATED = "ContextCreated"
    ESTABLISHED = "Established"


@dataclass
class UeContext:
    ue_id: str
    auth_state: AuthState = AuthState.IDLE
    session_state: SessionState = SessionState.NONE
    auth_ctx_id: str | None = None
    sm_context_ref: str | None = None
    trace_parent: str | None = None

    def __post_init__(self):
        self._check()

    def _check(self) -> None:
        if self.session_state is not SessionState.NONE and self.auth_state is not AuthState.AUTHENTICATED:
            raise ValueError("a UE needs to be authenticated before it has a session")

    def advance(self, auth: AuthState | None = None, session: SessionState | None = None) -> None:
        if auth is not None:
            self.auth_state = auth
        if session is not None:
            self.session_state = session
        self._check()


@dataclass(frozen=True)
class CallRecord:
    """One request an application sent (or served) and what came back."""

    target: str
    method: str
    request_body: bytes
    status: int
    response_body: bytes
    elapsed_us: int


def token(*parts: Any) -> str:
    """Deterministic opaque token standing in for AKA material."""
    return hashlib.sha256(":".join(str(p) for p in parts).encode()).hexdigest()[:32]


def subscriber_key(supi: str) -> str:
    return token("k", supi)


def expected_res(supi: str, rand: str) -> str:
    return token("res*", subscriber_key(supi), rand)


class VnfApp:
    """An HTTP application that reaches other VNFs only via its own sidecar."""

    kind: VnfKind

    def __init__(self, runtime: Runtime, network, app_address: str, sidecar_address: str,
                 zone: ZoneId, instance_id: str | None = None):
        self.rt = runtime
        self.network = network
        self.address = app_address
        self.sidecar_address = sidecar_address
        self.zone = zone
        self.instance_id = instance_id or f"{self.kind.host}-1"
        self.sent: list[CallRecord] = []
        self.served: list[CallRecord] = []
        self._routes: list[Route] = []
        self.register_routes()

    # subclasses add their endpoints here
    def register_routes(self) -> None:
        pass

    def route(self, method: str, pattern: str, handler: Callable[..., Awaitable[HttpResponse]]) -> None:
        self._routes.append((method.upper(), re.compile(f"^{pattern}$"), handler))

    async def start(self) -> None:
        await self.network.serve(self.address, self.handle)

    async def stop(self) -> None:
        await self.network.stop(self.address)

    async def handle(self, request: HttpRequest) -> HttpResponse:
        t0 = self.rt.now_us()
        response = None
        path_matched = False
        for method, pattern, handler in self._routes:
            m = pattern.match(request.path)
            if m is None:
                continue
            path_matched = True
            if method == request.method:
                response = await handler(request, **m.groupdict())
                break
        if response is None:
            status = 405 if path_matched else 404
            response = json_response(status, {"cause": "RESOURCE_URI_STRUCTURE_NOT_FOUND"
                                               if status == 404 else "METHOD_NOT_ALLOWED"})
        self.served.append(CallRecord(request.target, request.method, request.body,
                                      response.status, response.body, self.rt.now_us() - t0))
        return response

    async def call(self, method: str, target: str, dst: VnfKind | str, body: Any = None,
                   traceparent: str | None = None) -> HttpResponse:
        host = dst.host if isinstance(dst, VnfKind) else dst
        headers = {"host": host, "accept": "application/json"}
        if traceparent:
            headers["traceparent"] = traceparent
        request = json_request(method, target, body, headers)
        t0 = self.rt.now_us()
        response = await self.network.send(self.sidecar_address, request)
        self.sent.append(CallRecord(target, method, request.body, response.status,
                                    response.body, self.rt.now_us() - t0))
        return response


def incoming_traceparent(request: HttpRequest) -> str | None:
    return request.headers.get("traceparent")


def response_traceparent(response: HttpResponse) -> str | None:
    return response.headers.get("traceresponse")


def cause_of(response: HttpResponse) -> str | None:
    try:
        doc = response.json()
    except ValueError:
        return None
    return doc.get("cause") if isinstance(doc, dict) else None
