"""AMF, SMF, UPF and the home-network chain (AUSF, UDM, UDR)."""

from __future__ import annotations

import logging
from typing import Any

from ..errors import CapifSimError
from ..http import HttpRequest, HttpResponse, json_response
from ..model import DISCOVERY_PATH, NF_INSTANCE_PATH, NF_NOTIFY_PATH, VnfKind
from .base import (
    AuthState,
    ProcedureFailed,
    SessionState,
    UeContext,
    VnfApp,
    cause_of,
    expected_res,
    incoming_traceparent,
    response_traceparent,
    subscriber_key,
    token,
)

log = logging.getLogger(__name__)

GATEWAY_FAILURES = (502, 503, 504)


class AuthChainTimeout(CapifSimError):
    """A hop of the authentication chain did not answer within its deadline."""


class NotAuthenticated(CapifSimError):
    """Session setup was requested for a UE that has not authenticated."""


class DiscoveryFailed(CapifSimError):
    """The NRF had no instance of a required NF type."""


class RegisteringApp(VnfApp):
    """A VNF that registers with the NRF and may send heartbeats."""

    def register_routes(self) -> None:
        self.route("POST", NF_NOTIFY_PATH, self._status_notify)
        self.notifications: list[dict] = []
        self.heartbeats_sent = 0

    def profile_body(self) -> dict:
        return {
            "nfType": self.kind.value,
            "zone": str(self.zone),
            "endpoint": f"http://{self.instance_id}",
            "nfStatus": "REGISTERED",
        }

    async def register_with_nrf(self, traceparent: str | None = None) -> HttpResponse:
        target = NF_INSTANCE_PATH.format(nfInstanceId=self.instance_id)
        response = await self.call("PUT", target, VnfKind.NRF, self.profile_body(), traceparent)
        if response.status != 201:
            raise ProcedureFailed(f"{self.kind.host}-register", response.status, cause_of(response))
        return response

    async def send_heartbeat(self, delta: dict | None = None) -> HttpResponse:
        target = NF_INSTANCE_PATH.format(nfInstanceId=self.instance_id)
        self.heartbeats_sent += 1
        body = {"nfStatus": "REGISTERED", **(delta or {})}
        return await self.call("PATCH", target, VnfKind.NRF, body)

    async def heartbeat_loop(self, period_us: int, count: int | None = None) -> None:
        sent = 0
        while count is None or sent < count:
            await self.rt.sleep_us(period_us)
            await self.send_heartbeat({"load": sent % 100})
            sent += 1

    async def _status_notify(self, request: HttpRequest) -> HttpResponse:
        self.notifications.append(request.json() or {})
        return json_response(204)


class AmfApp(RegisteringApp):
    kind = VnfKind.AMF

    def register_routes(self) -> None:
        super().register_routes()
        self.ues: dict[str, UeContext] = {}
        self.route("POST", r"/namf-comm/v1/ue-contexts/(?P<ue_id>[^/]+)/n1-n2-messages", self._n1n2)

    def context(self, ue_id: str) -> UeContext:
        ctx = self.ues.get(ue_id)
        if ctx is None:
            ctx = self.ues[ue_id] = UeContext(ue_id)
        return ctx

    async def _aka_step(self, step: str, method: str, target: str, dst: VnfKind,
                        body: Any, traceparent: str | None) -> HttpResponse:
        response = await self.call(method, target, dst, body, traceparent)
        if response.status in GATEWAY_FAILURES:
            raise AuthChainTimeout(f"{step}: HTTP {response.status} ({cause_of(response) or 'no cause'})")
        if not response.ok:
            raise ProcedureFailed(step, response.status, cause_of(response))
        return response

    async def register_ue(self, ue_id: str) -> UeContext:
        """Run 5G-AKA for ``ue_id`` (ue-authentication, mutual-authentication,
        auth-confirmation) and return the authenticated context."""
        ctx = self.context(ue_id)
        response = await self._aka_step(
            "ue-authentication", "POST", "/nausf-auth/v1/ue-authentications", VnfKind.AUSF,
            {"supiOrSuci": ue_id, "servingNetworkName": "5G:mnc001.mcc001.3gppnetwork.org"},
            None,
        )
        # later steps of this UE's procedures hang under the first span
        ctx.trace_parent = response_traceparent(response)
        challenge = response.json()
        ctx.auth_ctx_id = challenge["authCtxId"]
        ctx.advance(auth=AuthState.CHALLENGED)

        response = await self._aka_step(
            "mutual-authentication", "POST", f"/ngnb-nas/v1/ues/{ue_id}/authentication-request",
            VnfKind.UE_GNB, {"rand": challenge["rand"], "autn": challenge["autn"]}, ctx.trace_parent,
        )
        res_star = response.json()["resStar"]

        response = await self._aka_step(
            "auth-confirmation", "PUT",
            f"/nausf-auth/v1/ue-authentications/{ctx.auth_ctx_id}/5g-aka-confirmation",
            VnfKind.AUSF, {"resStar": res_star}, ctx.trace_parent,
        )
        if response.json().get("authResult") != "AUTHENTICATION_SUCCESS":
            raise ProcedureFailed("auth-confirmation", response.status, "AUTHENTICATION_FAILURE")
        ctx.advance(auth=AuthState.AUTHENTICATED)
        return ctx

    async def setup_session(self, ue_id: str) -> UeContext:
        """Establish a PDU session for an authenticated UE."""
        ctx = self.ues.get(ue_id)
        if ctx is None or ctx.auth_state is not AuthState.AUTHENTICATED:
            raise NotAuthenticated(ue_id)
        tp = ctx.trace_parent

        response = await self.call("GET", f"{DISCOVERY_PATH}?target-nf-type=SMF&requester-nf-type=AMF",
                                   VnfKind.NRF, None, tp)
        if response.status == 404:
            raise DiscoveryFailed(f"smf-discovery: {cause_of(response)}")
        if not response.ok:
            raise ProcedureFailed("smf-discovery", response.status, cause_of(response))
        smf = response.json()["nfInstances"][0]["nfInstanceId"]

        response = await self.call("POST", "/nsmf-pdusession/v1/sm-contexts", smf,
                                   {"supi": ue_id, "pduSessionId": 1, "dnn": "internet",
                                    "sNssai": {"sst": 1}}, tp)
        if cause_of(response) == "DiscoveryFailed":
            raise DiscoveryFailed(f"context-creation: {response.json().get('detail', 'UPF discovery failed')}")
        if response.status != 201:
            raise ProcedureFailed("context-creation", response.status, cause_of(response))
        ctx.sm_context_ref = response.json()["smContextRef"]
        ctx.advance(session=SessionState.CONTEXT_CREATED)

        response = await self.call("POST", f"/ngnb-ngap/v1/ues/{ue_id}/pdu-session-resource-setup",
                                   VnfKind.UE_GNB, {"pduSessionId": 1, "smContextRef": ctx.sm_context_ref}, tp)
        if not response.ok:
            raise ProcedureFailed("session-resource-setup", response.status, cause_of(response))

        response = await self.call("PATCH", f"/nsmf-pdusession/v1/sm-contexts/{ctx.sm_context_ref}", smf,
                                   {"upCnxState": "ACTIVATED", "anType": "3GPP_ACCESS"}, tp)
        if not response.ok:
            raise ProcedureFailed("context-update", response.status, cause_of(response))
        ctx.advance(session=SessionState.ESTABLISHED)
        return ctx

    async def _n1n2(self, request: HttpRequest, ue_id: str) -> HttpResponse:
        ctx = self.ues.get(ue_id)
        if ctx is None or ctx.auth_state is not AuthState.AUTHENTICATED:
            return json_response(404, {"cause": "CONTEXT_NOT_FOUND"})
        return json_response(200, {"cause": "N1_N2_TRANSFER_INITIATED"})


class SmfApp(RegisteringApp):
    kind = VnfKind.SMF

    def register_routes(self) -> None:
        super().register_routes()
        self.contexts: dict[str, dict] = {}
        self.route("POST", r"/nsmf-pdusession/v1/sm-contexts", self._create)
        self.route("PATCH", r"/nsmf-pdusession/v1/sm-contexts/(?P<ref>[^/]+)", self._update)

    async def _create(self, request: HttpRequest) -> HttpResponse:
        body = request.json() or {}
        supi = body.get("supi")
        if not supi:
            return json_response(400, {"cause": "MANDATORY_IE_MISSING"})
        tp = incoming_traceparent(request)
        response = await self.call("GET", f"{DISCOVERY_PATH}?target-nf-type=UPF&requester-nf-type=SMF",
                                   VnfKind.NRF, None, tp)
        if response.status == 404:
            return json_response(404, {"cause": "DiscoveryFailed", "detail": "no UPF instance registered"})
        if not response.ok:
            return json_response(502, {"cause": "UpstreamFailure", "detail": f"upf-discovery HTTP {response.status}"})
        upf = response.json()["nfInstances"][0]["nfInstanceId"]
        ref = f"{supi}-{body.get('pduSessionId', 1)}"
        self.contexts[ref] = {"supi": supi, "upf": upf, "state": "CREATED"}

        response = await self.call("POST", f"/namf-comm/v1/ue-contexts/{supi}/n1-n2-messages", VnfKind.AMF,
                                   {"n1SmMsg": "PDU_SESSION_ESTABLISHMENT_ACCEPT",
                                    "n2SmInfo": "PDU_RES_SETUP_REQ", "pduSessionId": body.get("pduSessionId", 1)},
                                   tp)
        if not response.ok:
            return json_response(502, {"cause": "UpstreamFailure", "detail": f"n1-n2-context HTTP {response.status}"})
        return json_response(201, {"smContextRef": ref, "upfInstanceId": upf})

    async def _update(self, request: HttpRequest, ref: str) -> HttpResponse:
        ctx = self.contexts.get(ref)
        if ctx is None:
            return json_response(404, {"cause": "CONTEXT_NOT_FOUND"})
        ctx["state"] = (request.json() or {}).get("upCnxState", ctx["state"])
        return json_response(200, {"smContextRef": ref, "upCnxState": ctx["state"]})


class UpfApp(RegisteringApp):
    kind = VnfKind.UPF


class AusfApp(VnfApp):
    kind = VnfKind.AUSF

    def register_routes(self) -> None:
        self.pending: dict[str, dict] = {}
        self._counter: dict[str, int] = {}
        self.route("POST", r"/nausf-auth/v1/ue-authentications", self._authenticate)
        self.route("PUT", r"/nausf-auth/v1/ue-authentications/(?P<ctx_id>[^/]+)/5g-aka-confirmation",
                   self._confirm)

    async def _authenticate(self, request: HttpRequest) -> HttpResponse:
        body = request.json() or {}
        supi = body.get("supiOrSuci")
        if not supi:
            return json_response(400, {"cause": "MANDATORY_IE_MISSING"})
        response = await self.call(
            "POST", f"/nudm-ueau/v1/{supi}/security-information/generate-auth-data", VnfKind.UDM,
            {"servingNetworkName": body.get("servingNetworkName", "")}, incoming_traceparent(request),
        )
        if not response.ok:
            status = response.status if response.status in GATEWAY_FAILURES else 502
            return json_response(status, {"cause": cause_of(response) or "UpstreamFailure",
                                          "detail": f"auth-data HTTP {response.status}"})
        vector = response.json()["authenticationVector"]
        n = self._counter[supi] = self._counter.get(supi, 0) + 1
        ctx_id = f"{supi}-{n}"
        self.pending[ctx_id] = {"supi": supi, "xresStar": vector["xresStar"]}
        return json_response(201, {"authCtxId": ctx_id, "rand": vector["rand"], "autn": vector["autn"]})

    async def _confirm(self, request: HttpRequest, ctx_id: str) -> HttpResponse:
        ctx = self.pending.pop(ctx_id, None)
        if ctx is None:
            return json_response(404, {"cause": "CONTEXT_NOT_FOUND"})
        ok = (request.json() or {}).get("resStar") == ctx["xresStar"]
        result = "AUTHENTICATION_SUCCESS" if ok else "AUTHENTICATION_FAILURE"
        return json_response(200, {"authResult": result, "supi": ctx["supi"]})


class UdmApp(VnfApp):
    kind = VnfKind.UDM

    def register_routes(self) -> None:
        self.route("POST", r"/nudm-ueau/v1/(?P<supi>[^/]+)/security-information/generate-auth-data",
                   self._generate)

    async def _generate(self, request: HttpRequest, supi: str) -> HttpResponse:
        response = await self.call(
            "GET",
            f"/nudr-dr/v1/subscription-data/{supi}/authentication-data/authentication-subscription",
            VnfKind.UDR, None, incoming_traceparent(request),
        )
        if not response.ok:
            status = response.status if response.status in GATEWAY_FAILURES else 502
            return json_response(status, {"cause": cause_of(response) or "UpstreamFailure"})
        key = response.json()["encPermanentKey"]
        rand = token("rand", supi, key)
        return json_response(200, {"authType": "5G_AKA", "authenticationVector": {
            "rand": rand,
            "autn": token("autn", key, rand),
            "xresStar": expected_res(supi, rand),
        }})


class UdrApp(VnfApp):
    kind = VnfKind.UDR

    def register_routes(self) -> None:
        self.route("GET", r"/nudr-dr/v1/subscription-data/(?P<ue_id>[^/]+)/authentication-data/"
                          r"authentication-subscription", self._subscription)

    async def _subscription(self, request: HttpRequest, ue_id: str) -> HttpResponse:
        return json_response(200, {"authenticationMethod": "5G_AKA", "encPermanentKey": subscriber_key(ue_id)})
