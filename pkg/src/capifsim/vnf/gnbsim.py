"""Combined gNB + UE driver."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..http import HttpRequest, HttpResponse, json_response
from ..model import VnfKind
from .base import VnfApp, expected_res
from .functions import AmfApp


@dataclass
class UeOutcome:
    ue_id: str
    ok: bool
    error: str | None = None
    start_us: int = 0
    end_us: int = 0


@dataclass
class RunSummary:
    ue_count: int
    outcomes: list[UeOutcome] = field(default_factory=list)

    @property
    def successes(self) -> int:
        return sum(1 for o in self.outcomes if o.ok)

    @property
    def failures(self) -> list[UeOutcome]:
        return [o for o in self.outcomes if not o.ok]

    @property
    def ok(self) -> bool:
        return self.successes == self.ue_count

    def to_dict(self) -> dict:
        return {
            "ueCount": self.ue_count,
            "successes": self.successes,
            "failures": [{"ueId": o.ue_id, "error": o.error} for o in self.failures],
        }


def ue_id_for(index: int) -> str:
    return f"imsi-00101{index:010d}"


class GnbSimApp(VnfApp):
    """Answers the AMF's NAS/NGAP requests and drives UE procedures.

    The N2 leg towards the AMF is not modelled as HTTP; the driver invokes the
    AMF's procedures directly and the AMF's own HTTP traffic does the rest.
    """

    kind = VnfKind.UE_GNB

    def register_routes(self) -> None:
        self.sessions: dict[str, dict] = {}
        self.route("POST", r"/ngnb-nas/v1/ues/(?P<ue_id>[^/]+)/authentication-request", self._auth_request)
        self.route("POST", r"/ngnb-ngap/v1/ues/(?P<ue_id>[^/]+)/pdu-session-resource-setup", self._resource_setup)

    async def _auth_request(self, request: HttpRequest, ue_id: str) -> HttpResponse:
        body = request.json() or {}
        rand = body.get("rand")
        if not rand:
            return json_response(400, {"cause": "MANDATORY_IE_MISSING"})
        return json_response(200, {"resStar": expected_res(ue_id, rand)})

    async def _resource_setup(self, request: HttpRequest, ue_id: str) -> HttpResponse:
        body = request.json() or {}
        self.sessions[ue_id] = body
        return json_response(200, {"pduSessionId": body.get("pduSessionId", 1), "result": "SETUP_SUCCESS"})

    async def _one(self, amf: AmfApp, ue_id: str) -> UeOutcome:
        start = self.rt.now_us()
        try:
            await amf.register_ue(ue_id)
            await amf.setup_session(ue_id)
        except Exception as exc:  # noqa: BLE001 - recorded per UE, others keep going
            return UeOutcome(ue_id, False, f"{type(exc).__name__}: {exc}", start, self.rt.now_us())
        return UeOutcome(ue_id, True, None, start, self.rt.now_us())

    async def run(self, amf: AmfApp, ue_count: int, concurrent: bool = False, first_index: int = 1) -> RunSummary:
        if not isinstance(ue_count, int) or ue_count < 1:
            raise ValueError(f"ueCount must be a positive integer, got {ue_count!r}")
        ids = [ue_id_for(first_index + i) for i in range(ue_count)]
        summary = RunSummary(ue_count)
        if concurrent:
            summary.outcomes = list(await self.rt.gather(*(self._one(amf, u) for u in ids)))
        else:
            for u in ids:
                summary.outcomes.append(await self._one(amf, u))
        return summary
