"""NF repository: registration, heartbeats and discovery."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..errors import CapifSimError
from ..http import HttpRequest, HttpResponse, json_response
from ..model import NF_NOTIFY_PATH, VnfKind, ZoneId
from .base import VnfApp, incoming_traceparent

REGISTRABLE = frozenset({VnfKind.AMF, VnfKind.SMF, VnfKind.UPF})


class DuplicateInstanceId(CapifSimError, ValueError):
    pass


class UnknownInstance(CapifSimError, KeyError):
    pass


class NoInstanceAvailable(CapifSimError, LookupError):
    pass


@dataclass
class NfProfile:
    instance_id: str
    kind: VnfKind
    zone: ZoneId
    endpoint: str
    last_heartbeat: int = 0
    attributes: dict[str, Any] = field(default_factory=dict)

    def to_dict(self, with_timestamps: bool = True) -> dict:
        doc = {
            "nfInstanceId": self.instance_id,
            "nfType": self.kind.value,
            "zone": str(self.zone),
            "endpoint": self.endpoint,
            "attributes": dict(sorted(self.attributes.items())),
        }
        # clock readings stay out of HTTP bodies so payloads replay identically
        if with_timestamps:
            doc["lastHeartbeat"] = self.last_heartbeat
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "NfProfile":
        return cls(
            instance_id=str(doc["nfInstanceId"]),
            kind=VnfKind.parse(doc["nfType"]),
            zone=ZoneId.parse(doc["zone"]),
            endpoint=str(doc["endpoint"]),
            last_heartbeat=int(doc.get("lastHeartbeat", 0)),
            attributes=dict(doc.get("attributes", {})),
        )


class NfRegistry:
    """Thread-safe profile registry with deterministic discovery order."""

    def __init__(self):
        self._lock = threading.Lock()
        self._profiles: dict[str, NfProfile] = {}
        self._order: dict[str, int] = {}
        self._seq = 0

    def register(self, profile: NfProfile) -> NfProfile:
        if profile.kind not in REGISTRABLE:
            raise ValueError(f"{profile.kind.value} does not register with the NRF")
        with self._lock:
            if profile.instance_id in self._profiles:
                raise DuplicateInstanceId(profile.instance_id)
            self._profiles[profile.instance_id] = profile
            self._order[profile.instance_id] = self._seq
            self._seq += 1
            return profile

    def heartbeat(self, instance_id: str, delta: Mapping[str, Any] | None, now_us: int) -> NfProfile:
        with self._lock:
            profile = self._profiles.get(instance_id)
            if profile is None:
                raise UnknownInstance(instance_id)
            profile.last_heartbeat = max(profile.last_heartbeat, int(now_us))
            if delta:
                profile.attributes.update(delta)
            return profile

    def discover(self, kind: VnfKind) -> NfProfile:
        with self._lock:
            candidates = [p for p in self._profiles.values() if p.kind is kind]
            if not candidates:
                raise NoInstanceAvailable(f"no {kind.value} registered")
            return min(candidates, key=lambda p: (self._order[p.instance_id], p.instance_id))

    def get(self, instance_id: str) -> NfProfile:
        with self._lock:
            try:
                return self._profiles[instance_id]
            except KeyError:
                raise UnknownInstance(instance_id) from None

    def __len__(self) -> int:
        return len(self._profiles)

    def dump(self) -> list[dict]:
        with self._lock:
            ordered = sorted(self._profiles.values(), key=lambda p: self._order[p.instance_id])
            return [p.to_dict() for p in ordered]


class NrfApp(VnfApp):
    kind = VnfKind.NRF

    def __init__(self, *args, **kwargs):
        self.registry = NfRegistry()
        self._notifications: list = []
        super().__init__(*args, **kwargs)

    def register_routes(self) -> None:
        self.route("PUT", r"/nnrf-nfm/v1/nf-instances/(?P<instance_id>[^/]+)", self._register)
        self.route("PATCH", r"/nnrf-nfm/v1/nf-instances/(?P<instance_id>[^/]+)", self._heartbeat)
        self.route("GET", r"/nnrf-disc/v1/nf-instances", self._discover)

    async def _register(self, request: HttpRequest, instance_id: str) -> HttpResponse:
        try:
            doc = dict(request.json() or {})
            doc["nfInstanceId"] = instance_id
            doc["lastHeartbeat"] = self.rt.now_us()
            profile = NfProfile.from_dict(doc)
            self.registry.register(profile)
        except DuplicateInstanceId:
            return json_response(409, {"cause": "DuplicateInstanceId", "nfInstanceId": instance_id})
        except (KeyError, TypeError, ValueError) as exc:
            return json_response(400, {"cause": "MANDATORY_IE_INCORRECT", "detail": str(exc)})
        # the registrant learns about its new status in a separate notification
        task = self.rt.spawn(self._notify(profile, incoming_traceparent(request)))
        self._notifications.append(task)
        return json_response(201, profile.to_dict(with_timestamps=False))

    async def _notify(self, profile: NfProfile, traceparent: str | None) -> None:
        body = {"event": "NF_REGISTERED", "nfInstanceId": profile.instance_id, "nfStatus": "REGISTERED"}
        await self.call("POST", NF_NOTIFY_PATH, profile.kind, body, traceparent)

    async def drain_notifications(self) -> None:
        pending, self._notifications = self._notifications, []
        if pending:
            await self.rt.gather(*pending, return_exceptions=True)

    async def _heartbeat(self, request: HttpRequest, instance_id: str) -> HttpResponse:
        try:
            profile = self.registry.heartbeat(instance_id, request.json() or {}, self.rt.now_us())
        except UnknownInstance:
            return json_response(404, {"cause": "UnknownInstance", "nfInstanceId": instance_id})
        return json_response(200, profile.to_dict(with_timestamps=False))

    async def _discover(self, request: HttpRequest) -> HttpResponse:
        target = request.query.get("target-nf-type")
        try:
            kind = VnfKind.parse(target or "")
            profile = self.registry.discover(kind)
        except ValueError as exc:
            return json_response(400, {"cause": "INVALID_QUERY_PARAM", "detail": str(exc)})
        except NoInstanceAvailable as exc:
            return json_response(404, {"cause": "NoInstanceAvailable", "detail": str(exc)})
        return json_response(200, {"nfInstances": [profile.to_dict(with_timestamps=False)]})
