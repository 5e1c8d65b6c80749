"""Domain vocabulary: VNF kinds, zones, the control-plane message catalog and
placement strategies.

Everything in this module is immutable once built and can be shared freely.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Mapping

from .errors import CapifSimError


class UnknownMessage(CapifSimError, KeyError):
    """The (method, path, src, dst) tuple is not part of the catalog."""


class InvalidZoneKind(CapifSimError, ValueError):
    """A zone of the wrong kind was passed to a placement."""


def _norm(label: str) -> str:
    return re.sub(r"[\s_\-]", "", label).lower()


class VnfKind(str, Enum):
    NRF = "NRF"
    AMF = "AMF"
    SMF = "SMF"
    UPF = "UPF"
    AUSF = "AUSF"
    UDM = "UDM"
    UDR = "UDR"
    # gNB and UE signalling are driven from one sandbox
    UE_GNB = "UE_GNB"

    @classmethod
    def parse(cls, label: str) -> "VnfKind":
        key = _norm(label)
        for kind in cls:
            if _norm(kind.value) == key:
                return kind
        raise ValueError(f"unknown VNF kind {label!r}; valid: {', '.join(k.value for k in cls)}")

    @property
    def host(self) -> str:
        """Hostname used when addressing this VNF through a sidecar."""
        return self.value.lower().replace("_", "-")


class ZoneKind(str, Enum):
    AZ = "az"
    LZ = "lz"
    WZ = "wz"


@dataclass(frozen=True, order=True)
class ZoneId:
    city: str
    kind: ZoneKind

    @classmethod
    def parse(cls, text: str) -> "ZoneId":
        """Parse the ``<city>-<kind>`` form, e.g. ``nyc-lz`` or ``use1-az``."""
        city, sep, kind = str(text).strip().lower().rpartition("-")
        if not sep or not city:
            raise ValueError(f"zone id must look like '<city>-<az|lz|wz>', got {text!r}")
        try:
            return cls(city, ZoneKind(kind))
        except ValueError:
            raise ValueError(f"unknown zone kind {kind!r} in {text!r}") from None

    @property
    def is_edge(self) -> bool:
        return self.kind is not ZoneKind.AZ

    def __str__(self) -> str:
        return f"{self.city}-{self.kind.value}"


class Category(str, Enum):
    FIVE_G_AKA = "FiveGAka"
    SESSION_SETUP = "SessionSetup"
    NRF_REGISTER = "NrfRegister"
    # AUSF <-> UDM <-> UDR exchanges, left out of total latency
    HN_INTERNAL = "HnInternal"

    @classmethod
    def parse(cls, label: str) -> "Category":
        key = _norm(label)
        for cat in cls:
            if key in (_norm(cat.value), _norm(cat.name)):
                return cat
        raise ValueError(f"unknown category {label!r}; valid: {', '.join(c.value for c in cls)}")


#: Categories summed into total latency.
COUNTED_CATEGORIES = (Category.FIVE_G_AKA, Category.SESSION_SETUP, Category.NRF_REGISTER)


@dataclass(frozen=True)
class CapifMessage:
    id: str
    method: str
    path: str
    src: VnfKind
    dst: VnfKind
    category: Category

    @property
    def service(self) -> str:
        """The leading service segment of the path, e.g. ``/nsmf-pdusession``."""
        return "/" + self.path.lstrip("/").split("/", 1)[0]

    @property
    def key(self) -> tuple[str, str, VnfKind, VnfKind]:
        return (self.method, self.path, self.src, self.dst)

    @property
    def per_ue(self) -> bool:
        """True when the transaction repeats for every UE rather than once per boot."""
        return self.category is not Category.NRF_REGISTER

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "method": self.method,
            "path": self.path,
            "src": self.src.value,
            "dst": self.dst.value,
            "category": self.category.value,
        }


def _m(id: str, method: str, path: str, src: VnfKind, dst: VnfKind, category: Category) -> CapifMessage:
    return CapifMessage(id, method, path, src, dst, category)


_A, _N, _S, _U = VnfKind.AMF, VnfKind.NRF, VnfKind.SMF, VnfKind.UPF
_AU, _UDM, _UDR, _UE = VnfKind.AUSF, VnfKind.UDM, VnfKind.UDR, VnfKind.UE_GNB
_REG, _AKA, _HN, _SS = Category.NRF_REGISTER, Category.FIVE_G_AKA, Category.HN_INTERNAL, Category.SESSION_SETUP

NF_INSTANCE_PATH = "/nnrf-nfm/v1/nf-instances/{nfInstanceId}"
NF_NOTIFY_PATH = "/nnrf-nfm/v1/nf-status-notify"
DISCOVERY_PATH = "/nnrf-disc/v1/nf-instances"

_CATALOG: tuple[CapifMessage, ...] = (
    _m("amf-register", "PUT", NF_INSTANCE_PATH, _A, _N, _REG),
    _m("smf-register", "PUT", NF_INSTANCE_PATH, _S, _N, _REG),
    _m("upf-register", "PUT", NF_INSTANCE_PATH, _U, _N, _REG),
    _m("nrf-amf-update", "POST", NF_NOTIFY_PATH, _N, _A, _REG),
    _m("nrf-smf-update", "POST", NF_NOTIFY_PATH, _N, _S, _REG),
    _m("nrf-upf-update", "POST", NF_NOTIFY_PATH, _N, _U, _REG),
    _m("ue-authentication", "POST", "/nausf-auth/v1/ue-authentications", _A, _AU, _AKA),
    _m("mutual-authentication", "POST", "/ngnb-nas/v1/ues/{ueId}/authentication-request", _A, _UE, _AKA),
    _m("auth-confirmation", "PUT",
       "/nausf-auth/v1/ue-authentications/{authCtxId}/5g-aka-confirmation", _A, _AU, _AKA),
    _m("auth-data", "POST",
       "/nudm-ueau/v1/{supi}/security-information/generate-auth-data", _AU, _UDM, _HN),
    _m("auth-subscription", "GET",
       "/nudr-dr/v1/subscription-data/{ueId}/authentication-data/authentication-subscription",
       _UDM, _UDR, _HN),
    _m("smf-discovery", "GET", DISCOVERY_PATH, _A, _N, _SS),
    _m("upf-discovery", "GET", DISCOVERY_PATH, _S, _N, _SS),
    _m("context-creation", "POST", "/nsmf-pdusession/v1/sm-contexts", _A, _S, _SS),
    _m("n1-n2-context", "POST", "/namf-comm/v1/ue-contexts/{ueId}/n1-n2-messages", _S, _A, _SS),
    _m("session-resource-setup", "POST",
       "/ngnb-ngap/v1/ues/{ueId}/pdu-session-resource-setup", _A, _UE, _SS),
    _m("context-update", "PATCH", "/nsmf-pdusession/v1/sm-contexts/{smContextRef}", _A, _S, _SS),
)

# NRF heartbeats travel through the sidecars like any other message but are
# not part of the experiment catalog.
HEARTBEATS: tuple[CapifMessage, ...] = tuple(
    _m(f"{kind.host}-heartbeat", "PATCH", NF_INSTANCE_PATH, kind, _N, _REG) for kind in (_A, _S, _U)
)

_BY_KEY = {m.key: m for m in _CATALOG}
_BY_ID = {m.id: m for m in _CATALOG + HEARTBEATS}
_BY_SERVICE = {(m.method, m.service, m.src, m.dst): m for m in _CATALOG + HEARTBEATS}

if len(_BY_KEY) != len(_CATALOG) or len(_BY_SERVICE) != len(_CATALOG) + len(HEARTBEATS):
    raise AssertionError("catalog keys must be unique")


def catalog() -> list[CapifMessage]:
    """Return the control-plane transactions of one boot + one UE, in procedure order."""
    return list(_CATALOG)


def message(message_id: str) -> CapifMessage:
    try:
        return _BY_ID[message_id]
    except KeyError:
        raise UnknownMessage(message_id) from None


def categorize(msg: CapifMessage) -> Category:
    entry = _BY_KEY.get(msg.key)
    if entry is None:
        raise UnknownMessage(f"{msg.method} {msg.path} {msg.src.value}->{msg.dst.value}")
    return entry.category


def find_transaction(method: str, service: str, src: VnfKind, dst: VnfKind) -> CapifMessage | None:
    """Match an observed request (method + service segment + endpoints) to its
    catalog entry or heartbeat.  Returns None for anything else."""
    return _BY_SERVICE.get((method.upper(), service, src, dst))


def is_heartbeat(msg: CapifMessage) -> bool:
    return msg in HEARTBEATS


def catalog_document() -> list[dict]:
    return [m.to_dict() for m in _CATALOG]


def catalog_json() -> str:
    return json.dumps(catalog_document(), indent=2) + "\n"


class Strategy(str, Enum):
    MONOLITHIC = "Monolithic"
    URLLC_USER = "UrllcUser"
    MCS_STATIC = "McsStatic"
    MCS_MOBILE = "McsMobile"

    @classmethod
    def parse(cls, label: str) -> "Strategy":
        key = _norm(label)
        for s in cls:
            if key in (_norm(s.value), _norm(s.name)):
                return s
        raise ValueError(
            f"unknown strategy {label!r}; valid: {', '.join(s.cli_name for s in cls)}"
        )

    @property
    def cli_name(self) -> str:
        return self.name.lower().replace("_", "-")

    @property
    def edge_vnfs(self) -> frozenset[VnfKind]:
        return _EDGE_SETS[self]


_URLLC_EDGE = frozenset({VnfKind.UPF, VnfKind.SMF, VnfKind.UE_GNB})
_EDGE_SETS = {
    Strategy.MONOLITHIC: frozenset(),
    Strategy.URLLC_USER: _URLLC_EDGE,
    Strategy.MCS_STATIC: _URLLC_EDGE | {VnfKind.AMF},
    Strategy.MCS_MOBILE: _URLLC_EDGE | {VnfKind.AMF, VnfKind.NRF},
}


class Placement(Mapping[VnfKind, ZoneId]):
    """Total, read-only map from every VNF kind to the zone hosting it."""

    __slots__ = ("_zones",)

    def __init__(self, zones: Mapping[VnfKind, ZoneId]):
        missing = set(VnfKind) - set(zones)
        if missing:
            raise ValueError(f"placement missing {sorted(k.value for k in missing)}")
        self._zones = {k: zones[k] for k in VnfKind}

    def __getitem__(self, kind: VnfKind) -> ZoneId:
        return self._zones[kind]

    def __iter__(self) -> Iterator[VnfKind]:
        return iter(self._zones)

    def __len__(self) -> int:
        return len(self._zones)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Placement) and self._zones == other._zones

    def __hash__(self) -> int:
        return hash(tuple(self._zones.items()))

    def __repr__(self) -> str:
        body = ", ".join(f"{k.value}={z}" for k, z in self._zones.items())
        return f"Placement({body})"

    def in_zone(self, zone: ZoneId) -> set[VnfKind]:
        return {k for k, z in self._zones.items() if z == zone}

    def crosses(self, msg: CapifMessage) -> bool:
        return self._zones[msg.src] != self._zones[msg.dst]


def placement(strategy: Strategy, edge: ZoneId, az: ZoneId) -> Placement:
    if az.kind is not ZoneKind.AZ:
        raise InvalidZoneKind(f"{az} is not an availability zone")
    if strategy is Strategy.MONOLITHIC:
        if edge != az and not edge.is_edge:
            raise InvalidZoneKind(f"{edge} must be an LZ/WZ or the AZ itself")
    elif not edge.is_edge:
        raise InvalidZoneKind(f"{strategy.value} needs an LZ or WZ edge zone, got {edge}")
    edge_set = strategy.edge_vnfs
    return Placement({k: (edge if k in edge_set else az) for k in VnfKind})

