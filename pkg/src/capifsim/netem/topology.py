"""Zones, inter-zone RTT profiles and topology files."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

from ..errors import CapifSimError, ConfigError
from ..model import ZoneId, ZoneKind

BUNDLED_TOPOLOGY = "aws_edge_2023.json"
DEFAULT_INTRA_ZONE_RTT_MS = 0.2


class NoLinkProfile(CapifSimError, LookupError):
    """No RTT profile exists between two distinct zones."""


class TopologyError(ConfigError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class LinkProfile:
    a: ZoneId
    b: ZoneId
    rtt_p50: float
    rtt_p90: float
    rtt_p99: float

    def __post_init__(self):
        if not (0 <= self.rtt_p50 <= self.rtt_p90 <= self.rtt_p99):
            raise ValueError(
                f"{self.a}<->{self.b}: need 0 <= p50 <= p90 <= p99, "
                f"got {self.rtt_p50}/{self.rtt_p90}/{self.rtt_p99}"
            )

    @property
    def pair(self) -> frozenset[ZoneId]:
        return frozenset((self.a, self.b))

    def to_dict(self) -> dict:
        return {"a": str(self.a), "b": str(self.b),
                "p50": self.rtt_p50, "p90": self.rtt_p90, "p99": self.rtt_p99}


@dataclass(frozen=True)
class Topology:
    zones: frozenset[ZoneId]
    links: tuple[LinkProfile, ...]
    intra_zone_rtt_ms: float = DEFAULT_INTRA_ZONE_RTT_MS
    name: str = "custom"
    labels: dict[str, str] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        problems = _structural_violations(self.zones, self.links, self.intra_zone_rtt_ms)
        if problems:
            raise TopologyError(problems)
        object.__setattr__(self, "_by_pair", {l.pair: l for l in self.links})

    def link(self, a: ZoneId, b: ZoneId) -> LinkProfile:
        try:
            return self._by_pair[frozenset((a, b))]  # type: ignore[attr-defined]
        except KeyError:
            raise NoLinkProfile(f"no RTT profile between {a} and {b}") from None

    def has_zone(self, zone: ZoneId) -> bool:
        return zone in self.zones

    def edge_zones(self) -> list[ZoneId]:
        return sorted(z for z in self.zones if z.is_edge)

    def anchor_az(self, edge: ZoneId) -> ZoneId:
        """The AZ an edge zone is linked to (its parent region's AZ)."""
        azs = sorted(
            (l.b if l.a == edge else l.a)
            for l in self.links
            if edge in (l.a, l.b) and ZoneKind.AZ in (l.a.kind, l.b.kind)
        )
        azs = [z for z in azs if z.kind is ZoneKind.AZ]
        if not azs:
            raise NoLinkProfile(f"{edge} has no link to an AZ")
        return azs[0]

    def with_rtt_override(self, rtt_ms: float) -> "Topology":
        """Copy with every RTT (intra-zone included) forced to ``rtt_ms``."""
        links = tuple(replace(l, rtt_p50=rtt_ms, rtt_p90=rtt_ms, rtt_p99=rtt_ms) for l in self.links)
        return Topology(self.zones, links, rtt_ms, f"{self.name}@rtt={rtt_ms}", dict(self.labels))

    def to_dict(self) -> dict:
        doc: dict[str, Any] = {
            "name": self.name,
            "zones": sorted(str(z) for z in self.zones),
            "links": [l.to_dict() for l in self.links],
            "intraZoneRttMs": self.intra_zone_rtt_ms,
        }
        if self.labels:
            doc["labels"] = dict(sorted(self.labels.items()))
        return doc

    @property
    def fingerprint(self) -> str:
        doc = self.to_dict()
        doc.pop("labels", None)
        doc.pop("name", None)
        doc["links"] = sorted(doc["links"], key=lambda l: (l["a"], l["b"]))
        raw = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(raw).hexdigest()[:16]


def _structural_violations(zones: Iterable[ZoneId], links: Iterable[LinkProfile],
                           intra_ms: float) -> list[str]:
    zones = set(zones)
    out: list[str] = []
    if intra_ms < 0:
        out.append(f"intraZoneRttMs must be >= 0, got {intra_ms}")
    seen: set[frozenset] = set()
    for l in links:
        name = f"{l.a}<->{l.b}"
        for end in (l.a, l.b):
            if end not in zones:
                out.append(f"{name}: zone {end} is not declared")
        if l.a == l.b:
            out.append(f"{name}: link endpoints must differ")
        if l.pair in seen:
            out.append(f"{name}: duplicate profile for this zone pair")
        seen.add(l.pair)
        if {l.a.kind, l.b.kind} == {ZoneKind.LZ, ZoneKind.WZ}:
            out.append(f"{name}: no direct connectivity exists between LZs and WZs")
    return out


def validate_document(doc: Any) -> list[str]:
    """Every problem found in a topology JSON document (empty list when valid)."""
    if not isinstance(doc, dict):
        return ["topology must be a JSON object"]
    out: list[str] = []
    zones: set[ZoneId] = set()
    for raw in doc.get("zones", []):
        try:
            zones.add(ZoneId.parse(raw))
        except ValueError as exc:
            out.append(f"zone {raw!r}: {exc}")
    if not zones:
        out.append("topology declares no zones")
    links: list[LinkProfile] = []
    for i, raw in enumerate(doc.get("links", [])):
        try:
            a, b = ZoneId.parse(raw["a"]), ZoneId.parse(raw["b"])
            p50, p90, p99 = (float(raw[k]) for k in ("p50", "p90", "p99"))
        except (KeyError, TypeError, ValueError) as exc:
            out.append(f"link #{i}: malformed ({exc})")
            continue
        if not (0 <= p50 <= p90 <= p99):
            out.append(f"{a}<->{b}: percentiles not monotone (p50={p50}, p90={p90}, p99={p99})")
            continue
        links.append(LinkProfile(a, b, p50, p90, p99))
    try:
        intra = float(doc.get("intraZoneRttMs", DEFAULT_INTRA_ZONE_RTT_MS))
    except (TypeError, ValueError):
        out.append("intraZoneRttMs must be a number")
        intra = 0.0
    out.extend(_structural_violations(zones, links, intra))
    return out


def topology_from_dict(doc: dict) -> Topology:
    problems = validate_document(doc)
    if problems:
        raise TopologyError(problems)
    links = tuple(
        LinkProfile(ZoneId.parse(l["a"]), ZoneId.parse(l["b"]),
                    float(l["p50"]), float(l["p90"]), float(l["p99"]))
        for l in doc.get("links", [])
    )
    return Topology(
        zones=frozenset(ZoneId.parse(z) for z in doc["zones"]),
        links=links,
        intra_zone_rtt_ms=float(doc.get("intraZoneRttMs", DEFAULT_INTRA_ZONE_RTT_MS)),
        name=str(doc.get("name", "custom")),
        labels=dict(doc.get("labels", {})),
    )


def load_topology(path: str | Path) -> Topology:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read topology {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"topology {path} is not valid JSON: {exc}") from exc
    return topology_from_dict(doc)


def bundled_topology_document() -> dict:
    text = resources.files("capifsim.netem").joinpath("data", BUNDLED_TOPOLOGY).read_text()
    return json.loads(text)


def bundled_topology() -> Topology:
    """The AWS edge measurements of April 2023: every edge zone linked to its parent AZ."""
    return topology_from_dict(bundled_topology_document())
