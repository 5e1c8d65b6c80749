"""Sidecar route tables: where each destination's sidecar and app listen."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..errors import CapifSimError, ConfigError
from ..model import VnfKind, ZoneId

SIDECAR_PORT_OFFSET = 10016


def sidecar_port_for(app_port: int) -> int:
    """Default sidecar port, e.g. 80 -> 10096."""
    return app_port + SIDECAR_PORT_OFFSET


class UnknownRoute(CapifSimError, LookupError):
    """The request's destination has no entry in the route table."""


def split_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ConfigError(f"address must be host:port, got {address!r}")
    return host, int(port)


@dataclass(frozen=True)
class Route:
    kind: VnfKind
    sidecar_address: str
    app_port: int
    zone: ZoneId

    def __post_init__(self):
        _, port = split_address(self.sidecar_address)
        if port == self.app_port:
            raise ConfigError(
                f"route to {self.kind.value}: sidecar port and application port are both {port}"
            )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "sidecar": self.sidecar_address,
            "appPort": self.app_port,
            "zone": str(self.zone),
        }


@dataclass
class RouteTable:
    """Routing state of one sidecar.

    ``routes`` is keyed by VNF host name (``smf``, ``ue-gnb``) and may also
    hold instance ids pointing at the same :class:`Route`.
    """

    own_vnf: VnfKind
    own_zone: ZoneId
    app_address: str
    sidecar_port: int
    routes: dict[str, Route] = field(default_factory=dict)

    def __post_init__(self):
        _, app_port = split_address(self.app_address)
        if app_port == self.sidecar_port:
            raise ConfigError(f"{self.own_vnf.value}: sidecar port equals application port {app_port}")

    def add(self, route: Route, *aliases: str) -> None:
        for key in (route.kind.host, *aliases):
            self.routes[key.lower()] = route

    def resolve(self, host: str | None) -> Route:
        if not host:
            raise UnknownRoute("request has no Host header")
        name = host.strip().lower()
        if name.rpartition(":")[2].isdigit():
            name = name.rpartition(":")[0]
        route = self.routes.get(name)
        if route is None:
            try:
                route = self.routes.get(VnfKind.parse(name).host)
            except ValueError:
                route = None
        if route is None:
            raise UnknownRoute(f"{self.own_vnf.value} sidecar has no route for {host!r}")
        return route

    def to_dict(self) -> dict:
        return {
            "ownVnf": self.own_vnf.value,
            "zone": str(self.own_zone),
            "app": self.app_address,
            "sidecarPort": self.sidecar_port,
            "routes": {k: r.to_dict() for k, r in sorted(self.routes.items())},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "RouteTable":
        try:
            table = cls(
                VnfKind.parse(doc["ownVnf"]),
                ZoneId.parse(doc["zone"]),
                doc["app"],
                int(doc["sidecarPort"]),
            )
            for key, r in doc.get("routes", {}).items():
                route = Route(VnfKind.parse(r["kind"]), r["sidecar"], int(r["appPort"]), ZoneId.parse(r["zone"]))
                table.routes[key.lower()] = route
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad route table: {exc}") from exc
        return table


def load_route_table(path: str | Path) -> RouteTable:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read route table {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"route table {path} is not JSON: {exc}") from exc
    return RouteTable.from_dict(doc)
