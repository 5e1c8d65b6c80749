"""Wiring of a complete core: one application plus one sidecar per VNF."""

from __future__ import annotations

import logging
import socket
from dataclasses import dataclass

from ..model import Placement, VnfKind
from ..netem.latency import LatencyEmulator
from ..runtime import Runtime
from ..scp.exporter import Sink, SpanExporter
from ..scp.routes import Route, RouteTable, sidecar_port_for
from ..scp.sidecar import DEFAULT_DEADLINE_US, Sidecar
from ..scp.tracecontext import IdGenerator
from .base import VnfApp
from .functions import AmfApp, AusfApp, RegisteringApp, SmfApp, UdmApp, UdrApp, UpfApp
from .gnbsim import GnbSimApp, RunSummary
from .nrf import NrfApp
from .processing import ProcessingModel

log = logging.getLogger(__name__)

APP_CLASSES: dict[VnfKind, type[VnfApp]] = {
    VnfKind.NRF: NrfApp,
    VnfKind.AMF: AmfApp,
    VnfKind.SMF: SmfApp,
    VnfKind.UPF: UpfApp,
    VnfKind.AUSF: AusfApp,
    VnfKind.UDM: UdmApp,
    VnfKind.UDR: UdrApp,
    VnfKind.UE_GNB: GnbSimApp,
}

REGISTRATION_ORDER = (VnfKind.AMF, VnfKind.SMF, VnfKind.UPF)

LOOPBACK = "127.0.0.1"
VIRTUAL_BASE_PORT = 8000


def virtual_ports() -> dict[VnfKind, int]:
    """Fixed application ports for in-process runs (no sockets are opened)."""
    return {kind: VIRTUAL_BASE_PORT + 10 * i for i, kind in enumerate(VnfKind)}


def _port_free(port: int) -> bool:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            s.bind((LOOPBACK, port))
        except OSError:
            return False
    return True


def free_ports() -> dict[VnfKind, int]:
    """Application ports whose sidecar ports (port + offset) are also free."""
    ports: dict[VnfKind, int] = {}
    taken: set[int] = set()
    attempts = 0
    while len(ports) < len(VnfKind):
        attempts += 1
        if attempts > 500:
            raise RuntimeError("could not find free loopback ports")
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
            s.bind((LOOPBACK, 0))
            port = s.getsockname()[1]
        side = sidecar_port_for(port)
        if side > 65535 or port in taken or side in taken or not _port_free(side):
            continue
        kind = list(VnfKind)[len(ports)]
        ports[kind] = port
        taken.update((port, side))
    return ports


@dataclass
class CoreOptions:
    passthrough: bool = False
    deadline_us: int = DEFAULT_DEADLINE_US
    buffer_cap: int = 10_000
    batch_size: int = 256
    flush_interval_us: int | None = None


@dataclass
class ExportTotals:
    emitted: int = 0
    dropped: int = 0
    delivered: int = 0
    rejected: int = 0
    pending: int = 0


class CoreNetwork:
    """Boots the eight VNFs of one slice with their sidecars.

    ``span_sink`` receives every exported span batch; with no sink the
    sidecars still apply delays but record nothing.
    """

    def __init__(self, runtime: Runtime, network, placement: Placement, latency: LatencyEmulator,
                 processing: ProcessingModel, span_sink: Sink | None, ids: IdGenerator,
                 ports: dict[VnfKind, int] | None = None, options: CoreOptions | None = None):
        self.rt = runtime
        self.network = network
        self.placement = placement
        self.latency = latency
        self.processing = processing
        self.options = options or CoreOptions()
        self.ports = ports or virtual_ports()
        self.ids = ids
        self.apps: dict[VnfKind, VnfApp] = {}
        self.sidecars: dict[VnfKind, Sidecar] = {}
        self.exporters: dict[VnfKind, SpanExporter] = {}
        self._heartbeat_tasks: list = []
        self._stopped: set[VnfKind] = set()

        routes = {
            kind: Route(kind, f"{LOOPBACK}:{sidecar_port_for(self.ports[kind])}", self.ports[kind], placement[kind])
            for kind in VnfKind
        }
        for kind in VnfKind:
            app_address = f"{LOOPBACK}:{self.ports[kind]}"
            side_port = sidecar_port_for(self.ports[kind])
            table = RouteTable(kind, placement[kind], app_address, side_port)
            for other, route in routes.items():
                if other is not kind:
                    table.add(route, f"{other.host}-1")
            app = APP_CLASSES[kind](runtime, network, app_address, f"{LOOPBACK}:{side_port}", placement[kind])
            exporter = None
            if span_sink is not None:
                exporter = SpanExporter(runtime, span_sink, cap=self.options.buffer_cap,
                                        batch_size=self.options.batch_size,
                                        flush_interval_us=self.options.flush_interval_us)
                self.exporters[kind] = exporter
            sidecar = Sidecar(runtime, network, table, latency, processing, exporter, ids,
                              passthrough=self.options.passthrough, deadline_us=self.options.deadline_us)
            self.apps[kind] = app
            self.sidecars[kind] = sidecar

    # -- accessors ---------------------------------------------------------------

    @property
    def nrf(self) -> NrfApp:
        return self.apps[VnfKind.NRF]  # type: ignore[return-value]

    @property
    def amf(self) -> AmfApp:
        return self.apps[VnfKind.AMF]  # type: ignore[return-value]

    @property
    def smf(self) -> SmfApp:
        return self.apps[VnfKind.SMF]  # type: ignore[return-value]

    @property
    def gnbsim(self) -> GnbSimApp:
        return self.apps[VnfKind.UE_GNB]  # type: ignore[return-value]

    # -- lifecycle ---------------------------------------------------------------

    async def start(self) -> None:
        for kind in VnfKind:
            await self.apps[kind].start()
            await self.sidecars[kind].start()
        await self.network.ready()

    async def stop_vnf(self, kind: VnfKind) -> None:
        """Take a VNF (application and sidecar) off the network."""
        await self.apps[kind].stop()
        await self.sidecars[kind].stop()
        self._stopped.add(kind)

    def set_passthrough(self, on: bool) -> None:
        for sidecar in self.sidecars.values():
            sidecar.passthrough_mode(on)

    async def boot(self, register: tuple[VnfKind, ...] = REGISTRATION_ORDER) -> str | None:
        """Register the NF instances with the NRF, one procedure for all of them.

        Returns the traceparent of the procedure's first span.
        """
        root = None
        for kind in register:
            app = self.apps[kind]
            assert isinstance(app, RegisteringApp)
            response = await app.register_with_nrf(root)
            if root is None:
                root = response.headers.get("traceresponse")
        await self.nrf.drain_notifications()
        return root

    def start_heartbeats(self, period_us: int, count: int | None = None) -> None:
        for kind in REGISTRATION_ORDER:
            app = self.apps[kind]
            assert isinstance(app, RegisteringApp)
            self._heartbeat_tasks.append(self.rt.spawn(app.heartbeat_loop(period_us, count)))

    async def wait_heartbeats(self) -> None:
        tasks, self._heartbeat_tasks = self._heartbeat_tasks, []
        if tasks:
            await self.rt.gather(*tasks, return_exceptions=True)

    async def run_ues(self, ue_count: int, concurrent: bool = False, first_index: int = 1) -> RunSummary:
        return await self.gnbsim.run(self.amf, ue_count, concurrent=concurrent, first_index=first_index)

    async def flush(self) -> bool:
        ok = True
        for exporter in self.exporters.values():
            ok = await exporter.flush() and ok
        return ok

    def export_totals(self) -> ExportTotals:
        t = ExportTotals()
        for e in self.exporters.values():
            t.emitted += e.counters.emitted
            t.dropped += e.counters.dropped
            t.delivered += e.counters.delivered
            t.rejected += e.counters.rejected
            t.pending += e.pending
        return t

    async def close(self) -> None:
        for exporter in self.exporters.values():
            exporter.close()
        for task in self._heartbeat_tasks:
            task.cancel()
        self._heartbeat_tasks = []
        for kind in VnfKind:
            if kind not in self._stopped:
                await self.stop_vnf(kind)


def build_core(runtime: Runtime, network, placement: Placement, latency: LatencyEmulator,
               processing: ProcessingModel, span_sink: Sink | None, seed: int | str | None = 0,
               ports: dict[VnfKind, int] | None = None,
               options: CoreOptions | None = None) -> CoreNetwork:
    return CoreNetwork(runtime, network, placement, latency, processing, span_sink,
                       IdGenerator(f"ids:{seed}"), ports, options)

