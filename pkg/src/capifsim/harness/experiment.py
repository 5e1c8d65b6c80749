"""End-to-end placement experiments."""

from __future__ import annotations

import gc
import logging
import os
import random
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import CapifSimError, ConfigError
from ..model import Placement, Strategy, VnfKind, ZoneId, ZoneKind, placement
from ..netem.latency import DelayKind, DelayMode, LatencyEmulator
from ..netem.topology import NoLinkProfile, Topology, bundled_topology
from ..runtime import AsyncioRuntime, VirtualRuntime
from ..telemetry.pipeline import Agent, Collector
from ..telemetry.query import query
from ..telemetry.span import Trace
from ..telemetry.store import STORE_SUFFIX, SpanStore
from ..vnf.core import CoreNetwork, CoreOptions, ExportTotals, build_core, free_ports
from ..vnf.gnbsim import RunSummary
from ..vnf.processing import ProcessingModel
from .breakdown import RunBreakdown, breakdown_run
from .report import BreakdownReport, aggregate

log = logging.getLogger(__name__)

CLOCKS = ("virtual", "wall")

# background span flushes compete with the proxies for the event loop; a
# long interval keeps them out of the measured request paths
WALL_FLUSH_INTERVAL_US = 250_000


class RunFailed(CapifSimError):
    def __init__(self, run_index: int, cause: str):
        super().__init__(f"run {run_index} failed: {cause}")
        self.run_index = run_index
        self.cause = cause


@dataclass(frozen=True)
class ExperimentSpec:
    strategy: Strategy
    edge: ZoneId
    az: ZoneId | None = None
    topology: Topology = field(default_factory=bundled_topology)
    delay_mode: DelayMode = field(default_factory=DelayMode.deterministic_p50)
    processing: ProcessingModel = field(default_factory=ProcessingModel)
    ue_count: int = 1
    runs: int = 10
    seed: int = 0
    clock: str = "virtual"
    concurrent: bool = False
    rtt_override_ms: float | None = None
    passthrough: bool = False
    omit_hn_internal: bool = True
    buffer_cap: int = 10_000
    # fixed application ports per VNF; None picks free loopback ports
    app_ports: dict[VnfKind, int] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.ue_count < 1:
            raise ConfigError(f"ueCount must be a positive integer, got {self.ue_count}")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if self.clock not in CLOCKS:
            raise ConfigError(f"clock must be one of {', '.join(CLOCKS)}, got {self.clock!r}")
        if not self.topology.has_zone(self.edge):
            raise ConfigError(f"zone {self.edge} is not in topology {self.topology.name}")
        if self.az is None:
            try:
                az = self.edge if self.edge.kind is ZoneKind.AZ else self.topology.anchor_az(self.edge)
            except NoLinkProfile as exc:
                raise ConfigError(str(exc)) from exc
            object.__setattr__(self, "az", az)
        if not self.topology.has_zone(self.az):
            raise ConfigError(f"zone {self.az} is not in topology {self.topology.name}")
        try:
            self.placement
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def effective_topology(self) -> Topology:
        if self.rtt_override_ms is None:
            return self.topology
        return self.topology.with_rtt_override(self.rtt_override_ms)

    @property
    def placement(self) -> Placement:
        assert self.az is not None
        return placement(self.strategy, self.edge, self.az)

    def run_seed(self, index: int) -> str:
        return f"{self.seed}:{index}"

    def report_meta(self) -> dict:
        topo = self.effective_topology
        return {
            "strategy": self.strategy,
            "edge_zone": str(self.edge),
            "az_zone": str(self.az),
            "topology": topo.name,
            "topology_fingerprint": topo.fingerprint,
            "delay_mode": self.delay_mode.label,
            "ue_count": self.ue_count,
        }


@dataclass
class RunOutcome:
    index: int
    summary: RunSummary
    store: SpanStore
    traces: list[Trace]
    breakdown: RunBreakdown
    exported: ExportTotals
    agent_rejected: int
    duration_us: int
    app_calls: dict = field(default_factory=dict)

    @property
    def conserved(self) -> bool:
        e = self.exported
        return e.emitted == len(self.store) + e.dropped + self.agent_rejected and e.pending == 0


def _latency_for(spec: ExperimentSpec, index: int) -> LatencyEmulator:
    mode = spec.delay_mode
    seed = None
    if mode.kind is DelayKind.STOCHASTIC:
        # one independent, reproducible stream per run
        seed = random.Random(f"{mode.seed}:{spec.run_seed(index)}").getrandbits(63)
    return LatencyEmulator(spec.effective_topology, mode, seed)


def _env_port(name: str) -> int:
    raw = os.environ.get(name)
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a port number, got {raw!r}") from None


async def _drive(core: CoreNetwork, spec: ExperimentSpec) -> RunSummary:
    await core.start()
    try:
        await core.boot()
        summary = await core.run_ues(spec.ue_count, concurrent=spec.concurrent)
        await core.flush()
    finally:
        await core.close()
    return summary


def _run_virtual(spec: ExperimentSpec, index: int, store: SpanStore):
    from ..http import VirtualNetwork

    rt = VirtualRuntime()
    agent = Agent(Collector(store))
    core = build_core(rt, VirtualNetwork(), spec.placement, _latency_for(spec, index), spec.processing,
                      agent.ingest, seed=spec.run_seed(index), ports=spec.app_ports,
                      options=CoreOptions(passthrough=spec.passthrough, buffer_cap=spec.buffer_cap))
    summary = rt.run(_drive(core, spec))
    return rt, core, agent, summary


def _run_wall(spec: ExperimentSpec, index: int, store: SpanStore):
    import asyncio

    from ..http import AiohttpNetwork
    from ..scp.exporter import tcp_sink
    from ..telemetry.wire import NdjsonClient

    rt = AsyncioRuntime()

    async def main():
        collector = Collector(store, offload=True)
        cserver = await collector.serve(port=_env_port("CAPIFSIM_COLLECTOR_PORT"))
        agent = Agent(NdjsonClient(cserver.host, cserver.port))
        aserver = await agent.serve(port=_env_port("CAPIFSIM_AGENT_PORT"))
        client = NdjsonClient(aserver.host, aserver.port)
        network = AiohttpNetwork()
        core = build_core(rt, network, spec.placement, _latency_for(spec, index), spec.processing,
                          tcp_sink(client), seed=spec.run_seed(index), ports=spec.app_ports or free_ports(),
                          options=CoreOptions(passthrough=spec.passthrough, buffer_cap=spec.buffer_cap,
                                              flush_interval_us=WALL_FLUSH_INTERVAL_US))
        try:
            summary = await _drive(core, spec)
        finally:
            await client.close()
            await network.close()
            await agent.close()
            await collector.close()
            await asyncio.sleep(0)
        return core, agent, summary

    # a collector pass over a large heap can stall the loop for several ms in
    # the middle of a transaction; collect up front and keep it off while timing
    gc.collect()
    gc.disable()
    try:
        core, agent, summary = rt.run(main())
    finally:
        gc.enable()
    return rt, core, agent, summary


def execute_run(spec: ExperimentSpec, index: int, store_path: str | Path) -> RunOutcome:
    """One boot + UE run into a fresh store; raises RunFailed on any problem."""
    path = Path(store_path)
    if path.exists():
        path.unlink()
    try:
        store = SpanStore(path, clock=spec.clock)
        runner = _run_virtual if spec.clock == "virtual" else _run_wall
        rt, core, agent, summary = runner(spec, index, store)
    except RunFailed:
        raise
    except Exception as exc:  # noqa: BLE001 - one bad run must not sink the experiment
        raise RunFailed(index, f"{type(exc).__name__}: {exc}") from exc
    if not summary.ok:
        first = summary.failures[0]
        raise RunFailed(index, f"{len(summary.failures)} UE(s) failed, first {first.ue_id}: {first.error}")
    traces = query(store)
    try:
        breakdown = breakdown_run(traces) if not spec.passthrough else RunBreakdown()
    except CapifSimError as exc:
        raise RunFailed(index, f"{type(exc).__name__}: {exc}") from exc
    duration = rt.now_us() if isinstance(rt, VirtualRuntime) else 0
    calls = {kind.value: list(app.sent) for kind, app in core.apps.items()}
    served = {kind.value: list(app.served) for kind, app in core.apps.items()}
    return RunOutcome(index, summary, store, traces, breakdown, core.export_totals(),
                      agent.counters.rejected, duration, {"sent": calls, "served": served})


@dataclass
class ExperimentResult:
    report: BreakdownReport
    outcomes: list[RunOutcome]
    failures: list[RunFailed]


def run_experiment_detailed(spec: ExperimentSpec, store_dir: str | Path | None = None) -> ExperimentResult:
    outcomes: list[RunOutcome] = []
    failures: list[RunFailed] = []
    tmp = None
    if store_dir is None:
        env_dir = os.environ.get("CAPIFSIM_STORE_DIR")
        if env_dir:
            store_dir = env_dir
        else:
            tmp = tempfile.TemporaryDirectory(prefix="capifsim-")
            store_dir = tmp.name
    Path(store_dir).mkdir(parents=True, exist_ok=True)
    try:
        for i in range(spec.runs):
            path = Path(store_dir) / f"run{i}{STORE_SUFFIX}"
            try:
                outcomes.append(execute_run(spec, i, path))
            except RunFailed as exc:
                log.warning("%s", exc)
                failures.append(exc)
    finally:
        if tmp is not None:
            tmp.cleanup()
    if not outcomes:
        raise RunFailed(failures[0].run_index, f"all {spec.runs} runs failed; first: {failures[0].cause}")
    report = aggregate([o.breakdown for o in outcomes], spec.omit_hn_internal,
                       runs_requested=spec.runs,
                       failed_runs=[{"run": f.run_index, "cause": f.cause} for f in failures],
                       **spec.report_meta())
    return ExperimentResult(report, outcomes, failures)


def run_experiment(spec: ExperimentSpec, store_dir: str | Path | None = None) -> BreakdownReport:
    """Run ``spec.runs`` independent runs and average their breakdowns.

    Failed runs are left out of the means and listed in ``failed_runs``.
    """
    return run_experiment_detailed(spec, store_dir).report
