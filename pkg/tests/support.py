"""Shared helpers for driving an in-process core under the virtual clock."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Awaitable, Callable

from capifsim.http import VirtualNetwork
from capifsim.model import Strategy, ZoneId, placement
from capifsim.netem import DelayMode, LatencyEmulator, Topology, bundled_topology
from capifsim.runtime import VirtualRuntime
from capifsim.telemetry import Agent, Collector, SpanStore, query
from capifsim.vnf import CoreNetwork, CoreOptions, ProcessingModel, build_core


@dataclass
class VirtualCore:
    rt: VirtualRuntime
    core: CoreNetwork
    store: SpanStore
    agent: Agent

    def run(self, body: Callable[[CoreNetwork], Awaitable]):
        async def main():
            await self.core.start()
            try:
                return await body(self.core)
            finally:
                await self.core.flush()
                await self.core.close()

        return self.rt.run(main())

    def traces(self, flt=None):
        return query(self.store, flt)


def virtual_core(tmp_path: Path, strategy: Strategy = Strategy.URLLC_USER, edge: str = "nyc-lz",
                 topology: Topology | None = None, processing: ProcessingModel | None = None,
                 seed: int | str = 0, options: CoreOptions | None = None,
                 mode: DelayMode | None = None, name: str = "run") -> VirtualCore:
    topo = topology or bundled_topology()
    e = ZoneId.parse(edge)
    az = e if not e.is_edge else topo.anchor_az(e)
    rt = VirtualRuntime()
    store = SpanStore(tmp_path / f"{name}.spans.jsonl")
    agent = Agent(Collector(store))
    core = build_core(rt, VirtualNetwork(), placement(strategy, e, az),
                      LatencyEmulator(topo, mode or DelayMode.deterministic_p50()),
                      processing or ProcessingModel(), agent.ingest, seed=seed, options=options)
    return VirtualCore(rt, core, store, agent)


async def boot_and_run(core: CoreNetwork, ues: int = 1, concurrent: bool = False):
    await core.boot()
    return await core.run_ues(ues, concurrent=concurrent)
