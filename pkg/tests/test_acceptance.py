"""Acceptance checks, one test per criterion.

Each test carries a ``criterion`` mark; ``conftest.py`` prints one
PASS/FAIL line per criterion at the end of the session.
"""

import statistics
import time
from collections import Counter

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from capifsim.harness import ExperimentSpec, predict_breakdown, run_experiment, run_experiment_detailed
from capifsim.model import COUNTED_CATEGORIES, Category, Strategy, VnfKind, ZoneId, catalog
from capifsim.netem import DelayMode, LatencyEmulator, bundled_topology, topology_from_dict
from capifsim.telemetry import Side
from capifsim.vnf import CoreOptions, ProcessingModel

from support import boot_and_run, virtual_core

Z = ZoneId.parse
TOPO = bundled_topology()
EDGES = TOPO.edge_zones()
US_CITIES = ["atl", "nyc", "chi", "den", "sea", "lax"]


def criterion(number, title):
    return pytest.mark.criterion(number, title)


# 1 ------------------------------------------------------------------------------------


@criterion(1, "catalog oracle: 1-UE virtual run yields exactly the catalog spans")
def test_c01_catalog_oracle(tmp_path):
    t0 = time.perf_counter()
    vc = virtual_core(tmp_path)
    summary = vc.run(lambda core: boot_and_run(core, 1))
    elapsed = time.perf_counter() - t0
    assert summary.ok
    spans = vc.store.spans()
    got = Counter((s.transaction.id, s.side) for s in spans)
    want = Counter((m.id, side) for m in catalog() for side in Side)
    assert got == want
    per_cat = Counter(s.category for s in spans if s.side is Side.SENDER)
    assert per_cat == {Category.NRF_REGISTER: 6, Category.FIVE_G_AKA: 3,
                       Category.HN_INTERNAL: 2, Category.SESSION_SETUP: 6}
    assert all(t.is_tree() for t in vc.traces())
    assert elapsed < 5.0, f"took {elapsed:.2f}s"


# 2 ------------------------------------------------------------------------------------


@criterion(2, "predictor equals virtual-time simulation for 4 strategies x 18 zones")
def test_c02_predictor_equivalence():
    t0 = time.perf_counter()
    mismatches = []
    for edge in EDGES:
        for strategy in Strategy:
            spec = ExperimentSpec(strategy, edge, topology=TOPO, runs=1)
            sim = run_experiment(spec)
            pred = predict_breakdown(spec)
            if sim.category_means_us != pred.category_means_us:
                mismatches.append((strategy.value, str(edge), "categories"))
            for a, b in zip(sim.transactions, pred.transactions):
                if (a.message_id, a.mean_us) != (b.message_id, b.mean_us):
                    mismatches.append((strategy.value, str(edge), a.message_id))
    elapsed = time.perf_counter() - t0
    assert len(EDGES) == 18
    assert mismatches == []
    assert elapsed < 120, f"took {elapsed:.1f}s"
    # spot values from the RTT table
    urllc_nyc = predict_breakdown(ExperimentSpec(Strategy.URLLC_USER, Z("nyc-lz"), runs=1))
    assert urllc_nyc.transaction("context-creation").mean_us == 8050 + 2000
    urllc_lon = predict_breakdown(ExperimentSpec(Strategy.URLLC_USER, Z("lon-wz"), runs=1))
    assert urllc_lon.transaction("context-creation").mean_us == 3870 + 2000


# 3 ------------------------------------------------------------------------------------


@criterion(3, "zero-RTT Monolithic total equals the processing sum")
@pytest.mark.parametrize("processing", [
    ProcessingModel.uniform(1.0),
    ProcessingModel(0.75, {(VnfKind.SMF, "context-creation"): 3.0, (VnfKind.NRF, "smf-discovery"): 0.2,
                           (VnfKind.UDM, "auth-data"): 9.0}),
], ids=["uniform-1ms", "mixed"])
def test_c03_degenerate_baseline(processing):
    spec = ExperimentSpec(Strategy.MONOLITHIC, Z("use1-az"), runs=1, rtt_override_ms=0.0, processing=processing)
    report = run_experiment(spec)
    expected = sum(processing.us(m.src, m.id) + processing.us(m.dst, m.id)
                   for m in catalog() if m.category in COUNTED_CATEGORIES)
    assert report.total_latency_us == expected
    if processing == ProcessingModel.uniform(1.0):
        # 15 counted transactions, two charged endpoints each
        assert report.total_latency_ms == 30.0


# 4 ------------------------------------------------------------------------------------


@st.composite
def edge_topologies(draw):
    intra = draw(st.floats(0.0, 5.0))
    extra = draw(st.floats(0.01, 80.0))
    p50 = round(intra + extra, 3)
    p90 = round(p50 + draw(st.floats(0.0, 10.0)), 3)
    p99 = round(p90 + draw(st.floats(0.0, 10.0)), 3)
    kind = draw(st.sampled_from(["lz", "wz"]))
    doc = {
        "name": "random",
        "zones": [f"e1-{kind}", "r1-az"],
        "links": [{"a": f"e1-{kind}", "b": "r1-az", "p50": p50, "p90": p90, "p99": p99}],
        "intraZoneRttMs": intra,
    }
    return topology_from_dict(doc), Z(f"e1-{kind}"), draw(st.sampled_from(["p50", "p90", "p99"]))


@criterion(4, "McsStatic raises FiveGAka and lowers SessionSetup vs UrllcUser")
@given(edge_topologies())
@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_c04_finding_one(case):
    topo, edge, pct = case
    mode = DelayMode.parse(pct)
    urllc = run_experiment(ExperimentSpec(Strategy.URLLC_USER, edge, topology=topo, delay_mode=mode, runs=1))
    static = run_experiment(ExperimentSpec(Strategy.MCS_STATIC, edge, topology=topo, delay_mode=mode, runs=1))
    aka, setup = Category.FIVE_G_AKA, Category.SESSION_SETUP
    assert static.category_means_us[aka] > urllc.category_means_us[aka]
    assert static.category_means_us[setup] < urllc.category_means_us[setup]


# 5 ------------------------------------------------------------------------------------


@criterion(5, "McsMobile lowers SessionSetup and NrfRegister vs McsStatic in every zone")
def test_c05_finding_two():
    failures = []
    for edge in EDGES:
        static = run_experiment(ExperimentSpec(Strategy.MCS_STATIC, edge, runs=1))
        mobile = run_experiment(ExperimentSpec(Strategy.MCS_MOBILE, edge, runs=1))
        for cat in (Category.SESSION_SETUP, Category.NRF_REGISTER):
            if not mobile.category_means_us[cat] < static.category_means_us[cat]:
                failures.append((str(edge), cat.value))
    assert failures == []


# 6 ------------------------------------------------------------------------------------


@criterion(6, "LZ total < WZ total for the six US cities under every strategy")
def test_c06_lz_beats_wz():
    violations = []
    for city in US_CITIES:
        for strategy in Strategy:
            lz = predict_breakdown(ExperimentSpec(strategy, Z(f"{city}-lz"), runs=1))
            wz = predict_breakdown(ExperimentSpec(strategy, Z(f"{city}-wz"), runs=1))
            if not lz.total_latency_us < wz.total_latency_us:
                violations.append(f"{city}/{strategy.value}: LZ {lz.total_latency_ms} ms, WZ {wz.total_latency_ms} ms")
    # Monolithic keeps every VNF in the AZ, so its LZ and WZ totals coincide
    assert violations == []


# 7 ------------------------------------------------------------------------------------


@criterion(7, "stochastic mode reproduces p50/p90/p99 within 5% over 10^4 draws")
def test_c07_stochastic_calibration():
    t0 = time.perf_counter()
    worst = []
    for edge in EDGES:
        az = TOPO.anchor_az(edge)
        link = TOPO.link(edge, az)
        em = LatencyEmulator(TOPO, DelayMode.stochastic(42))
        draws = [em.rtt_us(edge, az) / 1000.0 for _ in range(10_000)]
        cuts = statistics.quantiles(draws, n=100, method="inclusive")
        for pct, target in ((50, link.rtt_p50), (90, link.rtt_p90), (99, link.rtt_p99)):
            err = abs(cuts[pct - 1] - target) / target
            worst.append((err, str(edge), pct))
    elapsed = time.perf_counter() - t0
    bad = [w for w in worst if w[0] >= 0.05]
    assert bad == []
    assert elapsed < 30, f"took {elapsed:.1f}s"


# 8 ------------------------------------------------------------------------------------


@pytest.mark.wall
@criterion(8, "wall-clock per-transaction means within 5 ms of virtual time")
def test_c08_wall_clock_fidelity():
    wall = run_experiment(ExperimentSpec(Strategy.URLLC_USER, Z("nyc-lz"), runs=10, clock="wall"))
    virtual = run_experiment(ExperimentSpec(Strategy.URLLC_USER, Z("nyc-lz"), runs=1))
    assert wall.runs == 10, wall.failed_runs
    deviations = {a.message_id: abs(a.mean_us - b.mean_us) / 1000.0
                  for a, b in zip(wall.transactions, virtual.transactions)}
    over = {k: v for k, v in deviations.items() if v >= 5.0}
    assert over == {}, over


# 9 ------------------------------------------------------------------------------------


def _payloads(outcome):
    return {kind: [(r.method, r.target, r.request_body, r.status, r.response_body) for r in records]
            for kind, records in outcome.app_calls["served"].items()}


def _differential(clock, runs):
    base = dict(strategy=Strategy.MONOLITHIC, edge=Z("use1-az"), runs=runs, clock=clock, ue_count=3,
                rtt_override_ms=0.0, processing=ProcessingModel.uniform(0.0))
    on = run_experiment_detailed(ExperimentSpec(**base))
    off = run_experiment_detailed(ExperimentSpec(**base, passthrough=True))
    return on, off


@criterion(9, "tracing is transparent: identical payloads, per-hop overhead < 1 ms")
def test_c09_transparency_virtual():
    on, off = _differential("virtual", 1)
    assert _payloads(on.outcomes[0]) == _payloads(off.outcomes[0])
    assert len(on.outcomes[0].store) > 0 and len(off.outcomes[0].store) == 0


@pytest.mark.wall
@criterion(9, "tracing is transparent: identical payloads, per-hop overhead < 1 ms")
def test_c09_transparency_and_overhead_wall():
    on, off = _differential("wall", 5)
    assert not on.failures and not off.failures
    for a, b in zip(on.outcomes, off.outcomes):
        assert _payloads(a) == _payloads(b)

    def hop_times(result):
        times: dict[tuple, list[int]] = {}
        for o in result.outcomes:
            for kind, records in o.app_calls["sent"].items():
                for r in records:
                    key = (kind, r.method, r.target.split("?")[0].split("/")[1])
                    times.setdefault(key, []).append(r.elapsed_us)
        return times

    t_on, t_off = hop_times(on), hop_times(off)
    assert t_on.keys() == t_off.keys()
    added = [statistics.median(t_on[k]) - statistics.median(t_off[k]) for k in t_on]
    median_added_ms = statistics.median(added) / 1000.0
    assert median_added_ms < 1.0, f"median added latency {median_added_ms:.3f} ms"


# 10 -----------------------------------------------------------------------------------


@criterion(10, "seeded virtual experiments are byte-identical")
@pytest.mark.parametrize("mode", ["p50", "stochastic"])
def test_c10_determinism(tmp_path, mode):
    spec = ExperimentSpec(Strategy.MCS_MOBILE, Z("tyo-wz"), runs=3, seed=7, ue_count=4, concurrent=True,
                          delay_mode=DelayMode.parse(mode, seed=7))
    a = run_experiment_detailed(spec, tmp_path / "a")
    b = run_experiment_detailed(spec, tmp_path / "b")
    assert a.report.to_json() == b.report.to_json()
    for x, y in zip(a.outcomes, b.outcomes):
        assert [(s.start_us, s.duration_us) for s in x.store.spans()] == \
               [(s.start_us, s.duration_us) for s in y.store.spans()]
        assert x.store.path.read_bytes() == y.store.path.read_bytes()


# 11 -----------------------------------------------------------------------------------


@criterion(11, "telemetry conservation over a 10-UE concurrent run, no orphans")
@pytest.mark.parametrize("clock", ["virtual", pytest.param("wall", marks=pytest.mark.wall)])
def test_c11_conservation(clock):
    spec = ExperimentSpec(Strategy.URLLC_USER, Z("nyc-lz"), runs=1, ue_count=10, concurrent=True, clock=clock)
    result = run_experiment_detailed(spec)
    assert not result.failures, result.failures
    outcome = result.outcomes[0]
    e = outcome.exported
    assert e.emitted == len(outcome.store) + e.dropped + outcome.agent_rejected
    assert outcome.conserved
    assert e.emitted == 2 * (6 + 10 * 11)
    assert sum(len(t.orphans) for t in outcome.traces) == 0


@criterion(11, "telemetry conservation over a 10-UE concurrent run, no orphans")
def test_c11_conservation_under_drops(tmp_path):
    vc = virtual_core(tmp_path, options=CoreOptions(buffer_cap=3, batch_size=64))
    summary = vc.run(lambda core: boot_and_run(core, 10, concurrent=True))
    assert summary.ok
    totals = vc.core.export_totals()
    assert totals.dropped > 0
    assert totals.emitted == len(vc.store) + totals.dropped + vc.agent.counters.rejected
