import csv
import io
import json

import pytest

from capifsim.errors import ConfigError
from capifsim.harness import (
    BreakdownReport,
    ExperimentSpec,
    IncompleteTrace,
    MismatchedTopology,
    RunFailed,
    breakdown_run,
    compare,
    compute_breakdown,
    predict_breakdown,
    run_experiment,
    run_experiment_detailed,
)
from capifsim.harness import experiment as experiment_mod
from capifsim.harness.predictor import transaction_latency_us
from capifsim.model import Category, Strategy, ZoneId, catalog, message
from capifsim.netem import DelayMode, bundled_topology, topology_from_dict
from capifsim.netem.topology import bundled_topology_document
from capifsim.telemetry import Side, Trace
from capifsim.vnf import ProcessingModel

from support import boot_and_run, virtual_core

Z = ZoneId.parse
NYC = Z("nyc-lz")


def spec(strategy=Strategy.URLLC_USER, edge=NYC, **kw):
    kw.setdefault("runs", 1)
    return ExperimentSpec(strategy, edge, **kw)


# -- predictor oracles -------------------------------------------------------------------


def test_predictor_examples():
    urllc = spec()
    assert transaction_latency_us(urllc, message("context-creation")) == 10_050
    assert transaction_latency_us(urllc, message("ue-authentication")) == 2_200
    static = spec(Strategy.MCS_STATIC)
    assert transaction_latency_us(static, message("ue-authentication")) == 10_050
    mono = spec(Strategy.MONOLITHIC, Z("use1-az"))
    assert {transaction_latency_us(mono, m) for m in catalog()} == {2_200}


def test_predictor_refuses_stochastic():
    with pytest.raises(ValueError):
        predict_breakdown(spec(delay_mode=DelayMode.stochastic(1)))


def test_predictor_scales_per_ue_transactions():
    one = predict_breakdown(spec()).category_means_us
    ten = predict_breakdown(spec(ue_count=10)).category_means_us
    assert ten[Category.NRF_REGISTER] == one[Category.NRF_REGISTER]
    assert ten[Category.SESSION_SETUP] == 10 * one[Category.SESSION_SETUP]


# -- breakdown ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def run_traces(tmp_path_factory):
    vc = virtual_core(tmp_path_factory.mktemp("b"))
    vc.run(lambda core: boot_and_run(core, 1))
    return vc.traces()


def test_breakdown_matches_predictor(run_traces):
    report = compute_breakdown(run_traces)
    predicted = predict_breakdown(spec())
    assert report.category_means_us == predicted.category_means_us
    for a, b in zip(report.transactions, predicted.transactions):
        assert (a.message_id, a.mean_us) == (b.message_id, b.mean_us)


def test_omitting_hn_internal_changes_total_by_its_sum(run_traces):
    with_hn = compute_breakdown(run_traces, omit_hn_internal=False)
    without = compute_breakdown(run_traces, omit_hn_internal=True)
    diff = with_hn.total_latency_us - without.total_latency_us
    assert diff == without.category_means_us[Category.HN_INTERNAL] > 0


def test_exclusive_time_removes_nested_calls(run_traces):
    run = breakdown_run(run_traces)
    by_id = {x.message_id: x for x in run.samples}
    assert all(0 < x.latency_us <= x.observed_us for x in run.samples)
    cc = by_id["context-creation"]
    nested = by_id["upf-discovery"].observed_us + by_id["n1-n2-context"].observed_us
    assert cc.observed_us - cc.latency_us == nested
    ua = by_id["ue-authentication"]
    assert ua.observed_us - ua.latency_us == by_id["auth-data"].observed_us
    # leaf transactions keep their whole observed time
    assert by_id["auth-subscription"].latency_us == by_id["auth-subscription"].observed_us


def test_breakdown_errors(run_traces):
    with pytest.raises(IncompleteTrace):
        breakdown_run([])
    t = run_traces[-1]
    no_receivers = Trace(t.trace_id, [s for s in t.spans if s.side is Side.SENDER])
    with pytest.raises(IncompleteTrace):
        breakdown_run([no_receivers])
    missing_root = Trace(t.trace_id, [s for s in t.spans if s is not t.root])
    with pytest.raises(IncompleteTrace):
        breakdown_run([missing_root])


def test_breakdown_rejects_error_spans(tmp_path):
    from capifsim.model import VnfKind

    vc = virtual_core(tmp_path)

    async def body(core):
        await core.boot()
        await core.stop_vnf(VnfKind.UDR)
        await core.run_ues(1)

    vc.run(body)
    with pytest.raises(IncompleteTrace, match="failed"):
        breakdown_run(vc.traces())


# -- reports -----------------------------------------------------------------------------


def test_report_json_and_csv(tmp_path):
    report = run_experiment(spec(runs=2))
    jp, cp = report.write(tmp_path / "r.json")
    doc = json.loads(jp.read_text())
    assert doc["strategy"] == "UrllcUser" and doc["runs"] == 2 and doc["failedRuns"] == []
    assert doc["totalLatencyMs"] == pytest.approx(sum(doc["categoriesMs"][c.value] for c in
                                                      (Category.FIVE_G_AKA, Category.SESSION_SETUP,
                                                       Category.NRF_REGISTER)))
    rows = list(csv.DictReader(io.StringIO(cp.read_text())))
    assert len(rows) == len(catalog())
    assert rows[0].keys() == {"strategy", "zone", "category", "transaction", "mean_ms", "stddev_ms"}
    assert {r["stddev_ms"] for r in rows} == {"0.000000"}


def test_compare_orders_by_total_with_deltas():
    reports = [run_experiment(spec(s)) for s in Strategy]
    rows = compare(reports)
    assert len(rows) == 4
    totals = [r.total_ms for r in rows]
    assert totals == sorted(totals) and rows[0].delta_total_ms == 0
    assert all(r.delta_total_ms == pytest.approx(r.total_ms - totals[0]) for r in rows)


def test_compare_needs_same_topology():
    a = run_experiment(spec())
    b = run_experiment(spec(rtt_override_ms=1.0))
    with pytest.raises(MismatchedTopology):
        compare([a, b])
    with pytest.raises(ValueError):
        compare([a])


# -- experiment configuration and failures -----------------------------------------------


def test_spec_validation():
    with pytest.raises(ConfigError):
        spec(ue_count=0)
    with pytest.raises(ConfigError):
        spec(runs=0)
    with pytest.raises(ConfigError):
        spec(clock="sundial")
    with pytest.raises(ConfigError):
        spec(edge=Z("mars-lz"))
    with pytest.raises(ConfigError):
        spec(Strategy.MCS_STATIC, Z("use1-az"))
    assert spec().az == Z("use1-az")
    assert spec(Strategy.MONOLITHIC, Z("use1-az")).az == Z("use1-az")


def test_failed_run_is_flagged_and_excluded(monkeypatch):
    real = experiment_mod._run_virtual

    def flaky(s, index, store):
        if index == 1:
            raise RuntimeError("boom")
        return real(s, index, store)

    monkeypatch.setattr(experiment_mod, "_run_virtual", flaky)
    result = run_experiment_detailed(spec(runs=3))
    assert result.report.runs == 2 and result.report.runs_requested == 3
    assert result.report.failed_runs == [{"run": 1, "cause": "RuntimeError: boom"}]
    assert [o.index for o in result.outcomes] == [0, 2]


def test_all_runs_failing_raises(monkeypatch):
    def broken(s, index, store):
        raise RuntimeError("down")

    monkeypatch.setattr(experiment_mod, "_run_virtual", broken)
    with pytest.raises(RunFailed) as info:
        run_experiment(spec(runs=2))
    assert info.value.run_index == 0


def test_stochastic_runs_differ_but_replay(tmp_path):
    s = spec(delay_mode=DelayMode.stochastic(5), runs=3)
    a = run_experiment(s)
    b = run_experiment(s)
    assert a.to_json() == b.to_json()
    stat = a.transaction("context-creation")
    assert stat.stdev_us > 0


def test_store_dir_keeps_per_run_stores(tmp_path):
    run_experiment_detailed(spec(runs=2), tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["run0.spans.jsonl", "run1.spans.jsonl"]


def test_custom_topology_with_higher_rtt_changes_totals():
    doc = bundled_topology_document()
    for link in doc["links"]:
        if link["a"] == "nyc-lz" or link["b"] == "nyc-lz":
            link.update(p50=20.0, p90=21.0, p99=22.0)
    slow = topology_from_dict(doc)
    base = predict_breakdown(spec())
    changed = run_experiment(spec(topology=slow))
    assert changed.total_latency_us > base.total_latency_us
    assert changed.topology_fingerprint != bundled_topology().fingerprint


def test_passthrough_run_reports_nothing_but_succeeds():
    result = run_experiment_detailed(spec(passthrough=True))
    assert len(result.outcomes[0].store) == 0
    assert result.report.total_latency_us == 0


def test_report_is_a_dataclass_with_source():
    r = predict_breakdown(spec())
    assert isinstance(r, BreakdownReport) and r.source == "predictor"
    assert json.loads(r.to_json())["source"] == "predictor"


def test_processing_model_feeds_predictor_and_simulator():
    pm = ProcessingModel(0.5)
    s = spec(processing=pm)
    assert run_experiment(s).category_means_us == predict_breakdown(s).category_means_us
