"""Closed-form latency prediction for deterministic delay modes.

Every catalog transaction costs one RTT between the zones of its two
endpoints plus the processing time at each endpoint.  Processing is a pure
delay, so neither queueing nor concurrency enters the formula.
"""

from __future__ import annotations

from ..model import Category, CapifMessage, catalog
from ..netem.latency import LatencyEmulator
from .breakdown import RunBreakdown, TransactionSample
from .experiment import ExperimentSpec
from .report import BreakdownReport, aggregate


def transaction_latency_us(spec: ExperimentSpec, msg: CapifMessage, latency: LatencyEmulator | None = None) -> int:
    if not spec.delay_mode.deterministic:
        raise ValueError("the predictor needs a deterministic delay mode (p50 or a fixed percentile)")
    latency = latency or LatencyEmulator(spec.effective_topology, spec.delay_mode)
    p = spec.placement
    return (latency.rtt_us(p[msg.src], p[msg.dst])
            + spec.processing.us(msg.src, msg.id)
            + spec.processing.us(msg.dst, msg.id))


def predict_run(spec: ExperimentSpec) -> RunBreakdown:
    latency = LatencyEmulator(spec.effective_topology, spec.delay_mode)
    run = RunBreakdown()
    for msg in catalog():
        us = transaction_latency_us(spec, msg, latency)
        for _ in range(spec.ue_count if msg.per_ue else 1):
            run.samples.append(TransactionSample(msg.id, msg.category, "", "", 0, us, us))
    return run


def predict_breakdown(spec: ExperimentSpec) -> BreakdownReport:
    report = aggregate([predict_run(spec)], spec.omit_hn_internal, runs_requested=1, **spec.report_meta())
    report.source = "predictor"
    return report


def predicted_category_us(spec: ExperimentSpec) -> dict[Category, int]:
    return predict_run(spec).category_us()
