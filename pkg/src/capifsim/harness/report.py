"""Breakdown reports, their JSON/CSV forms, and cross-strategy comparison."""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from ..errors import CapifSimError
from ..model import COUNTED_CATEGORIES, Category, Strategy, catalog
from ..telemetry.span import Trace
from .breakdown import RunBreakdown, breakdown_run

REPORT_FORMAT = "capifsim-breakdown"
REPORT_VERSION = 1


class MismatchedTopology(CapifSimError, ValueError):
    """Reports built on different topologies cannot be compared."""


def _ms(us: float) -> float:
    return round(us / 1000.0, 6)


@dataclass(frozen=True)
class TransactionStat:
    message_id: str
    category: Category
    per_run_count: int
    mean_us: float
    stdev_us: float

    @property
    def mean_ms(self) -> float:
        return _ms(self.mean_us)

    @property
    def stdev_ms(self) -> float:
        return _ms(self.stdev_us)

    def to_dict(self) -> dict:
        return {
            "id": self.message_id,
            "category": self.category.value,
            "countPerRun": self.per_run_count,
            "meanUs": self.mean_us,
            "meanMs": self.mean_ms,
            "stdevMs": self.stdev_ms,
        }


@dataclass
class BreakdownReport:
    category_means_us: dict[Category, float]
    transactions: list[TransactionStat]
    runs: int
    omit_hn_internal: bool = True
    strategy: Strategy | None = None
    edge_zone: str | None = None
    az_zone: str | None = None
    topology: str | None = None
    topology_fingerprint: str | None = None
    delay_mode: str | None = None
    ue_count: int | None = None
    runs_requested: int | None = None
    failed_runs: list[dict] = field(default_factory=list)
    source: str = "simulation"

    @property
    def total_latency_us(self) -> float:
        cats = COUNTED_CATEGORIES if self.omit_hn_internal else tuple(Category)
        return sum(self.category_means_us[c] for c in cats)

    @property
    def total_latency_ms(self) -> float:
        return _ms(self.total_latency_us)

    def category_ms(self, category: Category) -> float:
        return _ms(self.category_means_us[category])

    def transaction(self, message_id: str) -> TransactionStat:
        for t in self.transactions:
            if t.message_id == message_id:
                return t
        raise KeyError(message_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "source": self.source,
            "strategy": self.strategy.value if self.strategy else None,
            "edgeZone": self.edge_zone,
            "azZone": self.az_zone,
            "topology": self.topology,
            "topologyFingerprint": self.topology_fingerprint,
            "delayMode": self.delay_mode,
            "ueCount": self.ue_count,
            "runsRequested": self.runs_requested if self.runs_requested is not None else self.runs,
            "runs": self.runs,
            "failedRuns": self.failed_runs,
            "omitHnInternal": self.omit_hn_internal,
            "categoriesMs": {c.value: self.category_ms(c) for c in Category},
            "categoriesUs": {c.value: self.category_means_us[c] for c in Category},
            "totalLatencyMs": self.total_latency_ms,
            "totalLatencyUs": self.total_latency_us,
            "transactions": [t.to_dict() for t in self.transactions],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def csv_rows(self) -> list[dict]:
        return [
            {
                "strategy": self.strategy.value if self.strategy else "",
                "zone": self.edge_zone or "",
                "category": t.category.value,
                "transaction": t.message_id,
                "mean_ms": f"{t.mean_ms:.6f}",
                "stddev_ms": f"{t.stdev_ms:.6f}",
            }
            for t in self.transactions
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["strategy", "zone", "category", "transaction",
                                                 "mean_ms", "stddev_ms"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.csv_rows())
        return buf.getvalue()

    def write(self, json_path: str | Path) -> tuple[Path, Path]:
        """Write ``<name>.json`` and the sibling ``<name>.csv``."""
        jp = Path(json_path)
        cp = jp.with_suffix(".csv")
        jp.write_text(self.to_json(), encoding="utf-8")
        cp.write_text(self.to_csv(), encoding="utf-8")
        return jp, cp


def aggregate(runs: Sequence[RunBreakdown], omit_hn_internal: bool = True, **meta: Any) -> BreakdownReport:
    """Average per-run breakdowns into a report (means of per-run sums)."""
    if not runs:
        raise ValueError("no successful runs to aggregate")
    n = len(runs)
    cat_sums = [r.category_us() for r in runs]
    means = {c: sum(s[c] for s in cat_sums) / n for c in Category}
    per_run = [r.transaction_us() for r in runs]
    stats = []
    for m in catalog():
        values = [sum(p[m.id]) / len(p[m.id]) for p in per_run if p[m.id]]
        if not values:
            stats.append(TransactionStat(m.id, m.category, 0, 0.0, 0.0))
            continue
        mean = sum(values) / len(values)
        stdev = statistics.stdev(values) if len(values) > 1 else 0.0
        stats.append(TransactionStat(m.id, m.category, len(per_run[0][m.id]), mean, stdev))
    return BreakdownReport(means, stats, n, omit_hn_internal, **meta)


def compute_breakdown(traces: Iterable[Trace], omit_hn_internal: bool = True, **meta: Any) -> BreakdownReport:
    """Breakdown of one run's traces; raises IncompleteTrace for unusable input."""
    return aggregate([breakdown_run(traces)], omit_hn_internal, **meta)


@dataclass(frozen=True)
class ComparisonRow:
    strategy: str | None
    edge_zone: str | None
    total_ms: float
    categories_ms: dict[str, float]
    delta_total_ms: float
    delta_categories_ms: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "edgeZone": self.edge_zone,
            "totalLatencyMs": self.total_ms,
            "categoriesMs": self.categories_ms,
            "deltaTotalMs": self.delta_total_ms,
            "deltaCategoriesMs": self.delta_categories_ms,
        }


def compare(reports: Sequence[BreakdownReport]) -> list[ComparisonRow]:
    """Rows sorted by total latency, each with deltas against the lowest total."""
    if len(reports) < 2:
        raise ValueError("compare needs at least two reports")
    prints = {r.topology_fingerprint for r in reports}
    if len(prints) != 1:
        raise MismatchedTopology(f"reports span {len(prints)} different topologies")
    ordered = sorted(reports, key=lambda r: (r.total_latency_us, r.strategy.value if r.strategy else "",
                                             r.edge_zone or ""))
    base = ordered[0]
    rows = []
    for r in ordered:
        cats = {c.value: r.category_ms(c) for c in Category}
        rows.append(ComparisonRow(
            r.strategy.value if r.strategy else None,
            r.edge_zone,
            r.total_latency_ms,
            cats,
            _ms(r.total_latency_us - base.total_latency_us),
            {c.value: _ms(r.category_means_us[c] - base.category_means_us[c]) for c in Category},
        ))
    return rows


def comparison_json(rows: Sequence[ComparisonRow]) -> str:
    return json.dumps({"rows": [r.to_dict() for r in rows]}, indent=2, sort_keys=True) + "\n"
