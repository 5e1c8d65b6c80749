"""Per-run latency breakdown from assembled traces.

Each catalog transaction is charged the time its caller observed
(the sender-side span) minus the time spent in calls the callee made on its
behalf while serving it.  Those nested calls are charged to their own
transactions, so no microsecond is counted twice and the category sums add
up exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ..errors import CapifSimError
from ..model import COUNTED_CATEGORIES, Category, catalog, is_heartbeat
from ..telemetry.span import Side, Span, Trace


class IncompleteTrace(CapifSimError):
    """The traces cannot be turned into a breakdown (empty, orphans, gaps)."""


@dataclass(frozen=True)
class TransactionSample:
    message_id: str
    category: Category
    trace_id: str
    span_id: str
    start_us: int
    observed_us: int
    latency_us: int


@dataclass
class RunBreakdown:
    """Integer-microsecond sums for one run."""

    samples: list[TransactionSample] = field(default_factory=list)

    def category_us(self) -> dict[Category, int]:
        sums = {c: 0 for c in Category}
        for s in self.samples:
            sums[s.category] += s.latency_us
        return sums

    def transaction_us(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {m.id: [] for m in catalog()}
        for s in self.samples:
            out[s.message_id].append(s.latency_us)
        return out

    def counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.transaction_us().items()}

    def total_us(self, omit_hn_internal: bool = True) -> int:
        sums = self.category_us()
        cats = COUNTED_CATEGORIES if omit_hn_internal else tuple(Category)
        return sum(sums[c] for c in cats)


def _nested_senders(trace: Trace, receiver: Span) -> list[Span]:
    return [
        c for c in trace.children(receiver)
        if c.side is Side.SENDER and c.start_us >= receiver.start_us and c.end_us <= receiver.end_us
    ]


def breakdown_run(traces: Iterable[Trace]) -> RunBreakdown:
    """Charge every sender-side catalog span with its exclusive latency."""
    traces = list(traces)
    if not traces:
        raise IncompleteTrace("no traces to break down")
    out = RunBreakdown()
    for trace in traces:
        if trace.orphans:
            raise IncompleteTrace(
                f"trace {trace.trace_id} has {len(trace.orphans)} orphan span(s), "
                f"e.g. {trace.orphans[0].operation}"
            )
        if len(trace.roots) != 1:
            raise IncompleteTrace(f"trace {trace.trace_id} has {len(trace.roots)} roots")
        for span in trace.spans:
            if span.side is not Side.SENDER:
                continue
            msg = span.transaction
            if msg is None or is_heartbeat(msg):
                continue
            if span.error:
                raise IncompleteTrace(f"{msg.id} in trace {trace.trace_id} failed: {span.error}")
            receivers = [c for c in trace.children(span) if c.side is Side.RECEIVER]
            if len(receivers) != 1:
                raise IncompleteTrace(
                    f"{msg.id} sender span {span.span_id} has {len(receivers)} receiver spans"
                )
            nested = sum(c.duration_us for c in _nested_senders(trace, receivers[0]))
            out.samples.append(TransactionSample(
                msg.id, msg.category, trace.trace_id, span.span_id, span.start_us,
                span.duration_us, span.duration_us - nested,
            ))
    out.samples.sort(key=lambda s: (s.start_us, s.span_id))
    return out
