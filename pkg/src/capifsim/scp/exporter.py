"""Non-blocking span export from a sidecar to its agent."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Awaitable, Callable

from ..runtime import Runtime
from ..telemetry.span import SchemaViolation, Span
from ..telemetry.wire import BatchRejected, NdjsonClient

log = logging.getLogger(__name__)

Sink = Callable[[list[Span]], Awaitable[int]]


@dataclass
class ExportCounters:
    emitted: int = 0
    dropped: int = 0
    delivered: int = 0
    rejected: int = 0
    failed_flushes: int = 0


def tcp_sink(client: NdjsonClient) -> Sink:
    async def send(batch: list[Span]) -> int:
        return await client.send([s.to_dict() for s in batch])
    return send


class SpanExporter:
    """Bounded span buffer drained by a background flush.

    ``emit`` never waits: when the buffer holds ``cap`` spans the new span is
    dropped and counted.  A failed delivery leaves the batch at the front of
    the buffer for the next flush; a batch the agent refuses is counted as
    rejected and discarded.
    """

    def __init__(self, runtime: Runtime, sink: Sink, cap: int = 10_000,
                 batch_size: int = 256, flush_interval_us: int | None = None):
        if cap < 1 or batch_size < 1:
            raise ValueError("cap and batch_size must be positive")
        self._rt = runtime
        self._sink = sink
        self.cap = cap
        self.batch_size = batch_size
        self.flush_interval_us = flush_interval_us
        self._buf: deque[Span] = deque()
        self._flushing = False
        self._timer_armed = False
        self._timer = None
        self.connected = True
        self.counters = ExportCounters()

    @property
    def pending(self) -> int:
        return len(self._buf)

    def emit(self, span: Span) -> None:
        self.counters.emitted += 1
        if len(self._buf) >= self.cap:
            self.counters.dropped += 1
            return
        self._buf.append(span)
        if len(self._buf) >= self.batch_size:
            self._kick()
        elif self.flush_interval_us is not None and not self._timer_armed:
            self._timer_armed = True
            self._timer = self._rt.spawn(self._delayed_flush())

    def _kick(self) -> None:
        if not self._flushing:
            self._rt.spawn(self.flush())

    def close(self) -> None:
        """Cancel a pending timed flush; buffered spans stay in place."""
        if self._timer is not None and not self._timer.done():
            self._timer.cancel()
        self._timer = None
        self._timer_armed = False

    async def _delayed_flush(self) -> None:
        await self._rt.sleep_us(self.flush_interval_us or 0)
        self._timer_armed = False
        await self.flush()

    async def flush(self) -> bool:
        """Drain the buffer; returns False if the agent was unreachable."""
        while self._flushing:
            # another flush owns the buffer; wait for it rather than racing it
            await self._rt.sleep_us(200)
        self._flushing = True
        try:
            while self._buf:
                n = min(self.batch_size, len(self._buf))
                batch = [self._buf.popleft() for _ in range(n)]
                try:
                    await self._sink(batch)
                except (SchemaViolation, BatchRejected) as exc:
                    log.warning("agent rejected %d spans: %s", n, exc)
                    self.counters.rejected += n
                    continue
                except (ConnectionError, OSError) as exc:
                    self._buf.extendleft(reversed(batch))
                    self.connected = False
                    self.counters.failed_flushes += 1
                    log.debug("agent unreachable, %d spans buffered: %s", len(self._buf), exc)
                    return False
                self.connected = True
                self.counters.delivered += n
            return True
        finally:
            self._flushing = False
