"""Node-level agent and cluster-level collector.

Sidecars hand span batches to an :class:`Agent`; the agent validates them
and forwards them, in arrival order, to a :class:`Collector`, which persists
them in a :class:`SpanStore`.  Either hop can be an in-process call or an
NDJSON-over-TCP connection.
"""

from __future__ import annotations

import asyncio
from dataclasses import dataclass
from typing import Awaitable, Callable, Iterable, Mapping, Union

from .span import SchemaViolation, Span, validate_span_dict
from .store import SpanStore
from .wire import BatchRejected, NdjsonClient, NdjsonServer

Forward = Callable[[list[Span]], Awaitable[int]]


@dataclass
class PipelineCounters:
    received: int = 0
    accepted: int = 0
    rejected: int = 0
    rejected_batches: int = 0


def _parse_batch(batch: Iterable[Union[Span, Mapping]]) -> list[Span]:
    spans = []
    for record in batch:
        if isinstance(record, Span):
            validate_span_dict(record.to_dict())
            spans.append(record)
        else:
            spans.append(Span.from_dict(record))
    return spans


class Collector:
    """Persists forwarded spans; the store deduplicates and serializes appends."""

    def __init__(self, store: SpanStore, offload: bool = False):
        self.store = store
        self.counters = PipelineCounters()
        # wall-clock runs move the fsync'd append off the event loop
        self._offload = offload
        self._server: NdjsonServer | None = None

    def store_batch(self, spans: list[Span]) -> int:
        self.counters.received += len(spans)
        written = self.store.append(spans)
        self.counters.accepted += written
        return written

    async def receive(self, spans: list[Span]) -> int:
        if self._offload:
            loop = asyncio.get_running_loop()
            return await loop.run_in_executor(None, self.store_batch, spans)
        return self.store_batch(spans)

    async def _from_wire(self, records: list[dict]) -> int:
        return await self.receive(_parse_batch(records))

    async def serve(self, host: str = "127.0.0.1", port: int = 0) -> NdjsonServer:
        self._server = await NdjsonServer(self._from_wire, host, port).start()
        return self._server

    async def close(self) -> None:
        if self._server is not None:
            await self._server.close()


class Agent:
    """Validates incoming batches and relays them to the collector.

    An invalid record rejects its whole batch; the records are counted in
    ``counters.rejected`` and never reach the collector.
    """

    def __init__(self, forward: Union[Collector, Forward, NdjsonClient]):
        if isinstance(forward, Collector):
            self._forward: Forward = forward.receive
        elif isinstance(forward, NdjsonClient):
            client = forward

            async def relay(spans: list[Span]) -> int:
                return await client.send([s.to_dict() for s in spans])

            self._forward = relay
        else:
            self._forward = forward
        self.counters = PipelineCounters()
        self._server: NdjsonServer | None = None
        self._order: asyncio.Lock | None = None

    async def ingest(self, batch: Iterable[Union[Span, Mapping]]) -> int:
        records = list(batch)
        self.counters.received += len(records)
        try:
            spans = _parse_batch(records)
        except SchemaViolation:
            self.counters.rejected += len(records)
            self.counters.rejected_batches += 1
            raise
        accepted = await self._forward(spans)
        self.counters.accepted += len(spans)
        return accepted

    async def _from_wire(self, records: list[dict]) -> int:
        # one lock keeps concurrent connections from interleaving a batch's
        # forward with another's, so per-source order survives the relay
        if self._order is None:
            self._order = asyncio.Lock()
        async with self._order:
            return await self.ingest(records)

    async def serve(self, host: str = "127.0.0.1", port: int = 0) -> NdjsonServer:
        self._server = await NdjsonServer(self._from_wire, host, port).start()
        return self._server

    async def close(self) -> None:
        if self._server is not None:
            await self._server.close()


__all__ = ["Agent", "BatchRejected", "Collector", "PipelineCounters"]
