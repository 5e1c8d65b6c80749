"""Deterministic virtual clock.

Time is an integer number of microseconds and only moves when :meth:`advance`
pops the next scheduled event.  Events scheduled for the same instant run in
insertion order.
"""

from __future__ import annotations

import heapq
import itertools
from typing import Any

from ..errors import CapifSimError


class SchedulingInPast(CapifSimError, ValueError):
    """An event was scheduled before the current virtual time."""


class VirtualClock:
    def __init__(self, start_us: int = 0):
        self._now = int(start_us)
        self._seq = itertools.count()
        self._heap: list[tuple[int, int, Any]] = []

    @property
    def now(self) -> int:
        return self._now

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, event: Any, t: int) -> None:
        t = int(t)
        if t < self._now:
            raise SchedulingInPast(f"t={t}us is before now={self._now}us")
        heapq.heappush(self._heap, (t, next(self._seq), event))

    def schedule_in(self, event: Any, delay_us: int) -> None:
        self.schedule(event, self._now + int(delay_us))

    def peek(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def advance(self) -> Any:
        """Move time to the earliest pending event and return it (None when idle)."""
        if not self._heap:
            return None
        t, _, event = heapq.heappop(self._heap)
        self._now = t
        return event
