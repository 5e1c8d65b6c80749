"""Execution runtimes shared by VNFs, sidecars and telemetry.

VNF and proxy code is written as plain ``async def`` coroutines that only
await objects obtained from a runtime (``sleep_us``, futures, ``gather``...).
:class:`VirtualRuntime` drives those coroutines from a :class:`VirtualClock`
on a single thread, so a whole scenario replays identically.
:class:`AsyncioRuntime` runs the same coroutines on an asyncio loop against
the wall clock.
"""

from __future__ import annotations

import asyncio
import inspect
import time
from typing import Any, Awaitable, Callable, Coroutine

from .netem.clock import VirtualClock

CancelledError = asyncio.CancelledError


class Runtime:
    clock_name = "abstract"

    def now_us(self) -> int:
        raise NotImplementedError

    async def sleep_us(self, us: int) -> None:
        raise NotImplementedError

    def spawn(self, coro: Coroutine) -> Any:
        raise NotImplementedError

    def create_future(self) -> Any:
        raise NotImplementedError

    async def gather(self, *aws: Awaitable, return_exceptions: bool = False) -> list:
        raise NotImplementedError

    async def wait_for(self, aw: Awaitable, timeout_us: int) -> Any:
        """Await ``aw`` or raise the builtin ``TimeoutError`` after ``timeout_us``."""
        raise NotImplementedError

    def run(self, coro: Coroutine) -> Any:
        raise NotImplementedError


# -- virtual time -------------------------------------------------------------


class _Timer:
    __slots__ = ("callback", "cancelled")

    def __init__(self, callback: Callable[[], None]):
        self.callback = callback
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True

    def __call__(self) -> None:
        if not self.cancelled:
            self.callback()


class _Sleep:
    __slots__ = ("us",)

    def __init__(self, us: int):
        self.us = us

    def __await__(self):
        yield self


class VFuture:
    def __init__(self, rt: "VirtualRuntime"):
        self._rt = rt
        self._done = False
        self._result: Any = None
        self._exc: BaseException | None = None
        self._callbacks: list[Callable[["VFuture"], None]] = []

    def done(self) -> bool:
        return self._done

    def cancelled(self) -> bool:
        return isinstance(self._exc, CancelledError)

    def set_result(self, value: Any) -> None:
        self._finish(value, None)

    def set_exception(self, exc: BaseException) -> None:
        self._finish(None, exc)

    def _finish(self, value: Any, exc: BaseException | None) -> None:
        if self._done:
            raise RuntimeError("future already resolved")
        self._done, self._result, self._exc = True, value, exc
        callbacks, self._callbacks = self._callbacks, []
        for cb in callbacks:
            self._rt.call_soon(lambda cb=cb: cb(self))

    def add_done_callback(self, cb: Callable[["VFuture"], None]) -> None:
        if self._done:
            self._rt.call_soon(lambda: cb(self))
        else:
            self._callbacks.append(cb)

    def result(self) -> Any:
        if not self._done:
            raise RuntimeError("future not resolved")
        if self._exc is not None:
            raise self._exc
        return self._result

    def exception(self) -> BaseException | None:
        return self._exc

    def __await__(self):
        if not self._done:
            yield self
        return self.result()


class VTask(VFuture):
    def __init__(self, rt: "VirtualRuntime", coro: Coroutine):
        super().__init__(rt)
        self._coro = coro
        self._token = 0
        rt.call_soon(lambda: self._step(None, None))

    def _step(self, value: Any, exc: BaseException | None) -> None:
        if self._done:
            return
        try:
            if exc is not None:
                yielded = self._coro.throw(exc)
            else:
                yielded = self._coro.send(value)
        except StopIteration as stop:
            self.set_result(stop.value)
            return
        except BaseException as err:  # noqa: BLE001 - delivered to awaiters
            self.set_exception(err)
            return
        self._token += 1
        token = self._token
        if isinstance(yielded, _Sleep):
            self._rt.call_later(yielded.us, lambda: self._wake(token, None))
        elif isinstance(yielded, VFuture):
            yielded.add_done_callback(lambda f: self._wake(token, f))
        else:
            err = TypeError(f"virtual runtime cannot await {yielded!r}")
            self._rt.call_soon(lambda: self._step(None, err))

    def _wake(self, token: int, fut: VFuture | None) -> None:
        if token != self._token or self._done:
            return
        if fut is None:
            self._step(None, None)
            return
        try:
            value = fut.result()
        except BaseException as err:  # noqa: BLE001
            self._step(None, err)
        else:
            self._step(value, None)

    def cancel(self) -> bool:
        if self._done:
            return False
        self._token += 1
        self._rt.call_soon(lambda: self._step(None, CancelledError()))
        return True


class StalledRun(RuntimeError):
    """The virtual run has no pending events but the main task is unfinished."""


class VirtualRuntime(Runtime):
    clock_name = "virtual"

    def __init__(self, clock: VirtualClock | None = None):
        self.clock = clock or VirtualClock()
        self.events_run = 0

    def now_us(self) -> int:
        return self.clock.now

    def call_soon(self, cb: Callable[[], None]) -> _Timer:
        return self.call_later(0, cb)

    def call_later(self, delay_us: int, cb: Callable[[], None]) -> _Timer:
        timer = _Timer(cb)
        self.clock.schedule_in(timer, max(0, int(delay_us)))
        return timer

    def sleep_us(self, us: int) -> _Sleep:  # type: ignore[override]
        return _Sleep(max(0, int(us)))

    def create_future(self) -> VFuture:
        return VFuture(self)

    def spawn(self, coro: Coroutine) -> VTask:
        return VTask(self, coro)

    def _as_future(self, aw: Awaitable) -> VFuture:
        if isinstance(aw, VFuture):
            return aw
        if inspect.iscoroutine(aw):
            return self.spawn(aw)
        raise TypeError(f"cannot schedule {aw!r}")

    async def gather(self, *aws: Awaitable, return_exceptions: bool = False) -> list:
        futures = [self._as_future(aw) for aw in aws]
        results = []
        for fut in futures:
            try:
                results.append(await fut)
            except Exception as exc:
                if not return_exceptions:
                    raise
                results.append(exc)
        return results

    async def wait_for(self, aw: Awaitable, timeout_us: int) -> Any:
        task = self._as_future(aw)
        waiter = self.create_future()

        def expire() -> None:
            if not waiter.done():
                waiter.set_exception(TimeoutError(f"no result within {timeout_us}us"))

        def finished(_: VFuture) -> None:
            if not waiter.done():
                waiter.set_result(None)

        timer = self.call_later(timeout_us, expire)
        task.add_done_callback(finished)
        try:
            await waiter
        except TimeoutError:
            if isinstance(task, VTask):
                task.cancel()
            raise
        finally:
            timer.cancel()
        return task.result()

    def run(self, coro: Coroutine) -> Any:
        main = self.spawn(coro)
        while not main.done():
            event = self.clock.advance()
            if event is None:
                raise StalledRun(f"virtual run stalled at t={self.clock.now}us")
            self.events_run += 1
            event()
        return main.result()


# -- wall clock ---------------------------------------------------------------

# epoll only sleeps in whole milliseconds; the tail of every wait is spun
# on the loop so emulated delays stay sub-millisecond accurate
_SPIN_WINDOW_US = 1500


class AsyncioRuntime(Runtime):
    clock_name = "wall"

    def __init__(self):
        self._epoch_ns = time.time_ns()
        self._perf_ns = time.perf_counter_ns()

    def now_us(self) -> int:
        return (self._epoch_ns + time.perf_counter_ns() - self._perf_ns) // 1000

    async def sleep_us(self, us: int) -> None:
        if us <= 0:
            await asyncio.sleep(0)
            return
        deadline = time.perf_counter_ns() + int(us) * 1000
        coarse = us - _SPIN_WINDOW_US
        if coarse > 0:
            await asyncio.sleep(coarse / 1e6)
        while time.perf_counter_ns() < deadline:
            await asyncio.sleep(0)

    def spawn(self, coro: Coroutine) -> asyncio.Task:
        return asyncio.ensure_future(coro)

    def create_future(self) -> asyncio.Future:
        return asyncio.get_running_loop().create_future()

    async def gather(self, *aws: Awaitable, return_exceptions: bool = False) -> list:
        return list(await asyncio.gather(*aws, return_exceptions=return_exceptions))

    async def wait_for(self, aw: Awaitable, timeout_us: int) -> Any:
        try:
            return await asyncio.wait_for(aw, timeout_us / 1e6)
        except asyncio.TimeoutError:
            raise TimeoutError(f"no result within {timeout_us}us") from None

    def run(self, coro: Coroutine) -> Any:
        return asyncio.run(coro)


def make_runtime(clock: str) -> Runtime:
    if clock == "virtual":
        return VirtualRuntime()
    if clock == "wall":
        return AsyncioRuntime()
    raise ValueError(f"unknown clock mode {clock!r}; use 'virtual' or 'wall'")
