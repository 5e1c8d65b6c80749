"""Newline-delimited JSON batches over TCP.

A batch is a run of JSON object lines closed by one empty line.  The server
answers every batch with a single JSON line:
``{"ok": true, "accepted": n}`` or ``{"ok": false, "error": ..., "detail": ...}``.
"""

from __future__ import annotations

import asyncio
import json
import logging
from typing import Any, Awaitable, Callable

from ..errors import CapifSimError

log = logging.getLogger(__name__)

BatchHandler = Callable[[list[dict]], Awaitable[int]]

# a single span record is a few hundred bytes; leave ample headroom
_LINE_LIMIT = 1 << 20


class WireError(CapifSimError, ConnectionError):
    """The peer could not be reached or answered with garbage."""


class BatchRejected(CapifSimError):
    def __init__(self, error: str, detail: str = ""):
        super().__init__(f"{error}: {detail}" if detail else error)
        self.error = error
        self.detail = detail


def encode_batch(records: list[dict]) -> bytes:
    body = "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in records)
    return (body + "\n").encode()


class NdjsonServer:
    """Accepts batches on ``host:port`` and hands each to ``handler``.

    ``handler`` returns the number of accepted records; any
    ``CapifSimError`` it raises is reported back to the client by class name.
    """

    def __init__(self, handler: BatchHandler, host: str = "127.0.0.1", port: int = 0):
        self._handler = handler
        self.host = host
        self.port = port
        self._server: asyncio.base_events.Server | None = None

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    async def start(self) -> "NdjsonServer":
        self._server = await asyncio.start_server(self._client, self.host, self.port, limit=_LINE_LIMIT)
        self.port = self._server.sockets[0].getsockname()[1]
        return self

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    async def _client(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        batch: list[dict] = []
        bad: str | None = None
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                text = line.strip()
                if text:
                    try:
                        obj = json.loads(text)
                        if not isinstance(obj, dict):
                            raise ValueError("record is not a JSON object")
                        batch.append(obj)
                    except ValueError as exc:
                        bad = bad or str(exc)
                    continue
                reply = await self._answer(batch, bad)
                batch, bad = [], None
                writer.write((json.dumps(reply, sort_keys=True) + "\n").encode())
                await writer.drain()
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            writer.close()

    async def _answer(self, batch: list[dict], bad: str | None) -> dict[str, Any]:
        if bad is not None:
            return {"ok": False, "error": "SchemaViolation", "detail": f"unparseable line: {bad}"}
        try:
            accepted = await self._handler(batch)
        except CapifSimError as exc:
            return {"ok": False, "error": type(exc).__name__, "detail": str(exc)}
        except Exception as exc:  # noqa: BLE001 - report rather than drop the connection
            log.exception("batch handler failed")
            return {"ok": False, "error": "InternalError", "detail": str(exc)}
        return {"ok": True, "accepted": accepted}


class NdjsonClient:
    """Keeps one connection to an :class:`NdjsonServer`, reconnecting on demand."""

    def __init__(self, host: str, port: int):
        self.host = host
        self.port = port
        self._reader: asyncio.StreamReader | None = None
        self._writer: asyncio.StreamWriter | None = None
        self._lock: asyncio.Lock | None = None

    async def send(self, records: list[dict]) -> int:
        """Deliver one batch; returns the server's accepted count.

        Raises :class:`WireError` when the server is unreachable and
        :class:`BatchRejected` when it refuses the batch.
        """
        if self._lock is None:
            self._lock = asyncio.Lock()
        async with self._lock:
            try:
                if self._writer is None:
                    self._reader, self._writer = await asyncio.open_connection(
                        self.host, self.port, limit=_LINE_LIMIT
                    )
                self._writer.write(encode_batch(records))
                await self._writer.drain()
                line = await self._reader.readline()
            except OSError as exc:
                await self._drop()
                raise WireError(f"cannot reach {self.host}:{self.port}: {exc}") from exc
            if not line:
                await self._drop()
                raise WireError(f"{self.host}:{self.port} closed the connection")
        try:
            reply = json.loads(line)
        except ValueError as exc:
            raise WireError(f"bad reply from {self.host}:{self.port}") from exc
        if not reply.get("ok"):
            raise BatchRejected(reply.get("error", "Rejected"), reply.get("detail", ""))
        return int(reply.get("accepted", 0))

    async def _drop(self) -> None:
        if self._writer is not None:
            self._writer.close()
        self._reader = self._writer = None

    async def close(self) -> None:
        await self._drop()
