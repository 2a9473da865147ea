"""Asyncio TCP front end for the broker core.

One reader task per connection feeds decoded packets to the core; outbound
packets go through a per-session queue drained by a writer task, preserving
order.  All core handlers run on the event loop, so state mutations are
naturally serialized.
"""

from __future__ import annotations

import asyncio
import contextlib
import logging
import threading
from typing import Any, Callable

from . import transport as mq
from .broker import BrokerConfig, BrokerCore, CloseConnection, Session

__all__ = ["BrokerServer", "ThreadedBroker"]

log = logging.getLogger(__name__)

_CONNECT_TIMEOUT = 10.0


class BrokerServer:
    def __init__(self, config: BrokerConfig | None = None) -> None:
        self.config = config or BrokerConfig()
        self.core = BrokerCore(self.config)
        self._server: asyncio.Server | None = None
        self.port: int | None = None

    async def start(self) -> None:
        self._server = await asyncio.start_server(
            self._handle_connection, self.config.host, self.config.port
        )
        self.port = self._server.sockets[0].getsockname()[1]
        log.info("listening on %s:%d", self.config.host, self.port)

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        assert self._server is not None
        await self._server.serve_forever()

    async def _handle_connection(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        decoder = mq.PacketDecoder(self.config.max_packet_size)
        pending: list[mq.Packet] = []
        outbound: asyncio.Queue[mq.Packet | None] = asyncio.Queue()
        session: Session | None = None

        async def next_packet(timeout: float | None) -> mq.Packet | None:
            while not pending:
                if timeout is None:
                    data = await reader.read(65536)
                else:
                    data = await asyncio.wait_for(reader.read(65536), timeout)
                if not data:
                    return None
                pending.extend(decoder.feed(data))
            return pending.pop(0)

        async def drain_outbound() -> None:
            while True:
                pkt = await outbound.get()
                if pkt is None:
                    return
                chunk = bytearray(mq.encode(pkt))
                while not outbound.empty():
                    nxt = outbound.get_nowait()
                    if nxt is None:
                        writer.write(bytes(chunk))
                        await writer.drain()
                        return
                    chunk += mq.encode(nxt)
                writer.write(bytes(chunk))
                await writer.drain()

        writer_task = asyncio.create_task(drain_outbound())
        try:
            first = await next_packet(_CONNECT_TIMEOUT)
            if not isinstance(first, mq.Connect):
                return  # first packet must be CONNECT
            if not first.client_id:
                outbound.put_nowait(mq.ConnAck(return_code=0x02))
                return
            session, old = self.core.connect(first.client_id, outbound.put_nowait)
            session.close_cb = writer.close
            if old is not None and old.close_cb is not None:
                old.close_cb()  # session takeover drops the previous connection
            outbound.put_nowait(mq.ConnAck(0))
            timeout = first.keep_alive * 1.5 if first.keep_alive else None
            while True:
                pkt = await next_packet(timeout)
                if pkt is None or isinstance(pkt, (mq.Disconnect, mq.Connect)):
                    return
                if isinstance(pkt, mq.Publish):
                    self.core.handle_publish(session, pkt)
                elif isinstance(pkt, mq.Subscribe):
                    self.core.handle_subscribe(session, pkt)
                elif isinstance(pkt, mq.Unsubscribe):
                    self.core.handle_unsubscribe(session, pkt)
                elif isinstance(pkt, mq.PingReq):
                    outbound.put_nowait(mq.PingResp())
                elif isinstance(pkt, mq.PubAck):
                    pass  # subscriber acknowledged a qos 1 delivery
                else:
                    return
        except asyncio.TimeoutError:
            log.info("keep-alive expired, dropping connection")
        except mq.ProtocolViolation as e:
            log.info("protocol violation: %s", e)
            if e.connack_code is not None and session is None:
                outbound.put_nowait(mq.ConnAck(return_code=e.connack_code))
        except CloseConnection as e:
            log.info("closing connection: %s", e)
        except ConnectionError:
            pass
        finally:
            if session is not None:
                self.core.disconnect(session)
            outbound.put_nowait(None)
            with contextlib.suppress(Exception):
                await asyncio.wait_for(writer_task, 5)
            with contextlib.suppress(Exception):
                writer.close()
                await writer.wait_closed()


class ThreadedBroker:
    """Runs a broker server on a dedicated thread with its own event loop.

    Intended for tests and client-side tooling; ``call`` marshals a function
    onto the broker loop so core state can be inspected safely.
    """

    def __init__(self, config: BrokerConfig | None = None) -> None:
        self._config = config or BrokerConfig(port=0)
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._stop: asyncio.Event | None = None
        self._started = threading.Event()
        self.server: BrokerServer | None = None
        self.port: int | None = None

    def start(self) -> "ThreadedBroker":
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        if not self._started.wait(10):
            raise RuntimeError("broker thread failed to start")
        return self

    def _run(self) -> None:
        async def main() -> None:
            self.server = BrokerServer(self._config)
            self._loop = asyncio.get_running_loop()
            self._stop = asyncio.Event()
            await self.server.start()
            self.port = self.server.port
            self._started.set()
            await self._stop.wait()
            await self.server.stop()

        asyncio.run(main())

    def call(self, fn: Callable[[BrokerCore], Any]) -> Any:
        """Run ``fn(core)`` on the broker loop and return its result."""
        assert self._loop is not None and self.server is not None

        async def runner() -> Any:
            return fn(self.server.core)

        return asyncio.run_coroutine_threadsafe(runner(), self._loop).result(10)

    def stop(self) -> None:
        if self._loop is not None and self._stop is not None:
            self._loop.call_soon_threadsafe(self._stop.set)
        if self._thread is not None:
            self._thread.join(10)
