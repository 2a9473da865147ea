"""Minimal asyncio MQTT client for load generation and integration tests.

Covers exactly the broker's feature subset: QoS 0/1, clean sessions.
Received messages are passed to the ``on_message`` callback when given,
otherwise queued on ``.messages``.
"""

from __future__ import annotations

import asyncio
import itertools
from typing import Callable

from . import transport as mq

__all__ = ["MqttClient", "SubscribeError"]

_ACK_TIMEOUT = 15.0


class SubscribeError(Exception):
    """The broker refused a subscription entry (return code 0x80)."""


class MqttClient:
    def __init__(
        self,
        client_id: str,
        on_message: Callable[[str, bytes], None] | None = None,
    ) -> None:
        self.client_id = client_id
        self.on_message = on_message
        self.messages: asyncio.Queue[tuple[str, bytes]] = asyncio.Queue()
        self._reader: asyncio.StreamReader | None = None
        self._writer: asyncio.StreamWriter | None = None
        self._reader_task: asyncio.Task | None = None
        self._pids = itertools.cycle(range(1, 0x10000))
        self._pending: dict[tuple[type, int], asyncio.Future] = {}
        self._closed = asyncio.Event()

    async def connect(self, host: str, port: int, keep_alive: int = 0) -> None:
        self._reader, self._writer = await asyncio.open_connection(host, port)
        self._writer.write(mq.encode(mq.Connect(self.client_id, keep_alive)))
        await self._writer.drain()
        decoder = mq.PacketDecoder()
        while True:
            data = await asyncio.wait_for(self._reader.read(4096), _ACK_TIMEOUT)
            if not data:
                raise ConnectionError("connection closed before CONNACK")
            packets = decoder.feed(data)
            if packets:
                break
        ack = packets[0]
        if not isinstance(ack, mq.ConnAck) or ack.return_code != 0:
            raise ConnectionError(f"connect refused: {ack}")
        for pkt in packets[1:]:
            self._dispatch(pkt)
        self._reader_task = asyncio.create_task(self._read_loop(decoder))

    async def _read_loop(self, decoder: mq.PacketDecoder) -> None:
        assert self._reader is not None
        try:
            while True:
                data = await self._reader.read(65536)
                if not data:
                    break
                for pkt in decoder.feed(data):
                    self._dispatch(pkt)
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            self._closed.set()
            for fut in self._pending.values():
                if not fut.done():
                    fut.set_exception(ConnectionError("connection lost"))

    def _dispatch(self, pkt: mq.Packet) -> None:
        if isinstance(pkt, mq.Publish):
            if pkt.qos == 1 and pkt.packet_id and self._writer is not None:
                self._writer.write(mq.encode(mq.PubAck(pkt.packet_id)))
            if self.on_message is not None:
                self.on_message(pkt.topic, pkt.payload)
            else:
                self.messages.put_nowait((pkt.topic, pkt.payload))
        elif isinstance(pkt, (mq.SubAck, mq.UnsubAck, mq.PubAck)):
            fut = self._pending.pop((type(pkt), pkt.packet_id), None)
            if fut is not None and not fut.done():
                fut.set_result(pkt)

    def _expect(self, kind: type, packet_id: int) -> asyncio.Future:
        fut: asyncio.Future = asyncio.get_running_loop().create_future()
        self._pending[(kind, packet_id)] = fut
        return fut

    async def subscribe(self, *entries: tuple[str, int] | str) -> tuple[int, ...]:
        """Subscribe and return the per-entry SubAck codes (0x80 = refused)."""
        assert self._writer is not None
        normalized = tuple(
            (e, 0) if isinstance(e, str) else e for e in entries
        )
        pid = next(self._pids)
        fut = self._expect(mq.SubAck, pid)
        self._writer.write(mq.encode(mq.Subscribe(pid, normalized)))
        await self._writer.drain()
        ack: mq.SubAck = await asyncio.wait_for(fut, _ACK_TIMEOUT)
        return ack.return_codes

    async def unsubscribe(self, *filters: str) -> None:
        assert self._writer is not None
        pid = next(self._pids)
        fut = self._expect(mq.UnsubAck, pid)
        self._writer.write(mq.encode(mq.Unsubscribe(pid, filters)))
        await self._writer.drain()
        await asyncio.wait_for(fut, _ACK_TIMEOUT)

    async def publish(
        self, topic: str, payload: bytes = b"", qos: int = 0, wait_ack: bool = False
    ) -> None:
        """Write a PUBLISH; with ``wait_ack`` a QoS 1 publish awaits its PubAck."""
        assert self._writer is not None
        pid = next(self._pids) if qos else None
        fut = self._expect(mq.PubAck, pid) if (qos and wait_ack) else None
        self._writer.write(mq.encode(mq.Publish(topic, payload, qos, pid)))
        if fut is not None:
            await self._writer.drain()
            await asyncio.wait_for(fut, _ACK_TIMEOUT)

    async def flush(self) -> None:
        assert self._writer is not None
        await self._writer.drain()

    async def ping(self) -> None:
        assert self._writer is not None
        self._writer.write(mq.encode(mq.PingReq()))
        await self._writer.drain()

    async def disconnect(self) -> None:
        if self._writer is None:
            return
        try:
            self._writer.write(mq.encode(mq.Disconnect()))
            await self._writer.drain()
        except ConnectionError:
            pass
        if self._reader_task is not None:
            self._reader_task.cancel()
        try:
            self._writer.close()
            await self._writer.wait_closed()
        except (ConnectionError, OSError):
            pass
        self._writer = None
