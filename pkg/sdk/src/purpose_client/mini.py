"""A small threaded MQTT 3.1.1 client (QoS 0/1, clean sessions).

Provides the client surface PurposeClient wraps: ``connect``, ``publish``
(blocking on the PubAck for QoS 1), ``subscribe`` (blocking, returns the
SubAck codes), ``unsubscribe``, ``disconnect``, and an ``on_message``
callback.  Messages are dispatched from a dedicated thread, so calling
client methods from inside the callback cannot deadlock the reader.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
from typing import Callable

__all__ = ["MiniMqttClient", "MqttError"]

_ACK_TIMEOUT = 15.0


class MqttError(Exception):
    pass


# -- tiny codec (client-side needs only) ----------------------------------------


def _string(s: str) -> bytes:
    data = s.encode("utf-8")
    return struct.pack("!H", len(data)) + data


def _remaining(n: int) -> bytes:
    out = bytearray()
    while True:
        n, digit = divmod(n, 128)
        out.append(digit | (0x80 if n else 0))
        if not n:
            return bytes(out)


def _frame(first: int, body: bytes) -> bytes:
    return bytes([first]) + _remaining(len(body)) + body


def encode_connect(client_id: str, keep_alive: int) -> bytes:
    body = (
        b"\x00\x04MQTT" + bytes([4, 0x02]) + struct.pack("!H", keep_alive)
        + _string(client_id)
    )
    return _frame(0x10, body)


def encode_publish(
    topic: str, payload: bytes, qos: int, packet_id: int | None, dup: bool = False
) -> bytes:
    flags = (0x08 if dup else 0) | (qos << 1)
    body = _string(topic)
    if qos:
        body += struct.pack("!H", packet_id)
    return _frame(0x30 | flags, body + payload)


def encode_subscribe(packet_id: int, topic: str, qos: int) -> bytes:
    return _frame(0x82, struct.pack("!H", packet_id) + _string(topic) + bytes([qos]))


def encode_unsubscribe(packet_id: int, topic: str) -> bytes:
    return _frame(0xA2, struct.pack("!H", packet_id) + _string(topic))


def encode_puback(packet_id: int) -> bytes:
    return _frame(0x40, struct.pack("!H", packet_id))


PINGREQ = b"\xc0\x00"
DISCONNECT = b"\xe0\x00"


def split_frame(buf: bytearray) -> tuple[int, bytes] | None:
    """Pop one frame off the buffer: (first byte, body), or None if short."""
    if len(buf) < 2:
        return None
    remaining = 0
    shift = 0
    pos = 1
    while True:
        if pos >= len(buf):
            return None
        byte = buf[pos]
        remaining |= (byte & 0x7F) << shift
        pos += 1
        if not byte & 0x80:
            break
        shift += 7
        if shift > 21:
            raise MqttError("remaining length overflow")
    if len(buf) < pos + remaining:
        return None
    first = buf[0]
    body = bytes(buf[pos : pos + remaining])
    del buf[: pos + remaining]
    return first, body


# -- the client ---------------------------------------------------------------------


class MiniMqttClient:
    def __init__(self, client_id: str, clean_session: bool = True) -> None:
        if not clean_session:
            raise MqttError("only clean sessions are supported")
        self.client_id = client_id
        self.on_message: Callable[[str, bytes], None] | None = None
        self._sock: socket.socket | None = None
        self._write_lock = threading.Lock()
        self._pending: dict[tuple[int, int], "_Pending"] = {}
        self._pending_lock = threading.Lock()
        self._connack: queue.Queue[int] = queue.Queue()
        self._dispatch: queue.Queue = queue.Queue()
        self._next_id = 0
        self._threads: list[threading.Thread] = []
        self._closing = threading.Event()

    # -- connection lifecycle -------------------------------------------------

    def connect(self, host: str, port: int = 1883, keep_alive: int = 60) -> None:
        self._sock = socket.create_connection((host, port), timeout=10)
        self._sock.settimeout(0.5)
        self._closing.clear()
        for target in (self._read_loop, self._dispatch_loop):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)
        self._send(encode_connect(self.client_id, keep_alive))
        try:
            rc = self._connack.get(timeout=_ACK_TIMEOUT)
        except queue.Empty:
            self.disconnect()
            raise MqttError("no CONNACK from broker") from None
        if rc != 0:
            self.disconnect()
            raise MqttError(f"connection refused, code {rc}")
        if keep_alive:
            t = threading.Thread(
                target=self._ping_loop, args=(max(1.0, keep_alive / 2),), daemon=True
            )
            t.start()
            self._threads.append(t)

    def disconnect(self) -> None:
        if self._sock is None:
            return
        self._closing.set()
        try:
            self._send(DISCONNECT)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass
        self._dispatch.put(None)
        for t in self._threads:
            if t is not threading.current_thread():
                t.join(timeout=2)
        self._threads.clear()
        self._sock = None

    # -- operations ----------------------------------------------------------------

    def publish(self, topic: str, payload: bytes = b"", qos: int = 0) -> None:
        """QoS 0 returns immediately; QoS 1 blocks until the broker's PubAck."""
        if qos not in (0, 1):
            raise MqttError(f"unsupported qos {qos}")
        if qos == 0:
            self._send(encode_publish(topic, payload, 0, None))
            return
        packet_id = self._claim_id()
        pending = self._expect(0x40, packet_id)
        self._send(encode_publish(topic, payload, 1, packet_id))
        pending.wait("publish")

    def subscribe(self, topic: str, qos: int = 0) -> tuple[int, ...]:
        """Blocks until the SubAck; returns its return codes (0x80 = refused)."""
        packet_id = self._claim_id()
        pending = self._expect(0x90, packet_id)
        self._send(encode_subscribe(packet_id, topic, qos))
        return tuple(pending.wait("subscribe"))

    def unsubscribe(self, topic: str) -> None:
        packet_id = self._claim_id()
        pending = self._expect(0xB0, packet_id)
        self._send(encode_unsubscribe(packet_id, topic))
        pending.wait("unsubscribe")

    # -- internals ---------------------------------------------------------------------

    def _send(self, data: bytes) -> None:
        if self._sock is None:
            raise MqttError("not connected")
        with self._write_lock:
            self._sock.sendall(data)

    def _claim_id(self) -> int:
        with self._pending_lock:
            self._next_id = self._next_id % 0xFFFF + 1
            return self._next_id

    def _expect(self, ptype: int, packet_id: int) -> "_Pending":
        pending = _Pending()
        with self._pending_lock:
            self._pending[(ptype, packet_id)] = pending
        return pending

    def _read_loop(self) -> None:
        buf = bytearray()
        while not self._closing.is_set():
            try:
                data = self._sock.recv(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            if not data:
                break
            buf += data
            while True:
                frame = split_frame(buf)
                if frame is None:
                    break
                self._handle(*frame)
        self._fail_all_pending()

    def _handle(self, first: int, body: bytes) -> None:
        ptype = first >> 4
        if ptype == 2:  # CONNACK
            self._connack.put(body[1])
        elif ptype == 3:  # PUBLISH
            qos = (first >> 1) & 0x03
            tlen = struct.unpack_from("!H", body)[0]
            topic = body[2 : 2 + tlen].decode("utf-8")
            pos = 2 + tlen
            if qos:
                (packet_id,) = struct.unpack_from("!H", body, pos)
                pos += 2
                self._send(encode_puback(packet_id))
            self._dispatch.put((topic, body[pos:]))
        elif ptype in (4, 9, 11):  # PUBACK, SUBACK, UNSUBACK
            (packet_id,) = struct.unpack_from("!H", body)
            with self._pending_lock:
                pending = self._pending.pop((first & 0xF0, packet_id), None)
            if pending is not None:
                pending.resolve(tuple(body[2:]))
        # PINGRESP and anything else: nothing to do

    def _dispatch_loop(self) -> None:
        while True:
            item = self._dispatch.get()
            if item is None:
                return
            if self.on_message is not None:
                self.on_message(*item)

    def _ping_loop(self, interval: float) -> None:
        while not self._closing.wait(interval):
            try:
                self._send(PINGREQ)
            except (MqttError, OSError):
                return

    def _fail_all_pending(self) -> None:
        with self._pending_lock:
            pending, self._pending = self._pending, {}
        for p in pending.values():
            p.abort()


class _Pending:
    __slots__ = ("_event", "_value", "_aborted")

    def __init__(self) -> None:
        self._event = threading.Event()
        self._value: tuple[int, ...] = ()
        self._aborted = False

    def resolve(self, value: tuple[int, ...]) -> None:
        self._value = value
        self._event.set()

    def abort(self) -> None:
        self._aborted = True
        self._event.set()

    def wait(self, what: str) -> tuple[int, ...]:
        if not self._event.wait(_ACK_TIMEOUT):
            raise MqttError(f"timed out waiting for {what} acknowledgment")
        if self._aborted:
            raise MqttError(f"connection lost before {what} acknowledgment")
        return self._value
