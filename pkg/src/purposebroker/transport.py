"""MQTT 3.1.1 binary codec for the QoS 0/1, clean-session subset.

Framing follows the MQTT 3.1.1 control packet layout: a fixed header byte
(type in the high nibble, flags in the low), a variable-length remaining
length (1..4 bytes, 7 bits per byte with a continuation bit), then the
variable header and payload.  Strings are UTF-8 with a 16-bit big-endian
length prefix.

Unsupported protocol features decode to ProtocolViolation: QoS 2, retained
messages, wills, username/password, persistent sessions, and MQTT versions
other than 3.1.1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

__all__ = [
    "ProtocolViolation",
    "Connect",
    "ConnAck",
    "Publish",
    "PubAck",
    "Subscribe",
    "SubAck",
    "Unsubscribe",
    "UnsubAck",
    "PingReq",
    "PingResp",
    "Disconnect",
    "Packet",
    "encode",
    "decode",
    "PacketDecoder",
    "DEFAULT_MAX_PACKET_SIZE",
    "SUBACK_FAILURE",
]

DEFAULT_MAX_PACKET_SIZE = 256 * 1024
SUBACK_FAILURE = 0x80

_PROTOCOL_NAME = b"\x00\x04MQTT"
_PROTOCOL_LEVEL = 4


class ProtocolViolation(Exception):
    """Malformed or unsupported bytes on the wire.

    ``connack_code`` is set when MQTT prescribes a CONNACK refusal code to
    send before closing (e.g. 0x01 for a bad protocol level).
    """

    def __init__(self, message: str, connack_code: int | None = None) -> None:
        super().__init__(message)
        self.connack_code = connack_code


@dataclass(frozen=True, slots=True)
class Connect:
    client_id: str
    keep_alive: int = 60
    clean_session: bool = True


@dataclass(frozen=True, slots=True)
class ConnAck:
    return_code: int = 0
    session_present: bool = False


@dataclass(frozen=True, slots=True)
class Publish:
    topic: str
    payload: bytes = b""
    qos: int = 0
    packet_id: int | None = None  # required exactly when qos == 1
    dup: bool = False
    retain: bool = False  # must stay False; kept for wire fidelity


@dataclass(frozen=True, slots=True)
class PubAck:
    packet_id: int


@dataclass(frozen=True, slots=True)
class Subscribe:
    packet_id: int
    entries: tuple[tuple[str, int], ...]  # (filter text, requested qos)


@dataclass(frozen=True, slots=True)
class SubAck:
    packet_id: int
    return_codes: tuple[int, ...]  # granted qos, or 0x80 for failure


@dataclass(frozen=True, slots=True)
class Unsubscribe:
    packet_id: int
    filters: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class UnsubAck:
    packet_id: int


@dataclass(frozen=True, slots=True)
class PingReq:
    pass


@dataclass(frozen=True, slots=True)
class PingResp:
    pass


@dataclass(frozen=True, slots=True)
class Disconnect:
    pass


Packet = (
    Connect
    | ConnAck
    | Publish
    | PubAck
    | Subscribe
    | SubAck
    | Unsubscribe
    | UnsubAck
    | PingReq
    | PingResp
    | Disconnect
)


# --- encoding ------------------------------------------------------------------


def _encode_string(s: str) -> bytes:
    data = s.encode("utf-8")
    if len(data) > 0xFFFF:
        raise ProtocolViolation("string longer than 65535 bytes")
    return struct.pack("!H", len(data)) + data


def _encode_remaining_length(n: int) -> bytes:
    if n > 268_435_455:
        raise ProtocolViolation("remaining length exceeds 4-byte limit")
    out = bytearray()
    while True:
        n, digit = divmod(n, 128)
        out.append(digit | (0x80 if n else 0))
        if not n:
            return bytes(out)


def _frame(first_byte: int, body: bytes) -> bytes:
    return bytes([first_byte]) + _encode_remaining_length(len(body)) + body


def encode(pkt: Packet) -> bytes:
    if isinstance(pkt, Publish):
        if pkt.qos not in (0, 1):
            raise ProtocolViolation(f"unsupported qos {pkt.qos}")
        if pkt.retain:
            raise ProtocolViolation("retained messages unsupported")
        flags = (0x08 if pkt.dup else 0) | (pkt.qos << 1)
        body = _encode_string(pkt.topic)
        if pkt.qos == 1:
            if not pkt.packet_id:
                raise ProtocolViolation("qos 1 publish needs a packet id")
            body += struct.pack("!H", pkt.packet_id)
        body += pkt.payload
        return _frame(0x30 | flags, body)
    if isinstance(pkt, PubAck):
        return _frame(0x40, struct.pack("!H", pkt.packet_id))
    if isinstance(pkt, Subscribe):
        if not pkt.entries:
            raise ProtocolViolation("subscribe needs at least one entry")
        body = struct.pack("!H", pkt.packet_id)
        for flt, qos in pkt.entries:
            if qos not in (0, 1):
                raise ProtocolViolation(f"unsupported subscription qos {qos}")
            body += _encode_string(flt) + bytes([qos])
        return _frame(0x82, body)
    if isinstance(pkt, SubAck):
        body = struct.pack("!H", pkt.packet_id) + bytes(pkt.return_codes)
        return _frame(0x90, body)
    if isinstance(pkt, Unsubscribe):
        if not pkt.filters:
            raise ProtocolViolation("unsubscribe needs at least one filter")
        body = struct.pack("!H", pkt.packet_id)
        for flt in pkt.filters:
            body += _encode_string(flt)
        return _frame(0xA2, body)
    if isinstance(pkt, UnsubAck):
        return _frame(0xB0, struct.pack("!H", pkt.packet_id))
    if isinstance(pkt, Connect):
        if not pkt.clean_session:
            raise ProtocolViolation("persistent sessions unsupported")
        flags = 0x02  # clean session only; no will, no auth
        body = (
            _PROTOCOL_NAME
            + bytes([_PROTOCOL_LEVEL, flags])
            + struct.pack("!H", pkt.keep_alive)
            + _encode_string(pkt.client_id)
        )
        return _frame(0x10, body)
    if isinstance(pkt, ConnAck):
        return _frame(0x20, bytes([1 if pkt.session_present else 0, pkt.return_code]))
    if isinstance(pkt, PingReq):
        return b"\xc0\x00"
    if isinstance(pkt, PingResp):
        return b"\xd0\x00"
    if isinstance(pkt, Disconnect):
        return b"\xe0\x00"
    raise ProtocolViolation(f"cannot encode {type(pkt).__name__}")


# --- decoding ------------------------------------------------------------------


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if self.remaining() < n:
            raise ProtocolViolation("packet body truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("!H", self.take(2))[0]

    def string(self) -> str:
        n = self.u16()
        raw = self.take(n)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ProtocolViolation("malformed UTF-8 string") from e

    def rest(self) -> bytes:
        out = self.data[self.pos :]
        self.pos = len(self.data)
        return out


def decode(
    buf: bytes | bytearray | memoryview,
    max_packet_size: int = DEFAULT_MAX_PACKET_SIZE,
) -> tuple[Packet, int] | None:
    """Decode the first packet in ``buf``; None when more bytes are needed.

    Returns the packet and the number of bytes consumed.
    """
    buf = bytes(buf)
    if len(buf) < 2:
        return None
    first = buf[0]
    # variable-length remaining length, at most 4 bytes
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
            raise ProtocolViolation("remaining length overflows 4 bytes")
    if remaining > max_packet_size:
        raise ProtocolViolation(f"packet of {remaining} bytes exceeds maximum")
    total = pos + remaining
    if len(buf) < total:
        return None
    ptype, flags = first >> 4, first & 0x0F
    r = _Reader(buf[pos:total])
    pkt = _decode_body(ptype, flags, r)
    if r.remaining():
        raise ProtocolViolation("trailing bytes inside packet body")
    return pkt, total


def _require_flags(flags: int, expected: int, name: str) -> None:
    if flags != expected:
        raise ProtocolViolation(f"bad fixed-header flags for {name}: {flags:#x}")


def _decode_body(ptype: int, flags: int, r: _Reader) -> Packet:
    if ptype == 3:  # PUBLISH
        qos = (flags >> 1) & 0x03
        if qos == 3:
            raise ProtocolViolation("publish qos bits 3 are malformed")
        if qos == 2:
            raise ProtocolViolation("qos 2 unsupported")
        if flags & 0x01:
            raise ProtocolViolation("retained messages unsupported")
        dup = bool(flags & 0x08)
        topic = r.string()
        packet_id = None
        if qos == 1:
            packet_id = r.u16()
            if packet_id == 0:
                raise ProtocolViolation("packet id 0 is invalid")
        return Publish(topic, r.rest(), qos, packet_id, dup)
    if ptype == 1:  # CONNECT
        _require_flags(flags, 0, "connect")
        if r.take(6) != _PROTOCOL_NAME:
            raise ProtocolViolation("unknown protocol name")
        if r.u8() != _PROTOCOL_LEVEL:
            raise ProtocolViolation("unsupported protocol level", connack_code=0x01)
        cflags = r.u8()
        if cflags & 0x01:
            raise ProtocolViolation("reserved connect flag set")
        if cflags & 0xFC:
            raise ProtocolViolation("will/auth connect flags unsupported")
        clean = bool(cflags & 0x02)
        if not clean:
            raise ProtocolViolation("persistent sessions unsupported")
        keep_alive = r.u16()
        return Connect(r.string(), keep_alive, clean)
    if ptype == 2:  # CONNACK
        _require_flags(flags, 0, "connack")
        ack_flags = r.u8()
        return ConnAck(r.u8(), session_present=bool(ack_flags & 0x01))
    if ptype == 4:  # PUBACK
        _require_flags(flags, 0, "puback")
        return PubAck(r.u16())
    if ptype == 8:  # SUBSCRIBE
        _require_flags(flags, 2, "subscribe")
        packet_id = r.u16()
        entries = []
        while r.remaining():
            flt = r.string()
            qos = r.u8()
            if qos > 1:
                raise ProtocolViolation("qos 2 subscriptions unsupported")
            entries.append((flt, qos))
        if not entries:
            raise ProtocolViolation("subscribe without entries")
        return Subscribe(packet_id, tuple(entries))
    if ptype == 9:  # SUBACK
        _require_flags(flags, 0, "suback")
        packet_id = r.u16()
        codes = tuple(r.rest())
        if not codes:
            raise ProtocolViolation("suback without return codes")
        return SubAck(packet_id, codes)
    if ptype == 10:  # UNSUBSCRIBE
        _require_flags(flags, 2, "unsubscribe")
        packet_id = r.u16()
        filters = []
        while r.remaining():
            filters.append(r.string())
        if not filters:
            raise ProtocolViolation("unsubscribe without filters")
        return Unsubscribe(packet_id, tuple(filters))
    if ptype == 11:  # UNSUBACK
        _require_flags(flags, 0, "unsuback")
        return UnsubAck(r.u16())
    if ptype == 12:
        _require_flags(flags, 0, "pingreq")
        return PingReq()
    if ptype == 13:
        _require_flags(flags, 0, "pingresp")
        return PingResp()
    if ptype == 14:
        _require_flags(flags, 0, "disconnect")
        return Disconnect()
    if ptype in (5, 6, 7):
        raise ProtocolViolation("qos 2 message flow unsupported")
    raise ProtocolViolation(f"unknown packet type {ptype}")


class PacketDecoder:
    """Incremental decoder: feed arbitrary chunks, get complete packets."""

    def __init__(self, max_packet_size: int = DEFAULT_MAX_PACKET_SIZE) -> None:
        self._buf = bytearray()
        self._max = max_packet_size

    def feed(self, data: bytes) -> list[Packet]:
        self._buf += data
        out: list[Packet] = []
        while True:
            result = decode(self._buf, self._max)
            if result is None:
                return out
            pkt, used = result
            del self._buf[:used]
            out.append(pkt)
