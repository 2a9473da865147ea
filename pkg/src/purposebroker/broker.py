"""Broker core: sessions, routing, command dispatch, and engine wiring.

The core is transport-agnostic: the TCP layer (server module) adapts
connections to ``Session`` objects whose ``send`` callable enqueues outbound
packets.  All handlers are synchronous and must run on a single owner (the
server's event loop), which makes every reservation write plus its dependent
re-authorizations atomic with respect to the publish path.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable

from . import transport as mq
from .audit import (
    AuditLog,
    DeliverEvent,
    DisconnectEvent,
    PauseEvent,
    ReserveEvent,
    SubscribeEvent,
    UnsubscribeEvent,
)
from .commands import (
    DEFAULT_KEYWORDS,
    CommandKind,
    Keywords,
    MalformedCommand,
    classify,
    parse_ap,
    parse_presub,
    parse_reserve,
    parse_set,
)
from .engine import EngineConfig, FilterEngine, Mode, PauseAction
from .policy import StoreKind, build_store
from .registry import Presubscription, SubscriptionRegistry
from .topics import MalformedTopic, TopicFilter, TopicName, parse_filter, parse_topic

__all__ = ["BrokerConfig", "RoutingTable", "Session", "BrokerCore", "CloseConnection"]

log = logging.getLogger(__name__)
decision_log = logging.getLogger("purposebroker.decisions")


class CloseConnection(Exception):
    """Raised by handlers when the connection must be dropped."""


@dataclass
class BrokerConfig:
    host: str = "127.0.0.1"
    port: int = 1883
    engine: EngineConfig = field(default_factory=EngineConfig)
    keywords: Keywords = DEFAULT_KEYWORDS
    lenient_unknown_commands: bool = True
    max_packet_size: int = mq.DEFAULT_MAX_PACKET_SIZE
    audit: bool = True


class _RouteNode:
    __slots__ = ("children", "entries")

    def __init__(self) -> None:
        self.children: dict[str, _RouteNode] = {}
        self.entries: dict[str, int] = {}  # client id -> qos


class RoutingTable:
    """Level trie over the active (unpaused) subscription entries."""

    def __init__(self) -> None:
        self._root = _RouteNode()
        self._by_client: dict[str, dict[str, TopicFilter]] = {}

    def insert(self, client_id: str, flt: TopicFilter, qos: int) -> None:
        node = self._root
        for level in flt.levels:
            node = node.children.setdefault(level, _RouteNode())
        node.entries[client_id] = qos
        self._by_client.setdefault(client_id, {})[str(flt)] = flt

    def remove(self, client_id: str, flt: TopicFilter) -> None:
        path: list[tuple[_RouteNode, str]] = []
        node = self._root
        for level in flt.levels:
            child = node.children.get(level)
            if child is None:
                return
            path.append((node, level))
            node = child
        node.entries.pop(client_id, None)
        for parent, level in reversed(path):
            child = parent.children[level]
            if child.children or child.entries:
                break
            del parent.children[level]
        filters = self._by_client.get(client_id)
        if filters:
            filters.pop(str(flt), None)
            if not filters:
                del self._by_client[client_id]

    def remove_client(self, client_id: str) -> None:
        for flt in list(self._by_client.get(client_id, {}).values()):
            self.remove(client_id, flt)

    def lookup(self, topic: TopicName) -> dict[str, int]:
        """Matching clients mapped to the highest matching subscription QoS."""
        found: dict[str, int] = {}
        self._lookup(self._root, topic.levels, 0, found)
        return found

    def _lookup(
        self, node: _RouteNode, tl: tuple[str, ...], i: int, found: dict[str, int]
    ) -> None:
        hash_child = node.children.get("#")
        if hash_child is not None:
            for cid, qos in hash_child.entries.items():
                if qos > found.get(cid, -1):
                    found[cid] = qos
        if i == len(tl):
            for cid, qos in node.entries.items():
                if qos > found.get(cid, -1):
                    found[cid] = qos
            return
        for key in (tl[i], "+"):
            child = node.children.get(key)
            if child is not None:
                self._lookup(child, tl, i + 1, found)

    def entries(self) -> list[tuple[str, str, int]]:
        """(client id, filter text, qos) triples, for introspection."""
        out: list[tuple[str, str, int]] = []
        self._walk(self._root, [], out)
        return sorted(out)

    def _walk(self, node: _RouteNode, path: list[str], out: list) -> None:
        for cid, qos in node.entries.items():
            out.append((cid, "/".join(path), qos))
        for level, child in node.children.items():
            path.append(level)
            self._walk(child, path, out)
            path.pop()


class Session:
    """One connected client as seen by the core."""

    __slots__ = ("client_id", "send", "close_cb", "_pids")

    def __init__(self, client_id: str, send: Callable[[mq.Packet], None]) -> None:
        self.client_id = client_id
        self.send = send
        self.close_cb: Callable[[], None] | None = None
        self._pids = itertools.cycle(range(1, 0x10000))

    def next_packet_id(self) -> int:
        return next(self._pids)


class BrokerCore:
    def __init__(self, config: BrokerConfig) -> None:
        self.config = config
        self.registry = SubscriptionRegistry()
        self.store = build_store(config.engine.store_kind, config.engine.cache)
        self.engine = FilterEngine(
            config.engine, self.store, self.registry, config.keywords
        )
        self.routing = RoutingTable()
        self.sessions: dict[str, Session] = {}
        self.audit = AuditLog(enabled=config.audit)

    # -- session lifecycle -----------------------------------------------------

    def connect(
        self, client_id: str, send: Callable[[mq.Packet], None]
    ) -> tuple[Session, Session | None]:
        """Register a session; an existing session under the same id is torn
        down (session takeover) and returned so the caller can close it."""
        old = self.sessions.get(client_id)
        if old is not None:
            self._teardown(old)
        session = Session(client_id, send)
        self.sessions[client_id] = session
        return session, old

    def disconnect(self, session: Session) -> None:
        if self.sessions.get(session.client_id) is session:
            self._teardown(session)
            self.audit.record(DisconnectEvent(session.client_id))

    def _teardown(self, session: Session) -> None:
        self.sessions.pop(session.client_id, None)
        self.routing.remove_client(session.client_id)
        self.registry.remove_client(session.client_id)

    # -- inbound packets ----------------------------------------------------------

    def handle_subscribe(self, session: Session, pkt: mq.Subscribe) -> None:
        codes: list[int] = []
        for filter_text, qos in pkt.entries:
            decision = self.engine.on_subscribe(session.client_id, filter_text, qos)
            flt = decision.effective_filter
            if decision.allowed:
                assert flt is not None and decision.granted_qos is not None
                self.routing.insert(session.client_id, flt, decision.granted_qos)
                codes.append(decision.granted_qos)
            else:
                codes.append(mq.SUBACK_FAILURE)
                if flt is not None:
                    # a denied re-subscribe must deactivate any earlier grant:
                    # the registry record was already overwritten above
                    self.routing.remove(session.client_id, flt)
                    # keep the record paused under fos so a later reservation
                    # change can activate it; otherwise forget it
                    if self.engine.config.mode is Mode.FOS:
                        self.registry.set_paused(session.client_id, flt, True)
                    else:
                        self.registry.remove(session.client_id, flt)
            record = self.registry.get(session.client_id, flt) if flt else None
            self.audit.record(
                SubscribeEvent(
                    session.client_id,
                    str(flt) if flt else filter_text,
                    str(record.ap) if record and record.ap else None,
                    decision.allowed,
                    retained=record is not None,
                )
            )
            decision_log.debug(
                "subscribe client=%s filter=%s outcome=%s",
                session.client_id,
                filter_text,
                "allow" if decision.allowed else "deny",
            )
        session.send(mq.SubAck(pkt.packet_id, tuple(codes)))

    def handle_unsubscribe(self, session: Session, pkt: mq.Unsubscribe) -> None:
        for filter_text in pkt.filters:
            flt = self._stripped_filter(filter_text)
            if flt is None:
                continue
            self.routing.remove(session.client_id, flt)
            self.registry.remove(session.client_id, flt)
            self.audit.record(UnsubscribeEvent(session.client_id, str(flt)))
        session.send(mq.UnsubAck(pkt.packet_id))

    def _stripped_filter(self, filter_text: str) -> TopicFilter | None:
        """Accepts both plain filters and their access-purpose wrapped form."""
        if self.engine.config.mode is not Mode.OFF:
            if classify(filter_text, self.config.keywords) is CommandKind.AP:
                try:
                    return parse_ap(filter_text, self.config.keywords).filter
                except MalformedCommand:
                    return None
        try:
            return parse_filter(filter_text)
        except MalformedTopic:
            return None

    def handle_publish(self, session: Session, pkt: mq.Publish) -> None:
        if pkt.qos == 1:
            assert pkt.packet_id is not None
            session.send(mq.PubAck(pkt.packet_id))
        if self.engine.config.mode is Mode.OFF:
            self._route(pkt)  # vanilla baseline: no command handling at all
            return
        try:
            kind = classify(
                pkt.topic,
                self.config.keywords,
                lenient=self.config.lenient_unknown_commands,
            )
        except MalformedCommand as e:
            self._command_error(pkt.topic, e)
            return
        if kind is CommandKind.DATA:
            if pkt.topic.partition("/")[0].startswith("!"):
                log.info("ignoring unknown command topic %r", pkt.topic)
                return
            self._route(pkt)
            return
        if self.engine.config.mode is Mode.SCAN:
            return  # scan baseline: commands are recognized but not executed
        try:
            self._execute_command(kind, pkt)
        except MalformedCommand as e:
            self._command_error(pkt.topic, e)

    def _command_error(self, topic: str, err: MalformedCommand) -> None:
        if self.config.lenient_unknown_commands:
            log.warning("dropping bad command %r: %s", topic, err)
            return
        raise CloseConnection(f"bad command {topic!r}: {err}")

    def _execute_command(self, kind: CommandKind, pkt: mq.Publish) -> None:
        kw = self.config.keywords
        if kind is CommandKind.RESERVE:
            cmd = parse_reserve(pkt.topic, kw)
            if cmd.tuple is None:
                notice = self.store.remove_reservation(cmd.filter)
                self.audit.record(ReserveEvent(str(cmd.filter), None, None))
            else:
                notice = self.store.set_reservation(cmd.filter, cmd.tuple)
                self.audit.record(
                    ReserveEvent(
                        str(cmd.filter),
                        tuple(sorted(str(p) for p in cmd.tuple.aip)),
                        tuple(sorted(str(p) for p in cmd.tuple.pip)),
                    )
                )
            decision_log.debug("reserve filter=%s tuple=%s", cmd.filter, cmd.tuple)
            self.apply_pause_actions(self.engine.on_reservation_change(notice))
        elif kind is CommandKind.PRESUB:
            cmd = parse_presub(pkt.topic, pkt.payload, kw)
            self.registry.add_presubscription(
                Presubscription(cmd.client_id, cmd.filter, cmd.ap)
            )
        elif kind is CommandKind.SET:
            cmd = parse_set(pkt.topic, kw)
            self._apply_setting(cmd.key, cmd.value)
        else:
            raise MalformedCommand(
                "access-purpose commands are only valid in subscriptions"
            )

    # -- routing ---------------------------------------------------------------------

    def _route(self, pkt: mq.Publish) -> None:
        try:
            topic = parse_topic(pkt.topic)
        except MalformedTopic:
            log.info("dropping unrouteable topic %r", pkt.topic)
            return
        targets = self.routing.lookup(topic)
        if not targets:
            return
        bypass = self.engine.config.mode is Mode.OFF
        for client_id, sub_qos in targets.items():
            if not bypass and not self.engine.on_deliver(client_id, topic):
                decision_log.debug(
                    "deliver client=%s topic=%s outcome=deny", client_id, pkt.topic
                )
                continue
            dst = self.sessions.get(client_id)
            if dst is None:
                continue
            qos = min(pkt.qos, sub_qos)
            packet_id = dst.next_packet_id() if qos else None
            dst.send(mq.Publish(pkt.topic, pkt.payload, qos, packet_id))
            self.audit.record(DeliverEvent(client_id, pkt.topic))
            decision_log.debug(
                "deliver client=%s topic=%s outcome=allow", client_id, pkt.topic
            )

    # -- pause bookkeeping ----------------------------------------------------------

    def apply_pause_actions(self, actions: list[PauseAction]) -> None:
        for action in actions:
            record = self.registry.get(action.client_id, action.filter)
            if record is None:
                continue
            if action.pause:
                self.routing.remove(action.client_id, action.filter)
                self.registry.set_paused(action.client_id, action.filter, True)
            else:
                self.registry.set_paused(action.client_id, action.filter, False)
                self.routing.insert(action.client_id, action.filter, record.qos)
            self.audit.record(
                PauseEvent(action.client_id, str(action.filter), action.pause)
            )
            decision_log.debug(
                "%s client=%s filter=%s",
                "pause" if action.pause else "unpause",
                action.client_id,
                action.filter,
            )

    # -- runtime settings --------------------------------------------------------------

    def _apply_setting(self, key: str, value: str) -> None:
        cfg = self.engine.config
        old = cfg.copy()
        try:
            if key == "mode":
                cfg.mode = Mode(value)
            elif key == "strict":
                cfg.strict = _parse_on_off(value)
            elif key == "store":
                cfg.store_kind = StoreKind(value)
                self._rebuild_store()
            elif key == "cache":
                cfg.cache = _parse_on_off(value)
                self._rebuild_store()
        except ValueError as e:
            raise MalformedCommand(f"bad value for setting {key!r}: {value!r}") from e
        self.apply_pause_actions(self.engine.evaluate_mode_switch(old, cfg))

    def _rebuild_store(self) -> None:
        cfg = self.engine.config
        new = build_store(cfg.store_kind, cfg.cache)
        for r in self.store.reservations():
            new.set_reservation(r.filter, r.tuple)
        self.store = new
        self.engine.store = new

    # -- introspection (local only, never exposed on the wire) ---------------------------

    def dump_state(self) -> dict:
        return {
            "reservations": sorted(
                (str(r.filter), str(r.tuple)) for r in self.store.reservations()
            ),
            "records": sorted(
                (r.client_id, str(r.filter), r.qos, str(r.ap) if r.ap else None, r.paused)
                for r in self.registry.all_records()
            ),
            "presubscriptions": sorted(
                (p.client_id, str(p.filter), str(p.ap))
                for p in self.registry.presubscriptions()
            ),
            "routing": self.routing.entries(),
        }


def _parse_on_off(value: str) -> bool:
    if value == "on":
        return True
    if value == "off":
        return False
    raise ValueError(value)
