"""Decision event recording and a post-hoc purpose-limitation auditor.

The broker appends one event per policy-relevant action (reservation write,
subscription, delivery, pause).  ``find_soundness_violations`` replays such
a log with its own minimal state tracking and string-level matching, fully
independent from the store and engine implementations, and reports every
delivery that reached a client holding no matching subscription with a
compatible access purpose while the topic was restricted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

__all__ = [
    "ReserveEvent",
    "SubscribeEvent",
    "UnsubscribeEvent",
    "DisconnectEvent",
    "DeliverEvent",
    "PauseEvent",
    "AuditEvent",
    "AuditLog",
    "find_soundness_violations",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class ReserveEvent:
    filter_text: str
    aip: tuple[str, ...] | None  # None means the reservation was removed
    pip: tuple[str, ...] | None


@dataclass(frozen=True, slots=True)
class SubscribeEvent:
    client_id: str
    filter_text: str
    ap: str | None
    allowed: bool
    retained: bool  # a registry record exists after this event


@dataclass(frozen=True, slots=True)
class UnsubscribeEvent:
    client_id: str
    filter_text: str


@dataclass(frozen=True, slots=True)
class DisconnectEvent:
    client_id: str


@dataclass(frozen=True, slots=True)
class DeliverEvent:
    client_id: str
    topic_text: str


@dataclass(frozen=True, slots=True)
class PauseEvent:
    client_id: str
    filter_text: str
    paused: bool


AuditEvent = Union[
    ReserveEvent,
    SubscribeEvent,
    UnsubscribeEvent,
    DisconnectEvent,
    DeliverEvent,
    PauseEvent,
]


class AuditLog:
    """Collects events in order; disabled instances record nothing."""

    def __init__(self, enabled: bool = True) -> None:
        self.enabled = enabled
        self.events: list[AuditEvent] = []

    def record(self, event: AuditEvent) -> None:
        if self.enabled:
            self.events.append(event)

    def clear(self) -> None:
        self.events.clear()


# --- independent replay -------------------------------------------------------
#
# Deliberately separate, string-level reimplementations of topic matching and
# purpose-closure membership: the auditor must not trust the modules it audits.


def _topic_matched_by(filter_text: str, topic_text: str) -> bool:
    fl = filter_text.split("/")
    tl = topic_text.split("/")
    for i, lv in enumerate(fl):
        if lv == "#":
            return True
        if i >= len(tl) or (lv != "+" and lv != tl[i]):
            return False
    return len(fl) == len(tl)


def _prefixes(purpose_text: str) -> list[str]:
    segs = purpose_text.split("/")
    return ["/".join(segs[: i + 1]) for i in range(len(segs))]


def _closure_member(purpose_text: str, pool: set[str]) -> bool:
    return any(p in pool for p in _prefixes(purpose_text))


def find_soundness_violations(events: list[AuditEvent]) -> list[DeliverEvent]:
    """Deliveries where the topic was restricted but the receiving client held
    no matching subscription record with a compatible access purpose."""
    reservations: dict[str, tuple[set[str], set[str]]] = {}
    records: dict[tuple[str, str], str | None] = {}
    violations: list[DeliverEvent] = []

    for ev in events:
        if isinstance(ev, ReserveEvent):
            if ev.aip is None:
                reservations.pop(ev.filter_text, None)
            else:
                reservations[ev.filter_text] = (set(ev.aip), set(ev.pip or ()))
        elif isinstance(ev, SubscribeEvent):
            if ev.retained:
                records[(ev.client_id, ev.filter_text)] = ev.ap
            else:
                records.pop((ev.client_id, ev.filter_text), None)
        elif isinstance(ev, UnsubscribeEvent):
            records.pop((ev.client_id, ev.filter_text), None)
        elif isinstance(ev, DisconnectEvent):
            for key in [k for k in records if k[0] == ev.client_id]:
                del records[key]
        elif isinstance(ev, DeliverEvent):
            aip_union: set[str] = set()
            pip_union: set[str] = set()
            restricted = False
            for ftext, (aip, pip) in reservations.items():
                if _topic_matched_by(ftext, ev.topic_text):
                    restricted = True
                    aip_union |= aip
                    pip_union |= pip
            if not restricted:
                continue
            sound = False
            for (cid, ftext), ap in records.items():
                if cid != ev.client_id or ap is None:
                    continue
                if not _topic_matched_by(ftext, ev.topic_text):
                    continue
                if _closure_member(ap, aip_union) and not _closure_member(
                    ap, pip_union
                ):
                    sound = True
                    break
            if not sound:
                violations.append(ev)
    return violations
