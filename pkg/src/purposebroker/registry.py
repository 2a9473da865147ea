"""Subscription access purposes, presubscriptions, and pause state.

This store complements the broker's routing table: routing holds only the
active (unpaused) subscriptions, while the registry remembers every
subscription's access purpose and QoS so a paused subscription can later be
recreated without client involvement.
"""

from __future__ import annotations

from dataclasses import dataclass

from .purposes import Purpose
from .topics import TopicFilter, TopicName, matches, overlaps

__all__ = [
    "SubscriptionRecord",
    "Presubscription",
    "UnknownSubscription",
    "SubscriptionRegistry",
]


class UnknownSubscription(KeyError):
    """Pause/unpause addressed a subscription that does not exist."""


@dataclass(slots=True)
class SubscriptionRecord:
    client_id: str
    filter: TopicFilter
    qos: int
    ap: Purpose | None
    paused: bool = False


@dataclass(frozen=True, slots=True)
class Presubscription:
    client_id: str
    filter: TopicFilter
    ap: Purpose


class SubscriptionRegistry:
    """Records keyed by (client id, canonical filter text)."""

    def __init__(self) -> None:
        self._records: dict[tuple[str, str], SubscriptionRecord] = {}
        self._presubs: dict[tuple[str, str], Presubscription] = {}

    def upsert(
        self,
        client_id: str,
        flt: TopicFilter,
        qos: int,
        ap: Purpose | None,
        *,
        consume_presub: bool = True,
    ) -> SubscriptionRecord:
        """Store (or overwrite) a subscription record, unpaused.

        A subscription without an access purpose consumes a presubscription
        stored for the same client and exact filter, adopting its purpose.
        """
        key = (client_id, str(flt))
        if ap is None and consume_presub:
            pre = self._presubs.pop(key, None)
            if pre is not None:
                ap = pre.ap
        record = SubscriptionRecord(client_id, flt, qos, ap)
        self._records[key] = record
        return record

    def remove(self, client_id: str, flt: TopicFilter) -> None:
        self._records.pop((client_id, str(flt)), None)

    def get(self, client_id: str, flt: TopicFilter) -> SubscriptionRecord | None:
        return self._records.get((client_id, str(flt)))

    def add_presubscription(self, pre: Presubscription) -> None:
        self._presubs[(pre.client_id, str(pre.filter))] = pre

    def presubscriptions(self) -> list[Presubscription]:
        return list(self._presubs.values())

    def all_records(self) -> list[SubscriptionRecord]:
        return list(self._records.values())

    def client_records(self, client_id: str) -> list[SubscriptionRecord]:
        return [r for r in self._records.values() if r.client_id == client_id]

    def matching_records(
        self, client_id: str, topic: TopicName
    ) -> list[SubscriptionRecord]:
        """The client's records (paused or not) whose filter matches the topic."""
        return [
            r
            for (cid, _), r in self._records.items()
            if cid == client_id and matches(r.filter, topic)
        ]

    def records_overlapping(self, flt: TopicFilter) -> list[SubscriptionRecord]:
        """All records, any client, whose filter overlaps the given filter."""
        return [r for r in self._records.values() if overlaps(r.filter, flt)]

    def set_paused(self, client_id: str, flt: TopicFilter, paused: bool) -> None:
        record = self._records.get((client_id, str(flt)))
        if record is None:
            raise UnknownSubscription(f"{client_id}:{flt}")
        record.paused = paused

    def remove_client(self, client_id: str) -> None:
        """Clean-session teardown: records go, presubscriptions survive."""
        gone = [k for k in self._records if k[0] == client_id]
        for k in gone:
            del self._records[k]
