"""The purpose-limitation decision core.

Three enforcement modes are selectable at runtime, plus two benchmark
baselines:

* ``fos`` (filter on subscribe): subscriptions are authorized against the
  effective purposes of their whole filter space; reservation changes
  re-authorize affected subscriptions by pausing or unpausing them.
* ``fop`` (filter on publish): every outgoing message is gated against the
  published topic's combined effective purposes.
* ``hybrid``: subscriptions with no deliverable topic at all are refused
  up front; everything else is gated per message like ``fop``.
* ``off``: the engine is bypassed entirely (vanilla broker baseline).
* ``scan``: inbound topics are classified for commands but nothing is
  enforced or executed (command-scanning-cost baseline).

The engine only decides; mutating the routing table is the broker's job.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

from .commands import (
    DEFAULT_KEYWORDS,
    CommandKind,
    Keywords,
    MalformedCommand,
    classify,
    parse_ap,
)
from .policy import ReservationStore, StoreKind, UnreservedPolicy, ChangeNotice
from .purposes import Purpose, is_compatible
from .registry import SubscriptionRecord, SubscriptionRegistry
from .topics import MalformedTopic, TopicFilter, TopicName, parse_filter

__all__ = [
    "Mode",
    "EngineConfig",
    "SubscribeDecision",
    "PauseAction",
    "FilterEngine",
]

log = logging.getLogger(__name__)


class Mode(enum.Enum):
    OFF = "off"
    SCAN = "scan"
    FOS = "fos"
    FOP = "fop"
    HYBRID = "hybrid"


@dataclass
class EngineConfig:
    mode: Mode = Mode.FOP
    strict: bool = False
    store_kind: StoreKind = StoreKind.TREE
    cache: bool = False

    def copy(self) -> "EngineConfig":
        return replace(self)


@dataclass(frozen=True, slots=True)
class SubscribeDecision:
    allowed: bool
    effective_filter: TopicFilter | None  # access-purpose wrapper stripped
    granted_qos: int | None  # None when denied

    @classmethod
    def deny(cls, flt: TopicFilter | None = None) -> "SubscribeDecision":
        return cls(False, flt, None)


@dataclass(frozen=True, slots=True)
class PauseAction:
    client_id: str
    filter: TopicFilter
    pause: bool  # False means unpause


class FilterEngine:
    def __init__(
        self,
        config: EngineConfig,
        store: ReservationStore,
        registry: SubscriptionRegistry,
        keywords: Keywords = DEFAULT_KEYWORDS,
    ) -> None:
        self.config = config
        self.store = store
        self.registry = registry
        self.keywords = keywords

    # -- subscribe-time ------------------------------------------------------

    def on_subscribe(
        self, client_id: str, raw_filter_text: str, qos: int
    ) -> SubscribeDecision:
        """Authorize one subscription entry and record it in the registry.

        An ``!AP/<filter>{p}`` wrapper is parsed and stripped in every mode
        except ``off``; a plain filter subscribes without an access purpose
        (possibly adopting one from a presubscription).
        """
        mode = self.config.mode
        if mode is Mode.OFF:
            try:
                flt = parse_filter(raw_filter_text)
            except MalformedTopic:
                return SubscribeDecision.deny()
            self.registry.upsert(client_id, flt, qos, None, consume_presub=False)
            return SubscribeDecision(True, flt, qos)

        ap: Purpose | None = None
        kind = classify(raw_filter_text, self.keywords)
        if kind is CommandKind.AP:
            try:
                cmd = parse_ap(raw_filter_text, self.keywords)
            except MalformedCommand:
                return SubscribeDecision.deny()
            flt, ap = cmd.filter, cmd.ap
        elif kind is CommandKind.DATA:
            try:
                flt = parse_filter(raw_filter_text)
            except MalformedTopic:
                return SubscribeDecision.deny()
        else:
            # reserve/presub/set keywords are meaningless as subscriptions
            return SubscribeDecision.deny()

        record = self.registry.upsert(client_id, flt, qos, ap)
        if self._subscription_allowed(flt, record.ap):
            return SubscribeDecision(True, flt, qos)
        return SubscribeDecision.deny(flt)

    def _subscription_allowed(self, flt: TopicFilter, ap: Purpose | None) -> bool:
        mode = self.config.mode
        if mode is Mode.FOS:
            return self._fos_allows(flt, ap)
        if mode is Mode.HYBRID:
            return self._hybrid_allows(flt, ap)
        return True  # off / scan / fop accept everything up front

    def _unreserved_policy(self) -> UnreservedPolicy:
        if self.config.strict:
            return UnreservedPolicy.DENY_ALL
        return UnreservedPolicy.ALLOW_ALL

    def _fos_allows(self, flt: TopicFilter, ap: Purpose | None) -> bool:
        if self.config.strict and ap is None:
            return False
        eip = self.store.filter_eip(flt, self._unreserved_policy())
        if eip.unrestricted:
            return True
        return ap is not None and is_compatible(ap, eip.tuple)

    def _hybrid_allows(self, flt: TopicFilter, ap: Purpose | None) -> bool:
        # Refuse only subscriptions with no deliverable topic at all; any
        # partially compatible filter is accepted and gated per message.
        if ap is None:
            return not self.config.strict
        tuples, unmatched = self.store.filter_profiles(flt)
        if unmatched and not self.config.strict:
            return True  # some sub-space is unreserved, hence deliverable
        return any(is_compatible(ap, t) for t in tuples)

    # -- publish-time ----------------------------------------------------------

    def on_deliver(self, client_id: str, topic: TopicName) -> bool:
        """May the routed message on ``topic`` go out to this client?"""
        mode = self.config.mode
        if mode in (Mode.OFF, Mode.SCAN, Mode.FOS):
            return True  # fos enforces at subscribe time and via pausing
        eip = self.store.combined_eip(topic)
        if eip.unrestricted:
            return not self.config.strict
        for record in self.registry.matching_records(client_id, topic):
            if (
                not record.paused
                and record.ap is not None
                and is_compatible(record.ap, eip.tuple)
            ):
                return True
        return False

    # -- policy-change time ------------------------------------------------------

    def on_reservation_change(self, notice: ChangeNotice) -> list[PauseAction]:
        """Re-authorize subscriptions affected by a reservation write.

        Only ``fos`` reacts: newly incompatible subscriptions are paused and
        newly compatible ones unpaused.  Publish-gating modes need no action.
        """
        if self.config.mode is not Mode.FOS:
            return []
        return self._reevaluate(self.registry.records_overlapping(notice.filter))

    def evaluate_mode_switch(
        self, old: EngineConfig, new: EngineConfig
    ) -> list[PauseAction]:
        """Pause/unpause deltas for a runtime configuration change.

        The engine must already be operating on ``new`` (and on a rebuilt
        store, for store/cache switches) when this is called.
        """
        if new.mode is Mode.FOS:
            return self._reevaluate(self.registry.all_records())
        if old.mode is Mode.FOS:
            return [
                PauseAction(r.client_id, r.filter, pause=False)
                for r in self.registry.all_records()
                if r.paused
            ]
        return []

    def _reevaluate(self, records: list[SubscriptionRecord]) -> list[PauseAction]:
        actions: list[PauseAction] = []
        for record in records:
            ok = self._subscription_allowed(record.filter, record.ap)
            if ok and record.paused:
                actions.append(PauseAction(record.client_id, record.filter, pause=False))
            elif not ok and not record.paused:
                actions.append(PauseAction(record.client_id, record.filter, pause=True))
        return actions
