"""Reservation stores and effective-intended-purpose (EIP) queries.

A reservation binds an (AIP, PIP) tuple to a topic filter.  Two queries
drive enforcement:

* ``combined_eip(topic)``: the permissive union of every reservation whose
  filter matches the concrete topic, or Unrestricted when none does.
* ``filter_eip(filter, policy)``: the policy a subscription filter must
  satisfy as a whole.  A purpose is compatible with the result exactly when
  it is compatible with the combined EIP of every topic the filter can
  match (unreserved topics count as allow-all or deny-all depending on
  ``policy``).  Reservations partition the filter's topic space into
  finitely many co-match profiles; the result is the restrictive merge of
  the union tuple of each realizable profile.

Three interchangeable implementations are provided: a flat hash map, a
level trie, and a caching wrapper that memoizes query results and drops
the whole cache on any write.
"""

from __future__ import annotations

import enum
from abc import ABC, abstractmethod
from dataclasses import dataclass

from .purposes import IpTuple, merge_restrictive, merge_union
from .topics import TopicFilter, TopicName, matches, overlaps

__all__ = [
    "Reservation",
    "Eip",
    "UNRESTRICTED",
    "ChangeNotice",
    "UnreservedPolicy",
    "StoreKind",
    "ReservationStore",
    "FlatStore",
    "TreeStore",
    "CachedStore",
    "build_store",
]


@dataclass(frozen=True, slots=True)
class Reservation:
    filter: TopicFilter
    tuple: IpTuple


@dataclass(frozen=True, slots=True)
class Eip:
    """Effective intended purposes: a merged tuple, or Unrestricted (None)."""

    tuple: IpTuple | None = None

    @property
    def unrestricted(self) -> bool:
        return self.tuple is None


UNRESTRICTED = Eip(None)
_DENY_ALL = IpTuple()


@dataclass(frozen=True, slots=True)
class ChangeNotice:
    """Emitted by reservation writes; carries the filter that changed."""

    filter: TopicFilter


class UnreservedPolicy(enum.Enum):
    ALLOW_ALL = "allow"  # reservation-free topic space passes through
    DENY_ALL = "deny"  # strict mode: reservation-free space is blocked


class StoreKind(enum.Enum):
    FLAT = "flat"
    TREE = "tree"


class ReservationStore(ABC):
    """Reservation storage plus the EIP queries shared by all backends."""

    @abstractmethod
    def set_reservation(self, flt: TopicFilter, tup: IpTuple) -> ChangeNotice:
        """Store the tuple for the filter, overwriting any previous binding."""

    @abstractmethod
    def remove_reservation(self, flt: TopicFilter) -> ChangeNotice:
        """Drop the binding for exactly this filter; no-op when absent."""

    @abstractmethod
    def get(self, flt: TopicFilter) -> IpTuple | None:
        """The tuple bound to exactly this filter, if any."""

    @abstractmethod
    def reservations(self) -> list[Reservation]:
        """Snapshot of all stored reservations."""

    @abstractmethod
    def matching(self, topic: TopicName) -> list[Reservation]:
        """All reservations whose filter matches the concrete topic."""

    @abstractmethod
    def reservations_overlapping(self, flt: TopicFilter) -> list[Reservation]:
        """All reservations whose filter shares at least one topic with ``flt``."""

    def __len__(self) -> int:
        return len(self.reservations())

    def combined_eip(self, topic: TopicName) -> Eip:
        found = self.matching(topic)
        if not found:
            return UNRESTRICTED
        return Eip(merge_union([r.tuple for r in found]))

    def filter_profiles(self, flt: TopicFilter) -> tuple[list[IpTuple], bool]:
        """Merged tuples of each realizable reservation co-match profile within
        the filter's topic space, plus whether some topic in that space is
        matched by no reservation at all."""
        overlapping = self.reservations_overlapping(flt)
        if not overlapping:
            return [], True
        profiles, unmatched = _realizable_profiles(
            flt, [r.filter for r in overlapping]
        )
        tuples = [
            merge_union([overlapping[i].tuple for i in profile])
            for profile in sorted(profiles, key=sorted)
        ]
        return tuples, unmatched

    def filter_eip(self, flt: TopicFilter, policy: UnreservedPolicy) -> Eip:
        tuples, unmatched = self.filter_profiles(flt)
        if not tuples:
            if policy is UnreservedPolicy.ALLOW_ALL:
                return UNRESTRICTED
            return Eip(_DENY_ALL)
        branches = list(tuples)
        if unmatched and policy is UnreservedPolicy.DENY_ALL:
            branches.append(_DENY_ALL)
        return Eip(merge_restrictive(branches))


# --- realizable co-match profiles -------------------------------------------
#
# Walking the filter's topic space level by level, the only level values that
# can change which filters keep matching are the literals the filters mention
# at that position, plus one representative "fresh" value distinct from all of
# them.  Matching state per filter is a level index, absorbed-in-"#", or dead;
# all states are stable once the walk passes the longest filter, so exploring
# one level beyond it enumerates every distinct profile.

_FRESH = object()
_HASH = -1
_DEAD = -2


def _advance(levels: tuple[str, ...], state: int, symbol) -> int:
    if state < 0:
        return state  # absorbed or dead
    if state == len(levels):
        return _DEAD
    lv = levels[state]
    if lv == "#":
        return _HASH
    if lv == "+" or (symbol is not _FRESH and lv == symbol):
        return state + 1
    return _DEAD


def _accepting(levels: tuple[str, ...], state: int) -> bool:
    if state == _HASH:
        return True
    if state == _DEAD:
        return False
    if state == len(levels):
        return True
    return state == len(levels) - 1 and levels[state] == "#"


def _realizable_profiles(
    flt: TopicFilter, rfilters: list[TopicFilter]
) -> tuple[set[frozenset[int]], bool]:
    fl = flt.levels
    rls = [rf.levels for rf in rfilters]
    max_depth = max(len(fl), *(len(r) for r in rls)) + 1 if rls else len(fl) + 1
    profiles: set[frozenset[int]] = set()
    unmatched = False
    best_depth: dict[tuple, int] = {}

    def walk(depth: int, fstate: int, rstates: tuple[int, ...]) -> None:
        nonlocal unmatched
        if depth > 0 and _accepting(fl, fstate):
            profile = frozenset(
                i for i, s in enumerate(rstates) if _accepting(rls[i], s)
            )
            if profile:
                profiles.add(profile)
            else:
                unmatched = True
        if depth == max_depth:
            return
        key = (fstate,) + rstates
        if best_depth.get(key, max_depth + 1) <= depth:
            return
        best_depth[key] = depth
        symbols: set[str] = set()
        for levels, st in ((fl, fstate), *zip(rls, rstates)):
            if 0 <= st < len(levels) and levels[st] not in ("+", "#"):
                symbols.add(levels[st])
        for sym in (*symbols, _FRESH):
            nf = _advance(fl, fstate, sym)
            if nf == _DEAD:
                continue  # only topics inside the query filter's space count
            walk(depth + 1, nf, tuple(_advance(rls[i], s, sym) for i, s in enumerate(rstates)))

    walk(0, 0, tuple(0 for _ in rls))
    return profiles, unmatched


# --- flat store --------------------------------------------------------------


class FlatStore(ReservationStore):
    """Hash map keyed by canonical filter text; queries scan all entries."""

    def __init__(self) -> None:
        self._by_filter: dict[str, Reservation] = {}

    def set_reservation(self, flt: TopicFilter, tup: IpTuple) -> ChangeNotice:
        self._by_filter[str(flt)] = Reservation(flt, tup)
        return ChangeNotice(flt)

    def remove_reservation(self, flt: TopicFilter) -> ChangeNotice:
        self._by_filter.pop(str(flt), None)
        return ChangeNotice(flt)

    def get(self, flt: TopicFilter) -> IpTuple | None:
        r = self._by_filter.get(str(flt))
        return r.tuple if r else None

    def reservations(self) -> list[Reservation]:
        return list(self._by_filter.values())

    def matching(self, topic: TopicName) -> list[Reservation]:
        return [r for r in self._by_filter.values() if matches(r.filter, topic)]

    def reservations_overlapping(self, flt: TopicFilter) -> list[Reservation]:
        return [r for r in self._by_filter.values() if overlaps(r.filter, flt)]


# --- tree store ---------------------------------------------------------------


class _TrieNode:
    __slots__ = ("children", "reservation")

    def __init__(self) -> None:
        self.children: dict[str, _TrieNode] = {}
        self.reservation: Reservation | None = None


class TreeStore(ReservationStore):
    """Level trie mirroring the topic structure; queries walk the tree."""

    def __init__(self) -> None:
        self._root = _TrieNode()
        self._count = 0

    def set_reservation(self, flt: TopicFilter, tup: IpTuple) -> ChangeNotice:
        node = self._root
        for level in flt.levels:
            node = node.children.setdefault(level, _TrieNode())
        if node.reservation is None:
            self._count += 1
        node.reservation = Reservation(flt, tup)
        return ChangeNotice(flt)

    def remove_reservation(self, flt: TopicFilter) -> ChangeNotice:
        path: list[tuple[_TrieNode, str]] = []
        node = self._root
        for level in flt.levels:
            child = node.children.get(level)
            if child is None:
                return ChangeNotice(flt)
            path.append((node, level))
            node = child
        if node.reservation is not None:
            node.reservation = None
            self._count -= 1
        # prune now-empty branches
        for parent, level in reversed(path):
            child = parent.children[level]
            if child.children or child.reservation is not None:
                break
            del parent.children[level]
        return ChangeNotice(flt)

    def get(self, flt: TopicFilter) -> IpTuple | None:
        node = self._root
        for level in flt.levels:
            node = node.children.get(level)
            if node is None:
                return None
        return node.reservation.tuple if node.reservation else None

    def __len__(self) -> int:
        return self._count

    def reservations(self) -> list[Reservation]:
        out: list[Reservation] = []
        self._collect_subtree(self._root, out)
        return out

    def matching(self, topic: TopicName) -> list[Reservation]:
        out: list[Reservation] = []
        self._match(self._root, topic.levels, 0, out)
        return out

    def _match(self, node: _TrieNode, tl: tuple[str, ...], i: int, out: list) -> None:
        hash_child = node.children.get("#")
        if hash_child is not None and hash_child.reservation is not None:
            out.append(hash_child.reservation)  # "#" matches the rest, even none
        if i == len(tl):
            if node.reservation is not None:
                out.append(node.reservation)
            return
        for key in (tl[i], "+"):
            child = node.children.get(key)
            if child is not None:
                self._match(child, tl, i + 1, out)

    def reservations_overlapping(self, flt: TopicFilter) -> list[Reservation]:
        out: list[Reservation] = []
        self._overlap(self._root, flt.levels, 0, out)
        return out

    def _overlap(self, node: _TrieNode, fl: tuple[str, ...], i: int, out: list) -> None:
        if i < len(fl) and fl[i] == "#":
            self._collect_subtree(node, out)
            return
        hash_child = node.children.get("#")
        if hash_child is not None and hash_child.reservation is not None:
            out.append(hash_child.reservation)
        if i == len(fl):
            if node.reservation is not None:
                out.append(node.reservation)
            return
        if fl[i] == "+":
            for key, child in node.children.items():
                if key != "#":
                    self._overlap(child, fl, i + 1, out)
        else:
            for key in (fl[i], "+"):
                child = node.children.get(key)
                if child is not None:
                    self._overlap(child, fl, i + 1, out)

    def _collect_subtree(self, node: _TrieNode, out: list) -> None:
        if node.reservation is not None:
            out.append(node.reservation)
        for child in node.children.values():
            self._collect_subtree(child, out)


# --- caching wrapper ----------------------------------------------------------


class CachedStore(ReservationStore):
    """Memoizes EIP queries; the entire cache is dropped on any write."""

    def __init__(self, inner: ReservationStore) -> None:
        self._inner = inner
        self._combined: dict[str, Eip] = {}
        self._filter: dict[tuple[str, UnreservedPolicy], Eip] = {}

    def _invalidate(self) -> None:
        self._combined.clear()
        self._filter.clear()

    def set_reservation(self, flt: TopicFilter, tup: IpTuple) -> ChangeNotice:
        self._invalidate()
        return self._inner.set_reservation(flt, tup)

    def remove_reservation(self, flt: TopicFilter) -> ChangeNotice:
        self._invalidate()
        return self._inner.remove_reservation(flt)

    def get(self, flt: TopicFilter) -> IpTuple | None:
        return self._inner.get(flt)

    def reservations(self) -> list[Reservation]:
        return self._inner.reservations()

    def matching(self, topic: TopicName) -> list[Reservation]:
        return self._inner.matching(topic)

    def reservations_overlapping(self, flt: TopicFilter) -> list[Reservation]:
        return self._inner.reservations_overlapping(flt)

    def combined_eip(self, topic: TopicName) -> Eip:
        key = str(topic)
        hit = self._combined.get(key)
        if hit is None:
            hit = self._combined[key] = self._inner.combined_eip(topic)
        return hit

    def filter_eip(self, flt: TopicFilter, policy: UnreservedPolicy) -> Eip:
        key = (str(flt), policy)
        hit = self._filter.get(key)
        if hit is None:
            hit = self._filter[key] = self._inner.filter_eip(flt, policy)
        return hit


def build_store(kind: StoreKind, cache: bool) -> ReservationStore:
    store: ReservationStore = FlatStore() if kind is StoreKind.FLAT else TreeStore()
    return CachedStore(store) if cache else store
