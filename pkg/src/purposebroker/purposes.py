"""Hierarchical purposes and the AIP/PIP compatibility algebra.

A purpose is a slash-separated path such as ``marketing/individualized``;
ancestry is path-prefix, so allowing ``marketing`` implicitly allows every
purpose below it.  Policy is expressed as a tuple of allowed intended
purposes (AIP) and prohibited intended purposes (PIP); an access purpose
is compatible when it falls under the AIP set and not under the PIP set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

__all__ = [
    "Purpose",
    "PurposeSet",
    "IpTuple",
    "MalformedPurpose",
    "EmptyMerge",
    "parse_purpose",
    "ancestors_or_self",
    "closure_contains",
    "is_compatible",
    "merge_union",
    "merge_restrictive",
]

_SEGMENT_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789-_")


class MalformedPurpose(ValueError):
    """A purpose string violates the path grammar."""


class EmptyMerge(ValueError):
    """A merge was requested over an empty tuple list."""


@dataclass(frozen=True, slots=True)
class Purpose:
    """A purpose identified by its path segments, e.g. ('marketing', 'individualized')."""

    segments: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise MalformedPurpose("purpose needs at least one segment")
        for seg in self.segments:
            if not seg or not set(seg) <= _SEGMENT_CHARS:
                raise MalformedPurpose(f"bad purpose segment: {seg!r}")

    def __str__(self) -> str:
        return "/".join(self.segments)

    def is_ancestor_of(self, other: "Purpose") -> bool:
        """True iff this purpose is a strict path-prefix of ``other``."""
        n = len(self.segments)
        return n < len(other.segments) and other.segments[:n] == self.segments


# A purpose set is just a frozenset of canonical purposes; the frozenset
# already guarantees "no duplicate canonical paths".
PurposeSet = frozenset[Purpose]


@dataclass(frozen=True, slots=True)
class IpTuple:
    """An (AIP, PIP) pair. Both sets may be empty; PIP wins on overlap."""

    aip: PurposeSet = frozenset()
    pip: PurposeSet = frozenset()

    @classmethod
    def of(cls, aip: Iterable[str] = (), pip: Iterable[str] = ()) -> "IpTuple":
        """Build from purpose path strings; convenience for tests and callers."""
        return cls(
            aip=frozenset(parse_purpose(p) for p in aip),
            pip=frozenset(parse_purpose(p) for p in pip),
        )

    def __str__(self) -> str:
        aip = ",".join(sorted(str(p) for p in self.aip))
        pip = ",".join(sorted(str(p) for p in self.pip))
        return f"({{{aip}}},{{{pip}}})"


DENY_ALL = IpTuple()


def parse_purpose(text: str) -> Purpose:
    """Parse a slash-separated purpose path into its canonical form."""
    if not text:
        raise MalformedPurpose("empty purpose")
    return Purpose(tuple(text.split("/")))


def ancestors_or_self(p: Purpose) -> list[Purpose]:
    """All path prefixes of ``p``, from the root purpose down to ``p`` itself."""
    return [Purpose(p.segments[:i]) for i in range(1, len(p.segments) + 1)]


def closure_contains(s: PurposeSet, p: Purpose) -> bool:
    """True iff ``p`` or any of its ancestors is a member of ``s``."""
    if not s:
        return False
    return any(a in s for a in ancestors_or_self(p))


def is_compatible(ap: Purpose, t: IpTuple) -> bool:
    """Access purpose ``ap`` is allowed by ``t``: covered by AIP and not by PIP."""
    return closure_contains(t.aip, ap) and not closure_contains(t.pip, ap)


def merge_union(ts: Iterable[IpTuple]) -> IpTuple:
    """Permissive merge: union AIPs and union PIPs.

    The result allows a purpose present in any input's AIP closure and
    forbids one present in any input's PIP closure.
    """
    ts = list(ts)
    if not ts:
        raise EmptyMerge("merge_union of zero tuples")
    aip: frozenset[Purpose] = frozenset().union(*(t.aip for t in ts))
    pip: frozenset[Purpose] = frozenset().union(*(t.pip for t in ts))
    return IpTuple(aip=aip, pip=pip)


def _meet(a: Purpose, b: Purpose) -> Purpose | None:
    """The more specific of two comparable purposes, None if incomparable."""
    if a == b or b.is_ancestor_of(a):
        return a
    if a.is_ancestor_of(b):
        return b
    return None


def _prune_descendants(s: frozenset[Purpose]) -> frozenset[Purpose]:
    # An element with an ancestor in the set denotes a subtree already
    # covered by that ancestor; drop it for a canonical minimal form.
    return frozenset(
        p for p in s if not any(q.is_ancestor_of(p) for q in s if q != p)
    )


def merge_restrictive(ts: Iterable[IpTuple]) -> IpTuple:
    """Restrictive merge: a purpose is compatible with the result iff it is
    compatible with every input tuple.

    AIPs combine by iterated pairwise meet (the intersection of subtree
    unions); PIPs combine by union.  The returned AIP set is normalized to
    an antichain; callers comparing results should compare predicates, not
    raw sets.
    """
    ts = list(ts)
    if not ts:
        raise EmptyMerge("merge_restrictive of zero tuples")
    aip = frozenset(ts[0].aip)
    for t in ts[1:]:
        met = set()
        for a in aip:
            for b in t.aip:
                m = _meet(a, b)
                if m is not None:
                    met.add(m)
        aip = frozenset(met)
    pip: frozenset[Purpose] = frozenset().union(*(t.pip for t in ts))
    return IpTuple(aip=_prune_descendants(aip), pip=pip)
