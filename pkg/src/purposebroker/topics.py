"""Topic names, topic filters, and the match/cover/overlap relations.

Grammar and matching semantics follow MQTT 3.1.1 topic strings: levels are
separated by "/", "+" matches exactly one level, a trailing "#" matches the
remaining levels including none.  Levels starting with "!" are reserved for
broker commands and rejected in application topics; "{" and "}" are reserved
for the purpose grammar embedded in command topics.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "TopicName",
    "TopicFilter",
    "MalformedTopic",
    "parse_topic",
    "parse_filter",
    "matches",
    "covers",
    "overlaps",
]

_FORBIDDEN_IN_LEVEL = frozenset("+#/{}")


class MalformedTopic(ValueError):
    """A topic or filter string violates the topic grammar."""


def _check_literal_level(level: str) -> None:
    if not level:
        raise MalformedTopic("empty topic level")
    if set(level) & _FORBIDDEN_IN_LEVEL:
        raise MalformedTopic(f"forbidden character in topic level: {level!r}")
    if level.startswith("!"):
        raise MalformedTopic(f"command prefix '!' in topic level: {level!r}")


@dataclass(frozen=True, slots=True)
class TopicName:
    """A concrete (wildcard-free) topic."""

    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.levels:
            raise MalformedTopic("topic needs at least one level")
        for level in self.levels:
            _check_literal_level(level)

    def __str__(self) -> str:
        return "/".join(self.levels)


@dataclass(frozen=True, slots=True)
class TopicFilter:
    """A subscription pattern; levels are literals, "+", or a final "#"."""

    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.levels:
            raise MalformedTopic("filter needs at least one level")
        for i, level in enumerate(self.levels):
            if level == "#":
                if i != len(self.levels) - 1:
                    raise MalformedTopic('"#" is only allowed as the final level')
            elif level != "+":
                _check_literal_level(level)

    def __str__(self) -> str:
        return "/".join(self.levels)

    @property
    def is_concrete(self) -> bool:
        return "+" not in self.levels and "#" not in self.levels


def parse_topic(text: str) -> TopicName:
    if not text:
        raise MalformedTopic("empty topic")
    return TopicName(tuple(text.split("/")))


def parse_filter(text: str) -> TopicFilter:
    if not text:
        raise MalformedTopic("empty filter")
    return TopicFilter(tuple(text.split("/")))


def matches(f: TopicFilter, t: TopicName) -> bool:
    """True iff the filter matches the concrete topic."""
    fl, tl = f.levels, t.levels
    i = 0
    while i < len(fl):
        lv = fl[i]
        if lv == "#":
            return True
        if i >= len(tl):
            return False
        if lv != "+" and lv != tl[i]:
            return False
        i += 1
    return i == len(tl)


def covers(general: TopicFilter, specific: TopicFilter) -> bool:
    """True iff every topic matched by ``specific`` is matched by ``general``."""
    return _covers(general.levels, specific.levels, 0)


def _covers(g: tuple[str, ...], s: tuple[str, ...], i: int) -> bool:
    if i == len(g):
        return i == len(s)
    gv = g[i]
    if gv == "#":
        return True
    if i == len(s):
        return False
    sv = s[i]
    if sv == "#":
        # s matches every tail from here on, of any level values, and of any
        # length >= 0 (>= 1 at the very start, since topics are non-empty).
        # g covers that only as "+"*m followed by "#" with m small enough.
        min_tail = 1 if i == 0 else 0
        pluses = 0
        j = i
        while j < len(g) and g[j] == "+":
            pluses += 1
            j += 1
        return j < len(g) and g[j] == "#" and pluses <= min_tail
    if gv == "+" or gv == sv:
        return _covers(g, s, i + 1)
    return False  # literal mismatch, or literal vs "+"


def overlaps(f1: TopicFilter, f2: TopicFilter) -> bool:
    """True iff some concrete topic is matched by both filters."""
    return _overlaps(f1.levels, f2.levels, 0)


def _overlaps(a: tuple[str, ...], b: tuple[str, ...], i: int) -> bool:
    a_end, b_end = i == len(a), i == len(b)
    if not a_end and a[i] == "#":
        return True
    if not b_end and b[i] == "#":
        return True
    if a_end or b_end:
        return a_end and b_end
    if a[i] == "+" or b[i] == "+" or a[i] == b[i]:
        return _overlaps(a, b, i + 1)
    return False
