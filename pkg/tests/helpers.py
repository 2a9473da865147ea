"""Shared oracles and generators for the test suite.

The oracles here deliberately re-derive results through brute force
(string prefixes, regexes, exhaustive enumeration) so they stay independent
of the implementation paths they check.
"""

from __future__ import annotations

import itertools
import random
import re

from purposebroker.purposes import IpTuple, Purpose
from purposebroker.topics import TopicFilter, TopicName


# --- purpose oracles ---------------------------------------------------------


def enumerate_purposes(alphabet: tuple[str, ...], max_depth: int) -> list[Purpose]:
    out = []
    for depth in range(1, max_depth + 1):
        for segs in itertools.product(alphabet, repeat=depth):
            out.append(Purpose(tuple(segs)))
    return out


def brute_compatible(ap: Purpose, t: IpTuple) -> bool:
    """String-level evaluator: ancestor paths vs. member paths."""
    prefixes = {"/".join(ap.segments[: i + 1]) for i in range(len(ap.segments))}
    aip = {str(p) for p in t.aip}
    pip = {str(p) for p in t.pip}
    return bool(prefixes & aip) and not prefixes & pip


def compatible_set(t: IpTuple, universe: list[Purpose]) -> frozenset[Purpose]:
    return frozenset(p for p in universe if brute_compatible(p, t))


def random_purpose(rng: random.Random, alphabet, max_depth: int) -> Purpose:
    depth = rng.randint(1, max_depth)
    return Purpose(tuple(rng.choice(alphabet) for _ in range(depth)))


def random_tuple(
    rng: random.Random, alphabet, max_depth: int, max_set: int = 4
) -> IpTuple:
    aip = frozenset(
        random_purpose(rng, alphabet, max_depth) for _ in range(rng.randint(0, max_set))
    )
    pip = frozenset(
        random_purpose(rng, alphabet, max_depth) for _ in range(rng.randint(0, max_set))
    )
    return IpTuple(aip=aip, pip=pip)


# --- topic oracles --------------------------------------------------------------


def enumerate_topics(alphabet: tuple[str, ...], max_depth: int) -> list[TopicName]:
    out = []
    for depth in range(1, max_depth + 1):
        for levels in itertools.product(alphabet, repeat=depth):
            out.append(TopicName(tuple(levels)))
    return out


def regex_matches(f: TopicFilter, t: TopicName) -> bool:
    """Independent matcher: compile the filter to a regex."""
    levels = list(f.levels)
    tail = levels and levels[-1] == "#"
    if tail:
        levels = levels[:-1]
    body = "/".join("[^/]+" if lv == "+" else re.escape(lv) for lv in levels)
    if tail:
        pattern = f"{body}(/.*)?" if body else ".*"
    else:
        pattern = body
    return re.fullmatch(pattern, str(t)) is not None


def random_filter(
    rng: random.Random, alphabet, max_depth: int, wildcards: bool = True
) -> TopicFilter:
    depth = rng.randint(1, max_depth)
    levels = []
    for i in range(depth):
        roll = rng.random()
        if wildcards and roll < 0.2:
            levels.append("+")
        elif wildcards and roll < 0.35 and i == depth - 1:
            levels.append("#")
        else:
            levels.append(rng.choice(alphabet))
    return TopicFilter(tuple(levels))


def random_topic(rng: random.Random, alphabet, max_depth: int) -> TopicName:
    depth = rng.randint(1, max_depth)
    return TopicName(tuple(rng.choice(alphabet) for _ in range(depth)))
