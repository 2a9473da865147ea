import random

import pytest

from purposebroker.policy import (
    CachedStore,
    Eip,
    FlatStore,
    TreeStore,
    UNRESTRICTED,
    UnreservedPolicy,
    build_store,
    StoreKind,
)
from purposebroker.purposes import IpTuple, Purpose, is_compatible, merge_union
from purposebroker.topics import TopicFilter, matches, parse_filter, parse_topic

from helpers import (
    brute_compatible,
    enumerate_purposes,
    enumerate_topics,
    random_filter,
    random_tuple,
)

ALLOW = UnreservedPolicy.ALLOW_ALL
DENY = UnreservedPolicy.DENY_ALL

T1 = IpTuple.of(["m"])
T2 = IpTuple.of(["o"], ["m"])


def all_stores():
    return [FlatStore(), TreeStore(), CachedStore(TreeStore()), CachedStore(FlatStore())]


class TestWriteSemantics:
    @pytest.mark.parametrize("store", all_stores())
    def test_overwrite(self, store):
        f = parse_filter("a/#")
        store.set_reservation(f, T1)
        store.set_reservation(f, T2)
        assert store.get(f) == T2
        assert len(store.reservations()) == 1

    @pytest.mark.parametrize("store", all_stores())
    def test_set_on_empty(self, store):
        store.set_reservation(parse_filter("a/#"), T1)
        assert len(store.reservations()) == 1

    @pytest.mark.parametrize("store", all_stores())
    def test_deny_all_is_not_removal(self, store):
        f = parse_filter("a/#")
        store.set_reservation(f, IpTuple())
        assert store.get(f) == IpTuple()
        assert store.combined_eip(parse_topic("a/b")) == Eip(IpTuple())

    @pytest.mark.parametrize("store", all_stores())
    def test_remove(self, store):
        f = parse_filter("a/#")
        store.set_reservation(f, T1)
        store.remove_reservation(f)
        assert store.get(f) is None

    @pytest.mark.parametrize("store", all_stores())
    def test_remove_absent_is_noop(self, store):
        notice = store.remove_reservation(parse_filter("a/#"))
        assert str(notice.filter) == "a/#"
        assert store.reservations() == []

    @pytest.mark.parametrize("store", all_stores())
    def test_remove_is_keyed_exactly(self, store):
        store.set_reservation(parse_filter("a/b"), T2)
        store.set_reservation(parse_filter("a/#"), T1)
        store.remove_reservation(parse_filter("a/#"))
        assert store.get(parse_filter("a/b")) == T2
        assert store.get(parse_filter("a/#")) is None


class TestCombinedEip:
    @pytest.mark.parametrize("store", all_stores())
    def test_single_match(self, store):
        store.set_reservation(parse_filter("a/#"), T1)
        assert store.combined_eip(parse_topic("a/b")) == Eip(T1)

    @pytest.mark.parametrize("store", all_stores())
    def test_union_of_matches(self, store):
        store.set_reservation(parse_filter("a/#"), T1)
        store.set_reservation(parse_filter("a/b"), T2)
        got = store.combined_eip(parse_topic("a/b"))
        assert got == Eip(IpTuple.of(["m", "o"], ["m"]))

    @pytest.mark.parametrize("store", all_stores())
    def test_no_match_is_unrestricted(self, store):
        store.set_reservation(parse_filter("a/#"), T1)
        assert store.combined_eip(parse_topic("z")) is UNRESTRICTED

    @pytest.mark.parametrize("kind", [StoreKind.FLAT, StoreKind.TREE])
    def test_matches_by_oracle(self, kind):
        rng = random.Random(40)
        topics = enumerate_topics(("a", "b"), 3)
        for _ in range(50):
            store = build_store(kind, cache=False)
            entries = []
            for _ in range(rng.randint(0, 8)):
                f = random_filter(rng, ("a", "b"), 3)
                t = random_tuple(rng, ("x", "y"), 2)
                store.set_reservation(f, t)
                entries = [e for e in entries if str(e[0]) != str(f)] + [(f, t)]
            for topic in topics:
                hits = [t for f, t in entries if matches(f, topic)]
                got = store.combined_eip(topic)
                if not hits:
                    assert got is UNRESTRICTED
                else:
                    assert got == Eip(merge_union(hits))


class TestRestrictedIffOverlap:
    @pytest.mark.parametrize("kind", [StoreKind.FLAT, StoreKind.TREE])
    def test_combined_restricted_iff_exact_filter_overlaps(self, kind):
        rng = random.Random(43)
        topics = enumerate_topics(("a", "b"), 3)
        for _ in range(40):
            store = build_store(kind, cache=False)
            for _ in range(rng.randint(0, 6)):
                store.set_reservation(
                    random_filter(rng, ("a", "b"), 3), random_tuple(rng, ("x",), 2)
                )
            for topic in topics:
                exact = TopicFilter(topic.levels)
                overlapping = store.reservations_overlapping(exact)
                has_match = any(matches(r.filter, topic) for r in overlapping)
                assert (not store.combined_eip(topic).unrestricted) == has_match


class TestReservationsOverlapping:
    @pytest.mark.parametrize("store", all_stores())
    def test_basic(self, store):
        store.set_reservation(parse_filter("a/#"), T1)
        store.set_reservation(parse_filter("a/b"), T1)
        store.set_reservation(parse_filter("z"), T1)
        got = {str(r.filter) for r in store.reservations_overlapping(parse_filter("a/+"))}
        assert got == {"a/#", "a/b"}

    @pytest.mark.parametrize("store", all_stores())
    def test_empty_store(self, store):
        assert store.reservations_overlapping(parse_filter("a/+")) == []

    @pytest.mark.parametrize("store", all_stores())
    def test_hash_overlaps_everything(self, store):
        for text in ("a/#", "a/b", "z", "+/q/#"):
            store.set_reservation(parse_filter(text), T1)
        got = store.reservations_overlapping(parse_filter("#"))
        assert len(got) == 4


def oracle_filter_eip_compatible(store, flt, purpose, topics) -> bool:
    """Topic-enumeration semantics: compatible with every matched topic's
    combined EIP, unreserved topics passing under allow-all."""
    for topic in topics:
        if not matches(flt, topic):
            continue
        eip = None
        hits = [r.tuple for r in store.reservations() if matches(r.filter, topic)]
        if not hits:
            continue
        eip = merge_union(hits)
        if not brute_compatible(purpose, eip):
            return False
    return True


class TestFilterEip:
    @pytest.mark.parametrize("store", all_stores())
    def test_single_covering_reservation(self, store):
        store.set_reservation(
            parse_filter("home/#"),
            IpTuple.of(["marketing", "operational"], ["marketing/analytics"]),
        )
        eip = store.filter_eip(parse_filter("home/sensors/power/#"), ALLOW)
        assert not eip.unrestricted
        assert is_compatible(Purpose(("operational", "billing")), eip.tuple)
        assert not is_compatible(Purpose(("marketing", "analytics")), eip.tuple)

    @pytest.mark.parametrize("store", all_stores())
    def test_partially_reserved_space(self, store):
        store.set_reservation(parse_filter("a/b"), T1)
        eip = store.filter_eip(parse_filter("a/#"), ALLOW)
        universe = enumerate_purposes(("m", "x"), 2)
        got = {p for p in universe if is_compatible(p, eip.tuple)}
        assert got == {p for p in universe if str(p).startswith("m")}

    @pytest.mark.parametrize("store", all_stores())
    def test_no_reservations(self, store):
        assert store.filter_eip(parse_filter("a/#"), ALLOW) is UNRESTRICTED
        strict = store.filter_eip(parse_filter("a/#"), DENY)
        assert strict == Eip(IpTuple())

    @pytest.mark.parametrize("store", all_stores())
    def test_uncovered_space_denies_in_strict(self, store):
        store.set_reservation(parse_filter("a/b"), T1)
        eip = store.filter_eip(parse_filter("a/#"), DENY)
        assert not any(
            is_compatible(p, eip.tuple) for p in enumerate_purposes(("m", "x"), 2)
        )

    @pytest.mark.parametrize("store", all_stores())
    def test_fully_covered_space_in_strict(self, store):
        store.set_reservation(parse_filter("a/#"), T1)
        eip = store.filter_eip(parse_filter("a/+"), DENY)
        assert is_compatible(Purpose(("m",)), eip.tuple)

    @pytest.mark.parametrize("kind", [StoreKind.FLAT, StoreKind.TREE])
    def test_enumeration_oracle(self, kind):
        # filter literals use one symbol per position and depth <= 2 so the
        # depth-3 two-symbol topic universe realizes every co-match profile
        rng = random.Random(41)
        topics = enumerate_topics(("a", "b"), 3)
        purposes = enumerate_purposes(("x", "y"), 2)
        level_pool = (("a",), ("b",))
        for round_ in range(120):
            store = build_store(kind, cache=False)
            for _ in range(rng.randint(1, 8)):
                store.set_reservation(
                    _positional_filter(rng, level_pool),
                    random_tuple(rng, ("x", "y"), 2, max_set=3),
                )
            flt = _positional_filter(rng, level_pool)
            eip = store.filter_eip(flt, ALLOW)
            for p in purposes:
                expected = oracle_filter_eip_compatible(store, flt, p, topics)
                got = eip.unrestricted or is_compatible(p, eip.tuple)
                assert got == expected, (
                    f"{[str(r.filter) for r in store.reservations()]} "
                    f"filter={flt} p={p}: got={got} oracle={expected}"
                )


def _positional_filter(rng, level_pool):
    depth = rng.randint(1, len(level_pool))
    levels = []
    for i in range(depth):
        roll = rng.random()
        if roll < 0.25:
            levels.append("+")
        elif roll < 0.40 and i == depth - 1:
            levels.append("#")
        else:
            levels.append(rng.choice(level_pool[i]))
    return TopicFilter(tuple(levels))


class TestStoreEquivalence:
    def test_randomized_interleavings(self):
        rng = random.Random(42)
        purposes = enumerate_purposes(("x", "y"), 2)
        topics = enumerate_topics(("a", "b"), 3)
        for seed in range(30):
            op_rng = random.Random(seed)
            stores = [FlatStore(), TreeStore(), CachedStore(TreeStore())]
            for _ in range(60):
                roll = op_rng.random()
                if roll < 0.35:
                    f = random_filter(op_rng, ("a", "b"), 3)
                    t = random_tuple(op_rng, ("x", "y"), 2)
                    for s in stores:
                        s.set_reservation(f, t)
                elif roll < 0.45:
                    f = random_filter(op_rng, ("a", "b"), 3)
                    for s in stores:
                        s.remove_reservation(f)
                elif roll < 0.75:
                    topic = topics[op_rng.randrange(len(topics))]
                    eips = [s.combined_eip(topic) for s in stores]
                    assert _same_predicate(eips, purposes)
                else:
                    f = random_filter(op_rng, ("a", "b"), 3)
                    policy = ALLOW if op_rng.random() < 0.5 else DENY
                    eips = [s.filter_eip(f, policy) for s in stores]
                    assert _same_predicate(eips, purposes)

    def test_cache_invalidation(self):
        cached = CachedStore(TreeStore())
        fresh = TreeStore()
        f1, f2 = parse_filter("a/#"), parse_filter("a/b")
        for s in (cached, fresh):
            s.set_reservation(f1, T1)
        topic = parse_topic("a/b")
        assert cached.combined_eip(topic) == fresh.combined_eip(topic)
        # mutate after a cached read; the cache must not serve stale answers
        for s in (cached, fresh):
            s.set_reservation(f2, T2)
        assert cached.combined_eip(topic) == fresh.combined_eip(topic)
        for s in (cached, fresh):
            s.remove_reservation(f1)
        assert cached.combined_eip(topic) == fresh.combined_eip(topic)
        assert cached.filter_eip(f1, ALLOW) == fresh.filter_eip(f1, ALLOW)


def _same_predicate(eips, purposes) -> bool:
    first = eips[0]
    for other in eips[1:]:
        if first.unrestricted != other.unrestricted:
            return False
        if not first.unrestricted:
            for p in purposes:
                if is_compatible(p, first.tuple) != is_compatible(p, other.tuple):
                    return False
    return True
