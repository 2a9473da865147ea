import pytest

from purposebroker.purposes import parse_purpose
from purposebroker.registry import (
    Presubscription,
    SubscriptionRegistry,
    UnknownSubscription,
)
from purposebroker.topics import parse_filter, parse_topic


@pytest.fixture
def reg():
    return SubscriptionRegistry()


class TestUpsert:
    def test_stores_ap(self, reg):
        rec = reg.upsert("c1", parse_filter("home/#"), 0, parse_purpose("operational"))
        assert str(rec.ap) == "operational"
        assert not rec.paused

    def test_consumes_presubscription(self, reg):
        reg.add_presubscription(
            Presubscription("c1", parse_filter("a/#"), parse_purpose("m"))
        )
        rec = reg.upsert("c1", parse_filter("a/#"), 0, None)
        assert str(rec.ap) == "m"
        assert reg.presubscriptions() == []

    def test_presubscription_is_single_shot(self, reg):
        reg.add_presubscription(
            Presubscription("c1", parse_filter("a/#"), parse_purpose("m"))
        )
        reg.upsert("c1", parse_filter("a/#"), 0, None)
        rec = reg.upsert("c1", parse_filter("a/#"), 0, None)
        assert rec.ap is None

    def test_no_presub_means_no_ap(self, reg):
        rec = reg.upsert("c1", parse_filter("a"), 0, None)
        assert rec.ap is None

    def test_explicit_ap_leaves_presub_alone(self, reg):
        reg.add_presubscription(
            Presubscription("c1", parse_filter("a/#"), parse_purpose("m"))
        )
        reg.upsert("c1", parse_filter("a/#"), 0, parse_purpose("o"))
        assert len(reg.presubscriptions()) == 1

    def test_presub_match_is_exact_filter_text(self, reg):
        reg.add_presubscription(
            Presubscription("c1", parse_filter("a/#"), parse_purpose("m"))
        )
        rec = reg.upsert("c1", parse_filter("a/+"), 0, None)
        assert rec.ap is None
        assert len(reg.presubscriptions()) == 1

    def test_resubscribe_overwrites(self, reg):
        reg.upsert("c1", parse_filter("a"), 0, parse_purpose("m"))
        rec = reg.upsert("c1", parse_filter("a"), 1, parse_purpose("o"))
        assert (rec.qos, str(rec.ap)) == (1, "o")
        assert len(reg.all_records()) == 1


class TestRemove:
    def test_round_trip(self, reg):
        f = parse_filter("a")
        reg.upsert("c1", f, 0, None)
        reg.remove("c1", f)
        assert reg.get("c1", f) is None

    def test_remove_absent_is_noop(self, reg):
        reg.remove("c1", parse_filter("a"))

    def test_keyed_by_client(self, reg):
        f = parse_filter("a")
        reg.upsert("c1", f, 0, None)
        reg.upsert("c2", f, 0, None)
        reg.remove("c1", f)
        assert reg.get("c2", f) is not None


class TestPresubscriptionStore:
    def test_overwrite(self, reg):
        reg.add_presubscription(
            Presubscription("c1", parse_filter("a"), parse_purpose("m"))
        )
        reg.add_presubscription(
            Presubscription("c1", parse_filter("a"), parse_purpose("o"))
        )
        assert [str(p.ap) for p in reg.presubscriptions()] == ["o"]

    def test_retained_without_subscription(self, reg):
        reg.add_presubscription(
            Presubscription("ghost", parse_filter("a"), parse_purpose("m"))
        )
        assert len(reg.presubscriptions()) == 1

    def test_survives_client_removal(self, reg):
        reg.add_presubscription(
            Presubscription("c1", parse_filter("a"), parse_purpose("m"))
        )
        reg.upsert("c1", parse_filter("b"), 0, None)
        reg.remove_client("c1")
        assert len(reg.presubscriptions()) == 1
        assert reg.all_records() == []


class TestQueries:
    def test_matching_records(self, reg):
        reg.upsert("c1", parse_filter("a/#"), 0, None)
        reg.upsert("c1", parse_filter("a/+"), 0, None)
        reg.upsert("c2", parse_filter("a/#"), 0, None)
        got = reg.matching_records("c1", parse_topic("a/b"))
        assert {str(r.filter) for r in got} == {"a/#", "a/+"}

    def test_matching_records_no_hit(self, reg):
        reg.upsert("c1", parse_filter("a/#"), 0, None)
        assert reg.matching_records("c1", parse_topic("z")) == []
        assert reg.matching_records("nobody", parse_topic("a/b")) == []

    def test_records_overlapping(self, reg):
        reg.upsert("c1", parse_filter("a/#"), 0, None)
        reg.upsert("c2", parse_filter("a/b"), 0, None)
        reg.upsert("c3", parse_filter("z"), 0, None)
        got = reg.records_overlapping(parse_filter("a/+"))
        assert {r.client_id for r in got} == {"c1", "c2"}
        assert len(reg.records_overlapping(parse_filter("#"))) == 3


class TestPaused:
    def test_set_and_clear(self, reg):
        f = parse_filter("a")
        reg.upsert("c1", f, 0, None)
        reg.set_paused("c1", f, True)
        assert reg.get("c1", f).paused
        reg.set_paused("c1", f, False)
        assert not reg.get("c1", f).paused

    def test_unknown_subscription(self, reg):
        with pytest.raises(UnknownSubscription):
            reg.set_paused("c1", parse_filter("a"), True)

    def test_upsert_resets_paused(self, reg):
        f = parse_filter("a")
        reg.upsert("c1", f, 0, None)
        reg.set_paused("c1", f, True)
        reg.upsert("c1", f, 0, None)
        assert not reg.get("c1", f).paused
