"""PurposeClient behavior against a recording fake client."""

import pytest

from purpose_client import DeniedSubscription, PurposeClient, PurposeSyntaxError
from purpose_client.mini import MiniMqttClient, encode_publish, encode_subscribe


class FakeClient:
    def __init__(self, subscribe_codes=(0,)):
        self.calls = []
        self.subscribe_codes = subscribe_codes

    def connect(self, host, port, keep_alive):
        self.calls.append(("connect", host, port, keep_alive))

    def disconnect(self):
        self.calls.append(("disconnect",))

    def publish(self, topic, payload=b"", qos=0):
        self.calls.append(("publish", topic, payload, qos))

    def subscribe(self, topic, qos=0):
        self.calls.append(("subscribe", topic, qos))
        return self.subscribe_codes

    def unsubscribe(self, topic):
        self.calls.append(("unsubscribe", topic))


class TestReserve:
    def test_publishes_rendered_command_at_qos1(self):
        fake = FakeClient()
        client = PurposeClient(fake)
        client.reserve(
            "home/#", aip=["marketing", "operational"], pip=["marketing/analytics"]
        )
        assert fake.calls == [
            (
                "publish",
                "!RESERVE/home/#{marketing,operational|marketing/analytics}",
                b"",
                1,
            )
        ]

    def test_empty_sets_render_deny_all(self):
        fake = FakeClient()
        PurposeClient(fake).reserve("a", [], [])
        assert fake.calls == [("publish", "!RESERVE/a{}", b"", 1)]

    def test_local_validation_sends_nothing(self):
        fake = FakeClient()
        with pytest.raises(PurposeSyntaxError):
            PurposeClient(fake).reserve("a", ["bad purpose"], [])
        assert fake.calls == []

    def test_removal(self):
        fake = FakeClient()
        client = PurposeClient(fake)
        client.remove_reservation("a/#")
        client.remove_reservation("a/#")  # broker treats repeats idempotently
        assert fake.calls == [
            ("publish", "!RESERVE/a/#", b"", 1),
            ("publish", "!RESERVE/a/#", b"", 1),
        ]

    def test_removal_malformed_filter(self):
        fake = FakeClient()
        with pytest.raises(PurposeSyntaxError):
            PurposeClient(fake).remove_reservation("a/#/b")
        assert fake.calls == []


class TestSubscribeWithPurpose:
    def test_granted(self):
        fake = FakeClient(subscribe_codes=(1,))
        codes = PurposeClient(fake).subscribe_with_purpose(
            "home/sensors/power/#", "operational/billing", qos=1
        )
        assert codes == (1,)
        assert fake.calls == [
            ("subscribe", "!AP/home/sensors/power/#{operational/billing}", 1)
        ]

    def test_denied_raises(self):
        fake = FakeClient(subscribe_codes=(0x80,))
        with pytest.raises(DeniedSubscription):
            PurposeClient(fake).subscribe_with_purpose("a", "x")

    def test_malformed_purpose_sends_nothing(self):
        fake = FakeClient()
        with pytest.raises(PurposeSyntaxError):
            PurposeClient(fake).subscribe_with_purpose("a", "x,y")
        assert fake.calls == []


class TestPresubscribe:
    def test_payload_carries_client_id(self):
        fake = FakeClient()
        PurposeClient(fake).presubscribe("legacy-client-7", "home/sensors/#", "operational")
        assert fake.calls == [
            ("publish", "!PRESUB/home/sensors/#{operational}", b"legacy-client-7", 1)
        ]

    def test_empty_client_id_rejected_locally(self):
        fake = FakeClient()
        with pytest.raises(PurposeSyntaxError):
            PurposeClient(fake).presubscribe("", "a", "x")
        assert fake.calls == []


class TestSend:
    def test_plain_passthrough(self):
        fake = FakeClient()
        PurposeClient(fake).send("home/sensors/power/392/total", b"3142")
        assert fake.calls == [
            ("publish", "home/sensors/power/392/total", b"3142", 0)
        ]

    def test_command_topic_rejected(self):
        fake = FakeClient()
        with pytest.raises(PurposeSyntaxError):
            PurposeClient(fake).send("!RESERVE/a", b"")
        assert fake.calls == []

    def test_empty_payload_allowed(self):
        fake = FakeClient()
        PurposeClient(fake).send("t", b"")
        assert fake.calls == [("publish", "t", b"", 0)]


class TestNonInterference:
    """Wrapping must not change the bytes of non-purpose traffic."""

    def _captured_bytes(self, use_wrapper: bool):
        client = MiniMqttClient("same-id")
        sent = []
        client._send = sent.append  # bypass the socket entirely
        surface = PurposeClient(client) if use_wrapper else client
        if use_wrapper:
            surface.send("plain/topic", b"payload")
        else:
            surface.publish("plain/topic", b"payload")
        # subscribe would block on the suback; compare its encoded form instead
        sent.append(encode_subscribe(1, "plain/+", 0))
        return sent

    def test_byte_identical_publish_and_subscribe(self):
        assert self._captured_bytes(False) == self._captured_bytes(True)

    def test_wrapped_client_is_untouched(self):
        inner = MiniMqttClient("x")
        wrapper = PurposeClient(inner)
        assert wrapper.wrapped is inner
        assert inner.on_message is None


class TestCodecShims:
    def test_publish_frame_shape(self):
        # 0x30, remaining 6, topic-length prefix, "a/b", "x"
        assert encode_publish("a/b", b"x", 0, None) == bytes(
            [0x30, 0x06, 0x00, 0x03]
        ) + b"a/bx"
