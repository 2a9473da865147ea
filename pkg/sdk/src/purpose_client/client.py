"""PurposeClient: a thin purpose-aware wrapper over an MQTT client.

The wrapped client is used as-is; the wrapper only renders purpose syntax
into topics and validates inputs before anything touches the wire.  Any
client object with ``connect / publish / subscribe / unsubscribe /
disconnect`` in the shape of :class:`purpose_client.MiniMqttClient` works.

    client = PurposeClient(MiniMqttClient("edge-17"))
    client.connect("localhost", 1883, 60)
    client.reserve("home/#", aip=["marketing", "operational"],
                   pip=["marketing/analytics"])
    client.subscribe_with_purpose("home/sensors/power/#", "operational/billing")
    client.send("home/sensors/power/392/total", b"3142")
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .grammar import DEFAULT_SYNTAX, PurposeSyntaxError, WireSyntax

__all__ = ["PurposeClient", "DeniedSubscription"]

_SUBACK_FAILURE = 0x80


class DeniedSubscription(Exception):
    """The broker refused the purpose-bearing subscription (code 0x80)."""


class PurposeClient:
    def __init__(self, client, syntax: WireSyntax = DEFAULT_SYNTAX) -> None:
        self._client = client
        self._syntax = syntax

    @property
    def wrapped(self):
        return self._client

    # -- connection passthrough --------------------------------------------

    def connect(self, host: str, port: int = 1883, keep_alive: int = 60) -> None:
        self._client.connect(host, port, keep_alive)

    def disconnect(self) -> None:
        self._client.disconnect()

    # -- purpose operations ----------------------------------------------------

    def reserve(
        self,
        filter_text: str,
        aip: Iterable[str] = (),
        pip: Iterable[str] = (),
    ) -> None:
        """Bind allowed/prohibited intended purposes to a topic filter.

        Empty ``aip`` and ``pip`` publish an explicit deny-all reservation;
        use :meth:`remove_reservation` to clear one instead.
        """
        command = self._syntax.reserve_command(filter_text, aip, pip)
        self._client.publish(command, b"", qos=1)

    def remove_reservation(self, filter_text: str) -> None:
        self._client.publish(self._syntax.removal_command(filter_text), b"", qos=1)

    def subscribe_with_purpose(
        self, filter_text: str, access_purpose: str, qos: int = 0
    ) -> Sequence[int]:
        """Subscribe declaring an access purpose; messages arrive under the
        plain topic.  Raises DeniedSubscription if the broker refuses."""
        wrapped_filter = self._syntax.ap_filter(filter_text, access_purpose)
        codes = self._client.subscribe(wrapped_filter, qos)
        if any(code == _SUBACK_FAILURE for code in codes):
            raise DeniedSubscription(
                f"{filter_text!r} for purpose {access_purpose!r}"
            )
        return codes

    def presubscribe(
        self, target_client_id: str, filter_text: str, access_purpose: str
    ) -> None:
        """Purpose-tag the next plain subscription a (legacy) client makes."""
        if not target_client_id:
            raise PurposeSyntaxError("presubscription needs a client id")
        command = self._syntax.presub_command(filter_text, access_purpose)
        self._client.publish(command, target_client_id.encode("utf-8"), qos=1)

    # -- plain passthrough -------------------------------------------------------

    def send(self, topic: str, payload: bytes = b"", qos: int = 0) -> None:
        """Publish application data; command-reserved topics are rejected.

        Plain (purpose-less) subscriptions stay on the wrapped client, which
        this wrapper never alters: ``client.wrapped.subscribe(...)``.
        """
        self._syntax.check_plain_topic(topic)
        self._client.publish(topic, payload, qos)
