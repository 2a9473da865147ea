"""Purpose-aware MQTT client wrapper."""

from .client import DeniedSubscription, PurposeClient
from .grammar import DEFAULT_SYNTAX, PurposeSyntaxError, WireSyntax
from .mini import MiniMqttClient, MqttError

__all__ = [
    "PurposeClient",
    "DeniedSubscription",
    "WireSyntax",
    "DEFAULT_SYNTAX",
    "PurposeSyntaxError",
    "MiniMqttClient",
    "MqttError",
]

__version__ = "0.1.0"
