"""Client-side purpose grammar: validation and rendering.

This intentionally re-implements the wire syntax rather than importing the
broker package: the SDK talks to the broker only over MQTT, and the shared
corpus file (``purpose-wire-corpus.txt``) pins both sides to identical
strings.  All validation happens locally before anything is sent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

__all__ = ["PurposeSyntaxError", "WireSyntax", "DEFAULT_SYNTAX"]

_SEGMENT_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789-_")
_FORBIDDEN_LEVEL_CHARS = frozenset("+#/{}")


class PurposeSyntaxError(ValueError):
    """A purpose, filter, or topic failed local validation."""


@dataclass(frozen=True)
class WireSyntax:
    """Keywords and delimiters; must match the broker's configuration."""

    reserve: str = "!RESERVE"
    ap: str = "!AP"
    presub: str = "!PRESUB"
    block_open: str = "{"
    block_close: str = "}"
    list_sep: str = ","
    aip_pip_sep: str = "|"

    # -- validation ------------------------------------------------------

    def check_purpose(self, text: str) -> str:
        if not text:
            raise PurposeSyntaxError("empty purpose")
        for segment in text.split("/"):
            if not segment or not set(segment) <= _SEGMENT_CHARS:
                raise PurposeSyntaxError(f"bad purpose segment {segment!r} in {text!r}")
        return text

    def check_filter(self, text: str) -> str:
        if not text:
            raise PurposeSyntaxError("empty topic filter")
        levels = text.split("/")
        for i, level in enumerate(levels):
            if level == "#":
                if i != len(levels) - 1:
                    raise PurposeSyntaxError(f'"#" must be the final level: {text!r}')
            elif level != "+":
                self._check_literal(level, text)
        return text

    def check_plain_topic(self, text: str) -> str:
        if not text:
            raise PurposeSyntaxError("empty topic")
        for level in text.split("/"):
            if level in ("+", "#"):
                raise PurposeSyntaxError(f"wildcards are not publishable: {text!r}")
            self._check_literal(level, text)
        return text

    def _check_literal(self, level: str, context: str) -> None:
        if not level:
            raise PurposeSyntaxError(f"empty topic level in {context!r}")
        if set(level) & _FORBIDDEN_LEVEL_CHARS:
            raise PurposeSyntaxError(f"forbidden character in level {level!r}")
        if level.startswith("!"):
            raise PurposeSyntaxError(f"levels must not start with '!': {level!r}")

    # -- rendering -------------------------------------------------------

    def _purpose_list(self, purposes: Iterable[str]) -> str:
        return self.list_sep.join(sorted(self.check_purpose(p) for p in purposes))

    def reserve_command(
        self, filter_text: str, aip: Iterable[str], pip: Iterable[str]
    ) -> str:
        block = self._purpose_list(aip)
        pip_block = self._purpose_list(pip)
        if pip_block:
            block += self.aip_pip_sep + pip_block
        return (
            f"{self.reserve}/{self.check_filter(filter_text)}"
            f"{self.block_open}{block}{self.block_close}"
        )

    def removal_command(self, filter_text: str) -> str:
        return f"{self.reserve}/{self.check_filter(filter_text)}"

    def ap_filter(self, filter_text: str, access_purpose: str) -> str:
        return (
            f"{self.ap}/{self.check_filter(filter_text)}"
            f"{self.block_open}{self.check_purpose(access_purpose)}{self.block_close}"
        )

    def presub_command(self, filter_text: str, access_purpose: str) -> str:
        return (
            f"{self.presub}/{self.check_filter(filter_text)}"
            f"{self.block_open}{self.check_purpose(access_purpose)}{self.block_close}"
        )


DEFAULT_SYNTAX = WireSyntax()
