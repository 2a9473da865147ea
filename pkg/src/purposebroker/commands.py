"""Topic-embedded command grammar.

Commands travel inside MQTT topic strings so that unmodified clients and
brokers can carry them.  The wire forms are:

    !RESERVE/<filter>[{p(,p)*[|p(,p)*]}]     bind or remove intended purposes
    !AP/<filter>{p}                          declare a subscription's access purpose
    !PRESUB/<filter>{p}  (payload=client id) purpose-tag a future plain subscription
    !SET/<key>/<value>                       runtime broker settings

Keywords and delimiter characters are configurable; the defaults below are
the canonical wire contract.  A reservation without a brace block removes
the reservation; "{}" is an explicit deny-all policy, which is different.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .purposes import IpTuple, MalformedPurpose, Purpose, parse_purpose
from .topics import MalformedTopic, TopicFilter, parse_filter

__all__ = [
    "Keywords",
    "CommandKind",
    "Reserve",
    "ApSubscribe",
    "Presubscribe",
    "SetOption",
    "MalformedCommand",
    "UnknownCommand",
    "SET_KEYS",
    "classify",
    "parse_reserve",
    "parse_ap",
    "parse_presub",
    "parse_set",
    "render_reserve",
    "render_ap",
    "render_presub",
]

SET_KEYS = frozenset({"mode", "strict", "store", "cache"})


class MalformedCommand(ValueError):
    """A command topic fails to parse under the grammar above."""


class UnknownCommand(MalformedCommand):
    """A "!"-prefixed first level that matches no configured keyword."""


class CommandKind(enum.Enum):
    RESERVE = "reserve"
    AP = "ap"
    PRESUB = "presub"
    SET = "set"
    DATA = "data"


@dataclass(frozen=True, slots=True)
class Keywords:
    """Configurable command keywords and purpose-block delimiters."""

    reserve: str = "!RESERVE"
    ap: str = "!AP"
    presub: str = "!PRESUB"
    setopt: str = "!SET"
    block_open: str = "{"
    block_close: str = "}"
    list_sep: str = ","
    aip_pip_sep: str = "|"

    def kind_of(self, first_level: str) -> CommandKind | None:
        table = {
            self.reserve: CommandKind.RESERVE,
            self.ap: CommandKind.AP,
            self.presub: CommandKind.PRESUB,
            self.setopt: CommandKind.SET,
        }
        return table.get(first_level)


DEFAULT_KEYWORDS = Keywords()


@dataclass(frozen=True, slots=True)
class Reserve:
    filter: TopicFilter
    tuple: IpTuple | None  # None = remove the reservation


@dataclass(frozen=True, slots=True)
class ApSubscribe:
    filter: TopicFilter
    ap: Purpose


@dataclass(frozen=True, slots=True)
class Presubscribe:
    client_id: str
    filter: TopicFilter
    ap: Purpose


@dataclass(frozen=True, slots=True)
class SetOption:
    key: str
    value: str


def classify(
    topic_text: str, keywords: Keywords = DEFAULT_KEYWORDS, *, lenient: bool = True
) -> CommandKind:
    """Classify a publish/subscribe topic as a command kind or plain data.

    Unmatched "!"-prefixed keywords raise UnknownCommand when ``lenient`` is
    false; otherwise they classify as DATA (the topic grammar still rejects
    them from routing, so they are dropped rather than delivered).
    """
    first = topic_text.split("/", 1)[0]
    kind = keywords.kind_of(first)
    if kind is not None:
        return kind
    if first.startswith("!"):
        if not lenient:
            raise UnknownCommand(f"unknown command keyword: {first!r}")
        return CommandKind.DATA
    return CommandKind.DATA


def _strip_keyword(topic_text: str, keyword: str) -> str:
    prefix = keyword + "/"
    if not topic_text.startswith(prefix) or len(topic_text) == len(prefix):
        raise MalformedCommand(f"expected {keyword}/<filter>...: {topic_text!r}")
    return topic_text[len(prefix):]


def _split_block(rest: str, kw: Keywords) -> tuple[str, str | None]:
    """Split "<filter>{block}" into (filter_text, block) with block=None when absent."""
    i = rest.find(kw.block_open)
    if i < 0:
        if kw.block_close in rest:
            raise MalformedCommand(f"unbalanced braces: {rest!r}")
        return rest, None
    if not rest.endswith(kw.block_close):
        raise MalformedCommand(f"unbalanced braces: {rest!r}")
    block = rest[i + len(kw.block_open):-len(kw.block_close)]
    if kw.block_open in block or kw.block_close in block:
        raise MalformedCommand(f"nested braces: {rest!r}")
    if i == 0:
        raise MalformedCommand(f"missing filter before brace block: {rest!r}")
    return rest[:i], block


def _parse_purpose_list(text: str, kw: Keywords) -> frozenset[Purpose]:
    if not text:
        return frozenset()
    try:
        return frozenset(parse_purpose(p) for p in text.split(kw.list_sep))
    except MalformedPurpose as e:
        raise MalformedCommand(str(e)) from e


def _parse_filter(text: str) -> TopicFilter:
    try:
        return parse_filter(text)
    except MalformedTopic as e:
        raise MalformedCommand(str(e)) from e


def parse_reserve(
    topic_text: str, keywords: Keywords = DEFAULT_KEYWORDS
) -> Reserve:
    rest = _strip_keyword(topic_text, keywords.reserve)
    filter_text, block = _split_block(rest, keywords)
    flt = _parse_filter(filter_text)
    if block is None:
        return Reserve(flt, None)
    parts = block.split(keywords.aip_pip_sep)
    if len(parts) > 2:
        raise MalformedCommand(f"more than one AIP/PIP divider: {block!r}")
    aip = _parse_purpose_list(parts[0], keywords)
    pip = _parse_purpose_list(parts[1], keywords) if len(parts) == 2 else frozenset()
    return Reserve(flt, IpTuple(aip=aip, pip=pip))


def _parse_single_purpose_block(topic_text: str, keyword: str, kw: Keywords):
    rest = _strip_keyword(topic_text, keyword)
    filter_text, block = _split_block(rest, kw)
    if block is None:
        raise MalformedCommand(f"missing access-purpose block: {topic_text!r}")
    if kw.list_sep in block or kw.aip_pip_sep in block:
        raise MalformedCommand(f"exactly one access purpose expected: {block!r}")
    try:
        ap = parse_purpose(block)
    except MalformedPurpose as e:
        raise MalformedCommand(str(e)) from e
    return _parse_filter(filter_text), ap


def parse_ap(topic_text: str, keywords: Keywords = DEFAULT_KEYWORDS) -> ApSubscribe:
    flt, ap = _parse_single_purpose_block(topic_text, keywords.ap, keywords)
    return ApSubscribe(flt, ap)


def parse_presub(
    topic_text: str, payload: bytes, keywords: Keywords = DEFAULT_KEYWORDS
) -> Presubscribe:
    flt, ap = _parse_single_purpose_block(topic_text, keywords.presub, keywords)
    try:
        client_id = payload.decode("utf-8")
    except UnicodeDecodeError as e:
        raise MalformedCommand("presubscription client id is not UTF-8") from e
    if not client_id:
        raise MalformedCommand("presubscription client id is empty")
    return Presubscribe(client_id, flt, ap)


def parse_set(topic_text: str, keywords: Keywords = DEFAULT_KEYWORDS) -> SetOption:
    rest = _strip_keyword(topic_text, keywords.setopt)
    parts = rest.split("/")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise MalformedCommand(f"expected {keywords.setopt}/<key>/<value>: {topic_text!r}")
    key, value = parts
    if key not in SET_KEYS:
        raise MalformedCommand(f"unknown setting key: {key!r}")
    return SetOption(key, value)


def _render_purposes(ps: frozenset[Purpose], kw: Keywords) -> str:
    return kw.list_sep.join(sorted(str(p) for p in ps))


def render_reserve(
    flt: TopicFilter, tup: IpTuple | None, keywords: Keywords = DEFAULT_KEYWORDS
) -> str:
    base = f"{keywords.reserve}/{flt}"
    if tup is None:
        return base
    block = _render_purposes(tup.aip, keywords)
    if tup.pip:
        block += keywords.aip_pip_sep + _render_purposes(tup.pip, keywords)
    return f"{base}{keywords.block_open}{block}{keywords.block_close}"


def render_ap(
    flt: TopicFilter, ap: Purpose, keywords: Keywords = DEFAULT_KEYWORDS
) -> str:
    return f"{keywords.ap}/{flt}{keywords.block_open}{ap}{keywords.block_close}"


def render_presub(
    flt: TopicFilter, ap: Purpose, keywords: Keywords = DEFAULT_KEYWORDS
) -> str:
    return f"{keywords.presub}/{flt}{keywords.block_open}{ap}{keywords.block_close}"
