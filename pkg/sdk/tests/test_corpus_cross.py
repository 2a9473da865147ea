"""Golden-corpus cross-test against the broker-side parser.

For every line of the shared corpus: parse it with the broker's codec, ask
the SDK grammar to render the same command from the parsed fields, and check
the SDK output is byte-identical and parses back to the same command.  This
pins the two independent grammar implementations to one wire contract.
"""

from pathlib import Path

import pytest

from purposebroker.commands import (
    CommandKind,
    classify,
    parse_ap,
    parse_presub,
    parse_reserve,
)

from purpose_client.grammar import DEFAULT_SYNTAX

CORPUS = Path(__file__).resolve().parents[2] / "purpose-wire-corpus.txt"


def corpus_lines():
    return [line for line in CORPUS.read_text().splitlines() if line.strip()]


def sdk_render(line: str) -> str:
    kind = classify(line)
    if kind is CommandKind.RESERVE:
        cmd = parse_reserve(line)
        if cmd.tuple is None:
            return DEFAULT_SYNTAX.removal_command(str(cmd.filter))
        return DEFAULT_SYNTAX.reserve_command(
            str(cmd.filter),
            [str(p) for p in cmd.tuple.aip],
            [str(p) for p in cmd.tuple.pip],
        )
    if kind is CommandKind.AP:
        cmd = parse_ap(line)
        return DEFAULT_SYNTAX.ap_filter(str(cmd.filter), str(cmd.ap))
    if kind is CommandKind.PRESUB:
        cmd = parse_presub(line, b"corpus-client")
        return DEFAULT_SYNTAX.presub_command(str(cmd.filter), str(cmd.ap))
    pytest.fail(f"unclassifiable corpus line: {line}")


@pytest.mark.parametrize("line", corpus_lines())
def test_sdk_renders_the_exact_corpus_line(line):
    assert sdk_render(line) == line


@pytest.mark.parametrize("line", corpus_lines())
def test_sdk_rendering_parses_identically_in_broker_codec(line):
    rendered = sdk_render(line)
    kind = classify(rendered)
    assert kind is classify(line)
    if kind is CommandKind.RESERVE:
        assert parse_reserve(rendered) == parse_reserve(line)
    elif kind is CommandKind.AP:
        assert parse_ap(rendered) == parse_ap(line)
    elif kind is CommandKind.PRESUB:
        assert parse_presub(rendered, b"x") == parse_presub(line, b"x")
