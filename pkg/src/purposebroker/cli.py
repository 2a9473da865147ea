"""Command-line entry points: the broker daemon and the benchmark harness."""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys

from .bench import Scenario, emit_report, run_scenario
from .broker import BrokerConfig
from .commands import Keywords
from .engine import EngineConfig, Mode
from .policy import StoreKind
from .server import BrokerServer


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def main_broker(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pbroker", description="Purpose-aware MQTT broker"
    )
    parser.add_argument("--host", default="0.0.0.0")
    parser.add_argument("--port", type=int, default=1883)
    parser.add_argument(
        "--mode", choices=[m.value for m in Mode], default="fop",
        help="filtering mode (default: fop)",
    )
    parser.add_argument("--store", choices=[k.value for k in StoreKind], default="tree")
    parser.add_argument("--cache", type=_on_off, default=False, metavar="on|off")
    parser.add_argument("--strict", type=_on_off, default=False, metavar="on|off")
    parser.add_argument("--keyword-reserve", default="!RESERVE")
    parser.add_argument("--keyword-ap", default="!AP")
    parser.add_argument("--keyword-presub", default="!PRESUB")
    parser.add_argument("--keyword-set", default="!SET")
    parser.add_argument(
        "--strict-commands", action="store_true",
        help="close connections on malformed or unknown commands",
    )
    parser.add_argument("--max-packet-size", type=int, default=256 * 1024)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else
        logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    config = BrokerConfig(
        host=args.host,
        port=args.port,
        engine=EngineConfig(
            mode=Mode(args.mode),
            strict=args.strict,
            store_kind=StoreKind(args.store),
            cache=args.cache,
        ),
        keywords=Keywords(
            reserve=args.keyword_reserve,
            ap=args.keyword_ap,
            presub=args.keyword_presub,
            setopt=args.keyword_set,
        ),
        lenient_unknown_commands=not args.strict_commands,
        max_packet_size=args.max_packet_size,
    )
    server = BrokerServer(config)
    try:
        asyncio.run(server.serve_forever())
    except KeyboardInterrupt:
        pass
    return 0


def main_bench(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pbroker-bench", description="Broker filtering-mode benchmark"
    )
    parser.add_argument("--publishers", type=int, default=10)
    parser.add_argument("--subscribers", type=int, default=10)
    parser.add_argument("--subscriptions-per-client", type=int, default=3)
    parser.add_argument("--messages", type=int, default=2000)
    parser.add_argument("--payload-bytes", type=int, default=64)
    parser.add_argument("--qos", type=int, choices=(0, 1), default=0)
    parser.add_argument("--reservations", type=int, default=100)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument(
        "--modes", default="off,scan,fos,fop-cache,hybrid,fop,fop-flat",
        help="comma-separated mode labels",
    )
    parser.add_argument("--reps", type=int, default=1)
    parser.add_argument("--out", default=None, help="CSV output path")
    args = parser.parse_args(argv)

    scenario = Scenario(
        publishers=args.publishers,
        subscribers=args.subscribers,
        subscriptions_per_client=args.subscriptions_per_client,
        messages_total=args.messages,
        payload_bytes=args.payload_bytes,
        qos=args.qos,
        reservations=args.reservations,
        seed=args.seed,
        modes=tuple(m.strip() for m in args.modes.split(",") if m.strip()),
        repetitions=args.reps,
    )
    results = run_scenario(scenario)
    print(emit_report(results, csv_path=args.out))
    return 0


if __name__ == "__main__":
    sys.exit(main_broker())
