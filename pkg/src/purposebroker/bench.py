"""Throughput and latency harness comparing the broker's filtering modes.

Each run launches a fresh in-process broker, populates reservations through
the command interface, connects subscriber and publisher clients, then
publishes a deterministic message schedule with send timestamps embedded in
the payload.  Publisher and subscribers share one process and clock, so the
round-trip latency needs no clock synchronization.  Overheads are reported
relative to the ``off`` (engine bypassed) run of the same scenario.
"""

from __future__ import annotations

import asyncio
import csv
import gc
import random
import statistics
import struct
import time
from collections import Counter
from dataclasses import dataclass

from .broker import BrokerConfig
from .client import MqttClient
from .commands import render_reserve
from .engine import EngineConfig, Mode
from .policy import StoreKind
from .purposes import IpTuple
from .server import BrokerServer
from .topics import parse_filter

__all__ = [
    "Scenario",
    "RunResult",
    "GeneratedLoad",
    "BrokerUnreachable",
    "ScenarioTimeout",
    "MODE_LABELS",
    "mode_config",
    "generate_load",
    "run_scenario",
    "emit_report",
]

MODE_LABELS = ("off", "scan", "fos", "fop-cache", "hybrid", "fop", "fop-flat")

_ACCESS_PURPOSE = "operations/monitoring"
_FILLER_PURPOSES = ("operations", "analytics", "marketing", "research", "billing")


class BrokerUnreachable(Exception):
    pass


class ScenarioTimeout(Exception):
    pass


@dataclass(frozen=True)
class Scenario:
    publishers: int = 10
    subscribers: int = 10
    subscriptions_per_client: int = 3
    messages_total: int = 2000
    payload_bytes: int = 64
    qos: int = 0
    reservations: int = 100
    seed: int = 1
    modes: tuple[str, ...] = MODE_LABELS
    repetitions: int = 1


@dataclass(frozen=True)
class RunResult:
    mode: str
    throughput: float  # messages received per second
    latency_median_ms: float
    latency_p95_ms: float
    overhead_pct: float | None  # vs. the off-mode run; None without a baseline


@dataclass(frozen=True)
class GeneratedLoad:
    topics: tuple[str, ...]
    reserve_commands: tuple[str, ...]
    subscriber_topics: tuple[tuple[str, ...], ...]
    publish_schedule: tuple[tuple[str, ...], ...]  # one message list per publisher
    access_purpose: str
    expected_deliveries: int


def mode_config(label: str) -> EngineConfig:
    table = {
        "off": (Mode.OFF, StoreKind.TREE, False),
        "scan": (Mode.SCAN, StoreKind.TREE, False),
        "fos": (Mode.FOS, StoreKind.TREE, False),
        "fop": (Mode.FOP, StoreKind.TREE, False),
        "fop-cache": (Mode.FOP, StoreKind.TREE, True),
        "fop-flat": (Mode.FOP, StoreKind.FLAT, False),
        "hybrid": (Mode.HYBRID, StoreKind.TREE, False),
    }
    if label not in table:
        raise ValueError(f"unknown mode label: {label!r}")
    mode, store, cache = table[label]
    return EngineConfig(mode=mode, store_kind=store, cache=cache)


def generate_load(s: Scenario) -> GeneratedLoad:
    """Deterministic topics, reservations, subscriptions, and schedule."""
    rng = random.Random(s.seed)
    n_topics = max(2, (s.subscribers * s.subscriptions_per_client) // 2)
    topics = tuple(f"bench/area{i % 10}/dev{i}/value" for i in range(n_topics))

    commands: list[str] = []
    reserved_topics = topics[: s.reservations]
    tuple_for_topics = IpTuple.of(["operations", "analytics"], ["marketing"])
    for t in reserved_topics:
        commands.append(render_reserve(parse_filter(t), tuple_for_topics))
    for k in range(s.reservations - len(reserved_topics)):
        flt = parse_filter(f"reserved/zone{k % 25}/unit{k}")
        aip = rng.sample(_FILLER_PURPOSES, 2)
        pip = [rng.choice(_FILLER_PURPOSES) + "/special"]
        commands.append(render_reserve(flt, IpTuple.of(aip, pip)))

    subscriber_topics = tuple(
        tuple(rng.sample(topics, min(s.subscriptions_per_client, len(topics))))
        for _ in range(s.subscribers)
    )
    subs_per_topic = Counter(t for ts in subscriber_topics for t in ts)

    flat_schedule = [topics[rng.randrange(n_topics)] for _ in range(s.messages_total)]
    expected = sum(subs_per_topic[t] for t in flat_schedule)
    per_publisher: list[tuple[str, ...]] = []
    if s.publishers:
        chunk = (s.messages_total + s.publishers - 1) // max(1, s.publishers)
        for i in range(s.publishers):
            per_publisher.append(tuple(flat_schedule[i * chunk : (i + 1) * chunk]))

    return GeneratedLoad(
        topics=topics,
        reserve_commands=tuple(commands),
        subscriber_topics=subscriber_topics,
        publish_schedule=tuple(per_publisher),
        access_purpose=_ACCESS_PURPOSE,
        expected_deliveries=expected,
    )


async def _run_once(s: Scenario, label: str, load: GeneratedLoad) -> tuple[float, float, float]:
    """One broker launch; returns (throughput msg/s, latency median ms, p95 ms)."""
    gc.collect()  # keep collector pauses out of the timed window
    config = BrokerConfig(port=0, engine=mode_config(label), audit=False)
    server = BrokerServer(config)
    await server.start()
    assert server.port is not None

    received = 0
    expected = load.expected_deliveries
    latencies_ns: list[int] = []
    last_recv_ns = 0
    done = asyncio.Event()

    def on_message(topic: str, payload: bytes) -> None:
        nonlocal received, last_recv_ns
        sent_ns = struct.unpack_from("!q", payload)[0]
        now = time.perf_counter_ns()
        latencies_ns.append(now - sent_ns)
        last_recv_ns = now
        received += 1
        if received >= expected:
            done.set()

    clients: list[MqttClient] = []
    try:
        admin = MqttClient("bench-admin")
        clients.append(admin)
        try:
            await admin.connect("127.0.0.1", server.port)
        except (ConnectionError, OSError) as e:
            raise BrokerUnreachable(str(e)) from e
        for cmd in load.reserve_commands:
            await admin.publish(cmd, b"", qos=1)
        if load.reserve_commands:
            await admin.publish(load.reserve_commands[-1], b"", qos=1, wait_ack=True)

        subscribers = []
        for i, topics in enumerate(load.subscriber_topics):
            sub = MqttClient(f"bench-sub-{i}", on_message=on_message)
            clients.append(sub)
            subscribers.append(sub)
            await sub.connect("127.0.0.1", server.port)
            if label == "off":
                entries = [(t, s.qos) for t in topics]
            else:
                entries = [
                    (f"!AP/{t}{{{load.access_purpose}}}", s.qos) for t in topics
                ]
            codes = await sub.subscribe(*entries)
            if any(c == 0x80 for c in codes):
                raise RuntimeError(f"bench subscription refused in mode {label}")

        publishers = []
        for i in range(len(load.publish_schedule)):
            pub = MqttClient(f"bench-pub-{i}")
            clients.append(pub)
            publishers.append(pub)
            await pub.connect("127.0.0.1", server.port)

        pad = b"x" * max(0, s.payload_bytes - 8)

        async def publish_all(client: MqttClient, topics: tuple[str, ...]) -> None:
            for n, topic in enumerate(topics):
                payload = struct.pack("!q", time.perf_counter_ns()) + pad
                await client.publish(topic, payload, qos=s.qos)
                if n % 32 == 31:
                    await client.flush()
            await client.flush()

        if expected == 0:
            done.set()
        await asyncio.sleep(0.05)  # let connection setup fully settle
        gc.collect()
        gc.disable()  # keep collector pauses out of the timed window
        t0 = time.perf_counter_ns()
        tasks = [
            asyncio.create_task(publish_all(pub, sched))
            for pub, sched in zip(publishers, load.publish_schedule)
        ]
        try:
            timeout = 30 + s.messages_total / 200
            await asyncio.wait_for(done.wait(), timeout)
        except asyncio.TimeoutError:
            raise ScenarioTimeout(
                f"mode {label}: {received}/{expected} deliveries"
            ) from None
        finally:
            gc.enable()
            for t in tasks:
                t.cancel()
        if s.qos == 1:
            await asyncio.sleep(0.05)  # settle, then check exact conservation
            if received != expected:
                raise RuntimeError(
                    f"mode {label}: received {received}, expected exactly {expected}"
                )

        if received == 0:
            return 0.0, 0.0, 0.0
        duration_s = max((last_recv_ns - t0) / 1e9, 1e-9)
        lat_sorted = sorted(latencies_ns)
        median_ms = lat_sorted[len(lat_sorted) // 2] / 1e6
        p95_ms = lat_sorted[int(0.95 * (len(lat_sorted) - 1))] / 1e6
        return received / duration_s, median_ms, p95_ms
    finally:
        for c in clients:
            try:
                await c.disconnect()
            except Exception:
                pass
        await server.stop()


def run_scenario(s: Scenario) -> list[RunResult]:
    load = generate_load(s)
    # One discarded warm-up run, then mode runs interleaved across repetition
    # rounds so process warm-up and slow drift hit every mode equally.
    if s.messages_total > 0 and s.modes:
        warm = Scenario(
            publishers=max(1, min(4, s.publishers)),
            subscribers=min(4, s.subscribers),
            subscriptions_per_client=s.subscriptions_per_client,
            messages_total=min(1000, s.messages_total),
            payload_bytes=s.payload_bytes,
            qos=s.qos,
            reservations=min(50, s.reservations),
            seed=s.seed,
        )
        asyncio.run(_run_once(warm, s.modes[0], generate_load(warm)))
    runs_by_mode: dict[str, list[tuple[float, float, float]]] = {m: [] for m in s.modes}
    for round_ in range(max(1, s.repetitions)):
        # rotate the order each round so positional effects (allocator state
        # left by the previous run, OS caches) average out across modes
        order = s.modes[round_ % len(s.modes):] + s.modes[: round_ % len(s.modes)]
        for label in order:
            runs_by_mode[label].append(asyncio.run(_run_once(s, label, load)))
    per_mode: dict[str, tuple[float, float, float]] = {}
    for label in s.modes:
        runs = runs_by_mode[label]
        per_mode[label] = (
            statistics.median(r[0] for r in runs),
            statistics.median(r[1] for r in runs),
            statistics.median(r[2] for r in runs),
        )
    baseline = per_mode.get("off", (None,))[0]
    results = []
    for label in s.modes:
        thr, lat_med, lat_p95 = per_mode[label]
        if baseline:
            overhead = 0.0 if label == "off" else (baseline - thr) / baseline * 100.0
        else:
            overhead = None
        results.append(RunResult(label, thr, lat_med, lat_p95, overhead))
    return results


_COLUMNS = ("mode", "throughput_msg_s", "latency_median_ms", "latency_p95_ms", "overhead_pct")


def emit_report(results: list[RunResult], csv_path: str | None = None) -> str:
    """Render a fixed-column text table; optionally also write CSV."""
    if not results:
        raise ValueError("no results to report")
    rows = [
        (
            r.mode,
            f"{r.throughput:.2f}",
            f"{r.latency_median_ms:.3f}",
            f"{r.latency_p95_ms:.3f}",
            "---" if r.overhead_pct is None else f"{r.overhead_pct:.2f}",
        )
        for r in results
    ]
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_COLUMNS)
            writer.writerows(rows)
    widths = [
        max(len(_COLUMNS[i]), max(len(row[i]) for row in rows))
        for i in range(len(_COLUMNS))
    ]
    lines = ["  ".join(c.ljust(widths[i]) for i, c in enumerate(_COLUMNS))]
    for row in rows:
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)))
    return "\n".join(lines)
