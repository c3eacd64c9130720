"""Scenario runner: spawn bots, collect metrics, sweep densities, audit payloads."""

from __future__ import annotations

import asyncio
import json
import logging
import re
from dataclasses import dataclass, field
from urllib.parse import urlsplit, urlunsplit

import aiohttp

from openverse.bench.bots import Bot, BotProfile
from openverse.bench.metrics import RunReport, build_report

log = logging.getLogger("openverse.bench")

# settle time after the send phase so in-flight ticks drain before counting
DRAIN_S = 0.5


def http_base_from_ws(ws_url: str) -> str:
    parts = urlsplit(ws_url)
    scheme = {"ws": "http", "wss": "https"}.get(parts.scheme, parts.scheme)
    return urlunsplit((scheme, parts.netloc, "", "", ""))


async def _fetch_tick_utilization(ws_url: str, room: str) -> float:
    base = http_base_from_ws(ws_url)
    try:
        async with aiohttp.ClientSession() as http:
            async with http.get(f"{base}/healthz", timeout=aiohttp.ClientTimeout(total=5)) as resp:
                doc = await resp.json()
        return float(doc["rooms_detail"].get(room, {}).get("tick_utilization", 0.0))
    except Exception as exc:
        log.warning("event=healthz_unavailable error=%s", exc)
        return 0.0


async def _run_scenario_async(
    server_url: str,
    bots: int,
    profile: BotProfile,
    duration_s: float,
    *,
    seed: int,
    room: str,
    inject_delay_ms: float,
) -> tuple:
    if bots < 2:
        raise ValueError("a scenario needs at least 2 bots")
    crew = [
        Bot(i, server_url, room, profile, seed, inject_delay_ms=inject_delay_ms)
        for i in range(bots)
    ]
    joined: list = []
    notes: list = []
    valid = True
    # sequential joins make capacity outcomes deterministic
    for bot in crew:
        ok = await bot.join()
        if ok:
            joined.append(bot)
        elif bot.connect_failed:
            valid = False
            notes.append(f"bot {bot.index}: connect failure")
            break

    go = asyncio.Event()
    stop = asyncio.Event()
    drivers = [asyncio.create_task(b.drive(go, stop)) for b in joined]
    go.set()
    if valid:
        await asyncio.sleep(duration_s)
    stop.set()
    await asyncio.gather(*drivers, return_exceptions=True)
    await asyncio.sleep(DRAIN_S)

    tick_utilization = (
        await _fetch_tick_utilization(server_url, room) if joined else 0.0
    )
    for bot in joined:
        await bot.leave()
    for bot in crew:
        if bot not in joined and not bot.connect_failed and not bot.room_full:
            await bot._cleanup()

    samples = [s for b in joined for s in b.samples]
    rejections = sum(1 for b in crew if b.room_full)
    if rejections:
        notes.append(f"{rejections} joins refused with RoomFull (capacity result)")
    report = build_report(
        bot_count=bots,
        duration_s=duration_s,
        seed=seed,
        room=room,
        movement=profile.movement,
        update_rate_hz=profile.update_rate_hz,
        sent=sum(b.sent for b in joined),
        received=sum(b.received for b in joined),
        dropped=sum(b.dropped for b in joined),
        room_full_rejections=rejections,
        samples=samples,
        tick_utilization=tick_utilization,
        valid=valid,
        notes=notes,
    )
    sent_logs = {b.index: list(b.sent_log) for b in joined}
    return report, sent_logs


def run_scenario(
    server_url: str,
    bots: int,
    profile: BotProfile,
    duration_s: float,
    *,
    seed: int = 0,
    room: str = "hello-world",
    inject_delay_ms: float = 0.0,
    out: str | None = None,
) -> RunReport:
    """Drive one room with ``bots`` synthetic avatars and report the metrics."""
    report, _ = asyncio.run(
        _run_scenario_async(
            server_url, bots, profile, duration_s,
            seed=seed, room=room, inject_delay_ms=inject_delay_ms,
        )
    )
    if out:
        with open(out, "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
    return report


def density_sweep(
    server_url: str,
    bot_counts: list,
    profile: BotProfile,
    duration_s: float,
    *,
    seed: int = 0,
    room_base: str = "hello-world",
    inject_delay_ms: float = 0.0,
    out: str | None = None,
) -> list:
    """One sealed report per count; each point gets a freshly recycled room."""
    if list(bot_counts) != sorted(bot_counts):
        raise ValueError("bot counts must be ascending")
    reports = []
    for count in bot_counts:
        room = f"{room_base}:bench-{count}"
        report = run_scenario(
            server_url, count, profile, duration_s,
            seed=seed, room=room, inject_delay_ms=inject_delay_ms,
        )
        reports.append(report)
        log.info(
            "event=sweep_point bots=%d p95_ms=%.1f received=%d",
            count, report.latency_p95_ms, report.received,
        )
    if out:
        with open(out, "w", encoding="utf-8") as f:
            json.dump(
                {"reports": [r.to_dict() for r in reports]}, f, indent=2, sort_keys=True
            )
            f.write("\n")
    return reports


def format_sweep_table(reports: list) -> str:
    header = (
        f"{'bots':>5} {'sent':>8} {'recv':>9} {'drop':>5} {'full':>5} "
        f"{'p50 ms':>8} {'p95 ms':>8} {'p99 ms':>8} {'max ms':>8} {'fan/s':>9} {'tick%':>6}"
    )
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.bot_count:>5} {r.sent:>8} {r.received:>9} {r.dropped:>5} "
            f"{r.room_full_rejections:>5} {r.latency_p50_ms:>8.1f} "
            f"{r.latency_p95_ms:>8.1f} {r.latency_p99_ms:>8.1f} "
            f"{r.latency_max_ms:>8.1f} {r.fanout_per_second:>9.1f} "
            f"{100 * r.tick_utilization:>5.1f}%"
        )
    return "\n".join(lines)


# --- payload budget -----------------------------------------------------------

@dataclass
class PayloadItem:
    url: str
    bytes: int
    ok: bool


@dataclass
class PayloadBudget:
    world_id: str
    document_url: str
    document_bytes: int
    items: list = field(default_factory=list)
    complete: bool = True

    @property
    def total_bytes(self) -> int:
        return self.document_bytes + sum(i.bytes for i in self.items)

    def to_dict(self) -> dict:
        return {
            "world_id": self.world_id,
            "document_url": self.document_url,
            "document_bytes": self.document_bytes,
            "items": [
                {"url": i.url, "bytes": i.bytes, "ok": i.ok} for i in self.items
            ],
            "total_bytes": self.total_bytes,
            "complete": self.complete,
        }


_CONFIG_RE = re.compile(
    r'<script type="application/json" id="openverse-config">(.*?)</script>', re.S
)
_SCRIPT_SRC_RE = re.compile(r'<script src="([^"]+)"')


def referenced_urls(document: str) -> list:
    """Same-origin URLs the document pulls in: world assets and client scripts.

    Cross-origin script references (the framework bundle on its CDN) are
    cached separately by browsers and excluded from the world's own budget.
    """
    urls = []
    config = _CONFIG_RE.search(document)
    if config:
        doc = json.loads(config.group(1))
        for asset in doc.get("assets", []):
            urls.append(f"/assets/{asset['path']}")
    for src in _SCRIPT_SRC_RE.findall(document):
        if src.startswith("/"):
            urls.append(src)
    return urls


async def _payload_budget_async(world_id: str, server_url: str) -> PayloadBudget:
    base = server_url.rstrip("/")
    document_url = f"{base}/w/{world_id}"
    async with aiohttp.ClientSession() as http:
        async with http.get(document_url) as resp:
            if resp.status != 200:
                budget = PayloadBudget(world_id, document_url, 0, complete=False)
                budget.items.append(PayloadItem(document_url, 0, False))
                return budget
            body = await resp.read()
        budget = PayloadBudget(world_id, document_url, len(body))
        for url in referenced_urls(body.decode("utf-8")):
            full = f"{base}{url}"
            try:
                async with http.get(full) as resp:
                    if resp.status == 200:
                        data = await resp.read()
                        budget.items.append(PayloadItem(url, len(data), True))
                    else:
                        budget.items.append(PayloadItem(url, 0, False))
                        budget.complete = False
            except aiohttp.ClientError:
                budget.items.append(PayloadItem(url, 0, False))
                budget.complete = False
    return budget


def payload_budget(world_id: str, server_url: str) -> PayloadBudget:
    """Initial payload of a world: document plus every referenced asset."""
    return asyncio.run(_payload_budget_async(world_id, server_url))
