"""Latency samples, percentile math, and run reports for the load harness."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class LatencySample:
    """One cross-bot update delivery, timed on a single process-wide clock.

    Both timestamps come from the same monotonic clock (all bots live in one
    harness process), so the one-way proxy needs no clock synchronization.
    """

    entity_id: str
    send_monotonic_ms: float
    recv_monotonic_ms: float

    @property
    def rtt_proxy_ms(self) -> float:
        return self.recv_monotonic_ms - self.send_monotonic_ms


def percentile(values: list, p: float) -> float:
    """Linear-interpolation percentile; 0.0 for an empty sample set."""
    if not values:
        return 0.0
    ordered = sorted(values)
    k = (len(ordered) - 1) * (p / 100.0)
    lo = int(k)
    hi = min(lo + 1, len(ordered) - 1)
    if lo == hi:
        return ordered[lo]
    return ordered[lo] * (hi - k) + ordered[hi] * (k - lo)


@dataclass
class RunReport:
    """Everything one measured scenario produced, with a stable JSON schema."""

    bot_count: int
    duration_s: float
    seed: int
    room: str
    movement: str
    update_rate_hz: float
    sent: int = 0
    received: int = 0
    dropped: int = 0
    room_full_rejections: int = 0
    latency_samples: int = 0
    latency_p50_ms: float = 0.0
    latency_p95_ms: float = 0.0
    latency_p99_ms: float = 0.0
    latency_max_ms: float = 0.0
    fanout_per_second: float = 0.0
    tick_utilization: float = 0.0
    valid: bool = True
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "bot_count": self.bot_count,
            "duration_s": self.duration_s,
            "seed": self.seed,
            "room": self.room,
            "movement": self.movement,
            "update_rate_hz": self.update_rate_hz,
            "sent": self.sent,
            "received": self.received,
            "dropped": self.dropped,
            "room_full_rejections": self.room_full_rejections,
            "latency_samples": self.latency_samples,
            "latency_p50_ms": self.latency_p50_ms,
            "latency_p95_ms": self.latency_p95_ms,
            "latency_p99_ms": self.latency_p99_ms,
            "latency_max_ms": self.latency_max_ms,
            "fanout_per_second": self.fanout_per_second,
            "tick_utilization": self.tick_utilization,
            "valid": self.valid,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        return cls(**{k: doc[k] for k in cls.report_fields()})

    @staticmethod
    def report_fields() -> tuple:
        return (
            "bot_count", "duration_s", "seed", "room", "movement",
            "update_rate_hz", "sent", "received", "dropped",
            "room_full_rejections", "latency_samples", "latency_p50_ms",
            "latency_p95_ms", "latency_p99_ms", "latency_max_ms",
            "fanout_per_second", "tick_utilization", "valid", "notes",
        )


def build_report(
    *,
    bot_count: int,
    duration_s: float,
    seed: int,
    room: str,
    movement: str,
    update_rate_hz: float,
    sent: int,
    received: int,
    dropped: int,
    room_full_rejections: int,
    samples: list,
    tick_utilization: float,
    valid: bool,
    notes: list | None = None,
) -> RunReport:
    latencies = [s.rtt_proxy_ms for s in samples]
    return RunReport(
        bot_count=bot_count,
        duration_s=duration_s,
        seed=seed,
        room=room,
        movement=movement,
        update_rate_hz=update_rate_hz,
        sent=sent,
        received=received,
        dropped=dropped,
        room_full_rejections=room_full_rejections,
        latency_samples=len(latencies),
        latency_p50_ms=round(percentile(latencies, 50), 3),
        latency_p95_ms=round(percentile(latencies, 95), 3),
        latency_p99_ms=round(percentile(latencies, 99), 3),
        latency_max_ms=round(max(latencies), 3) if latencies else 0.0,
        fanout_per_second=round(received / duration_s, 3) if duration_s > 0 else 0.0,
        tick_utilization=tick_utilization,
        valid=valid,
        notes=notes or [],
    )
