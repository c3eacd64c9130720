"""Load harness: synthetic avatars, latency measurement, payload audits."""

from openverse.bench.bots import Bot, BotProfile, transform_stream
from openverse.bench.metrics import LatencySample, RunReport, build_report, percentile
from openverse.bench.runner import (
    PayloadBudget,
    density_sweep,
    format_sweep_table,
    payload_budget,
    run_scenario,
)

__all__ = [
    "Bot",
    "BotProfile",
    "transform_stream",
    "LatencySample",
    "RunReport",
    "build_report",
    "percentile",
    "PayloadBudget",
    "density_sweep",
    "format_sweep_table",
    "payload_budget",
    "run_scenario",
]
