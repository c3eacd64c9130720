"""Command line entry points: ``openverse serve`` and ``openverse bench``."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import sys

from openverse.bench import (
    BotProfile,
    density_sweep,
    format_sweep_table,
    payload_budget,
    run_scenario,
)
from openverse.server import ServerConfig, preflight, serve_until_stopped


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="openverse",
        description="Room-based world synchronization server and load harness",
    )
    parser.add_argument(
        "--log-level", default="INFO", help="logging level (default INFO)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the sync server")
    serve.add_argument("--port", type=int, default=8443)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--cert", help="TLS certificate chain (PEM)")
    serve.add_argument("--key", help="TLS private key (PEM)")
    serve.add_argument(
        "--persist-dir",
        default="openverse-data",
        help="state directory (env OPENVERSE_PERSIST_DIR overrides)",
    )
    serve.add_argument("--tick-ms", type=int, default=50)
    serve.add_argument("--max-room-size", type=int, default=20)
    serve.add_argument("--heartbeat-timeout-ms", type=int, default=30_000)
    serve.add_argument(
        "--dev-plaintext",
        action="store_true",
        help="serve plain ws/http on localhost for development and tests",
    )
    serve.add_argument(
        "--no-auto-create",
        action="store_true",
        help="refuse rooms whose world exists but is not yet loaded",
    )
    serve.add_argument("--client-dir", help="directory holding the browser client bundle")

    bench = sub.add_parser("bench", help="load harness")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True)

    run_p = bench_sub.add_parser("run", help="one measured scenario")
    run_p.add_argument("--url", required=True, help="websocket sync URL (ws://host:port/sync)")
    run_p.add_argument("--bots", type=int, required=True)
    run_p.add_argument("--rate", type=float, default=10.0, help="updates per second per bot")
    run_p.add_argument("--duration", type=float, default=30.0, help="seconds")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--room", default="hello-world")
    run_p.add_argument(
        "--profile", default="orbit", choices=("orbit", "random_walk", "idle")
    )
    run_p.add_argument("--jitter-ms", type=float, default=0.0)
    run_p.add_argument("--inject-delay-ms", type=float, default=0.0)
    run_p.add_argument("--out", help="write the report JSON here")

    sweep_p = bench_sub.add_parser("sweep", help="density sweep over bot counts")
    sweep_p.add_argument("--url", required=True)
    sweep_p.add_argument("--counts", required=True, help="comma list, e.g. 5,10,15,20")
    sweep_p.add_argument("--rate", type=float, default=10.0)
    sweep_p.add_argument("--duration", type=float, default=30.0, help="seconds per point")
    sweep_p.add_argument("--seed", type=int, default=0)
    sweep_p.add_argument("--room-base", default="hello-world")
    sweep_p.add_argument(
        "--profile", default="orbit", choices=("orbit", "random_walk", "idle")
    )
    sweep_p.add_argument("--jitter-ms", type=float, default=0.0)
    sweep_p.add_argument("--inject-delay-ms", type=float, default=0.0)
    sweep_p.add_argument("--out", help="write the sweep JSON here")

    payload_p = bench_sub.add_parser("payload", help="initial payload budget of a world")
    payload_p.add_argument("--world", required=True)
    payload_p.add_argument("--url", required=True, help="http(s) base URL of the server")
    payload_p.add_argument("--out", help="write the budget JSON here")

    return parser


def serve_config(args) -> ServerConfig:
    # the environment wins over the flag so deployments can pin the data dir
    persist_dir = os.environ.get("OPENVERSE_PERSIST_DIR") or args.persist_dir
    return ServerConfig(
        port=args.port,
        host=args.host,
        cert=args.cert,
        key=args.key,
        persist_dir=persist_dir,
        tick_ms=args.tick_ms,
        max_room_size=args.max_room_size,
        heartbeat_timeout_ms=args.heartbeat_timeout_ms,
        dev_plaintext=args.dev_plaintext,
        auto_create=not args.no_auto_create,
        client_dir=args.client_dir,
    )


def cmd_serve(args) -> int:
    config = serve_config(args)
    failure = preflight(config)
    if failure is not None:
        code, message = failure
        print(f"openverse: {message}", file=sys.stderr)
        return code
    return asyncio.run(serve_until_stopped(config))


def _profile_from(args) -> BotProfile:
    return BotProfile(
        update_rate_hz=args.rate,
        movement=args.profile,
        think_jitter_ms=args.jitter_ms,
    )


def cmd_bench_run(args) -> int:
    report = run_scenario(
        args.url,
        args.bots,
        _profile_from(args),
        args.duration,
        seed=args.seed,
        room=args.room,
        inject_delay_ms=args.inject_delay_ms,
        out=args.out,
    )
    print(format_sweep_table([report]))
    for note in report.notes:
        print(f"note: {note}")
    if not report.valid:
        print("run INVALID (partial report)", file=sys.stderr)
        return 1
    return 0


def cmd_bench_sweep(args) -> int:
    counts = [int(c) for c in args.counts.split(",") if c.strip()]
    reports = density_sweep(
        args.url,
        counts,
        _profile_from(args),
        args.duration,
        seed=args.seed,
        room_base=args.room_base,
        inject_delay_ms=args.inject_delay_ms,
        out=args.out,
    )
    print(format_sweep_table(reports))
    return 0 if all(r.valid for r in reports) else 1


def cmd_bench_payload(args) -> int:
    budget = payload_budget(args.world, args.url)
    doc = budget.to_dict()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
    print(f"document {budget.document_url}: {budget.document_bytes} bytes")
    for item in budget.items:
        status = f"{item.bytes} bytes" if item.ok else "MISSING"
        print(f"  {item.url}: {status}")
    print(f"total: {budget.total_bytes} bytes ({budget.total_bytes / 1024:.1f} KiB)")
    if not budget.complete:
        print("budget INCOMPLETE: unreachable references listed above", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
    )
    if args.command == "serve":
        return cmd_serve(args)
    if args.command == "bench":
        if args.bench_command == "run":
            return cmd_bench_run(args)
        if args.bench_command == "sweep":
            return cmd_bench_sweep(args)
        if args.bench_command == "payload":
            return cmd_bench_payload(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
