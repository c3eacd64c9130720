"""Headless synthetic avatars that drive a room over a real WebSocket.

Movement decisions are pure functions of (profile, seed, bot index, step),
so two runs with the same seed produce identical sent-message logs; timing
jitter never feeds back into the decision stream.
"""

from __future__ import annotations

import asyncio
import logging
import math
import random
import time
from dataclasses import dataclass

import aiohttp

from openverse import PROTOCOL_VERSION, protocol
from openverse.bench.metrics import LatencySample
from openverse.errors import ROOM_FULL

log = logging.getLogger("openverse.bench")

MOVEMENTS = ("orbit", "random_walk", "idle")

PING_INTERVAL_S = 10.0


@dataclass(frozen=True)
class BotProfile:
    update_rate_hz: float = 10.0
    movement: str = "orbit"
    lifetime_s: float | None = None
    think_jitter_ms: float = 0.0

    def __post_init__(self):
        if not 0 < self.update_rate_hz <= 60:
            raise ValueError(f"update_rate_hz must be in (0, 60], got {self.update_rate_hz}")
        if self.movement not in MOVEMENTS:
            raise ValueError(f"movement must be one of {MOVEMENTS}")
        if self.think_jitter_ms < 0:
            raise ValueError("think_jitter_ms must be >= 0")


def _transform(px, py, pz, ry=0.0):
    return {
        "px": round(px, 4), "py": round(py, 4), "pz": round(pz, 4),
        "rx": 0.0, "ry": round(ry % 360.0, 4), "rz": 0.0,
        "sx": 1.0, "sy": 1.0, "sz": 1.0,
    }


def spawn_transform(bot_index: int) -> dict:
    # ring around the origin so bots never stack exactly
    angle = (bot_index * 40.0) % 360.0
    return _transform(
        2.0 * math.cos(math.radians(angle)), 1.6, 2.0 * math.sin(math.radians(angle)),
        ry=angle,
    )


def transform_stream(profile: BotProfile, seed: int, bot_index: int):
    """Infinite deterministic stream of transform payloads for one bot."""
    if profile.movement == "idle":
        return
    base = spawn_transform(bot_index)
    cx, cy, cz = base["px"], base["py"], base["pz"]
    if profile.movement == "orbit":
        radius = 1.5 + 0.25 * (bot_index % 8)
        steps_per_circle = max(8, int(profile.update_rate_hz * 12))
        step_deg = 360.0 / steps_per_circle
        i = 0
        while True:
            ang = math.radians(step_deg * i)
            yield _transform(
                cx + radius * math.cos(ang),
                cy,
                cz + radius * math.sin(ang),
                ry=(90.0 - step_deg * i),
            )
            i += 1
    else:  # random_walk
        rng = random.Random(seed * 1_000_003 + bot_index)
        x, z = cx, cz
        while True:
            x += rng.uniform(-0.5, 0.5)
            z += rng.uniform(-0.5, 0.5)
            yield _transform(x, cy, z, ry=rng.uniform(0.0, 360.0))
            x, z = round(x, 4), round(z, 4)


def now_ms() -> float:
    return time.monotonic() * 1000.0


class Bot:
    """One synthetic avatar session."""

    def __init__(
        self,
        index: int,
        ws_url: str,
        room: str,
        profile: BotProfile,
        seed: int,
        *,
        inject_delay_ms: float = 0.0,
    ):
        self.index = index
        self.ws_url = ws_url
        self.room = room
        self.profile = profile
        self.seed = seed
        self.inject_delay_s = inject_delay_ms / 1000.0
        self.jitter_rng = random.Random(seed * 7919 + index)

        self.session_id: str | None = None
        self.entity_id: str | None = None
        self.seq = 0
        self.sent = 0
        self.received = 0
        self.dropped = 0
        self.room_full = False
        self.connect_failed = False
        self.samples: list = []
        self.sent_log: list = []

        self._http: aiohttp.ClientSession | None = None
        self._ws = None
        self._reader_task: asyncio.Task | None = None

    async def join(self) -> bool:
        """Connect and admit; False when refused or unreachable."""
        try:
            self._http = aiohttp.ClientSession()
            self._ws = await self._http.ws_connect(self.ws_url)
        except (aiohttp.ClientError, OSError) as exc:
            self.connect_failed = True
            log.error("event=bot_connect_failed bot=%d error=%s", self.index, exc)
            await self._cleanup()
            return False
        await self._send(
            protocol.WireMessage(
                kind=protocol.HELLO, room=self.room, body={"version": PROTOCOL_VERSION}
            )
        )
        reply = await self._recv()
        if reply is None or reply.kind != protocol.WELCOME:
            if reply is not None and reply.body.get("code") == ROOM_FULL:
                self.room_full = True
            await self._cleanup()
            return False
        self.session_id = reply.body["session"]
        self.entity_id = f"av-{self.session_id}"
        self.seq = 1
        await self._send(
            protocol.WireMessage(
                kind=protocol.ENTITY_CREATE,
                room=self.room,
                entity=self.entity_id,
                seq=self.seq,
                body={
                    "components": {
                        "transform": spawn_transform(self.index),
                        "template": {"name": "avatar", "label": f"bot-{self.index}"},
                    },
                    "persistent": False,
                },
            )
        )
        self.sent += 1
        return True

    async def drive(self, go: asyncio.Event, stop: asyncio.Event) -> None:
        """Stream updates per profile until stopped, recording peer latency."""
        self._reader_task = asyncio.create_task(self._reader())
        await go.wait()
        loop = asyncio.get_running_loop()
        interval = 1.0 / self.profile.update_rate_hz
        stream = transform_stream(self.profile, self.seed, self.index)
        deadline = (
            loop.time() + self.profile.lifetime_s
            if self.profile.lifetime_s is not None
            else None
        )
        next_send = loop.time() + interval
        next_ping = loop.time() + PING_INTERVAL_S
        try:
            while not stop.is_set():
                now = loop.time()
                if deadline is not None and now >= deadline:
                    break
                upcoming = [next_ping]
                if self.profile.movement != "idle":
                    upcoming.append(next_send)
                if deadline is not None:
                    upcoming.append(deadline)
                wait = min(upcoming) - now
                if wait > 0:
                    try:
                        await asyncio.wait_for(stop.wait(), timeout=wait)
                        break
                    except asyncio.TimeoutError:
                        pass
                now = loop.time()
                if now >= next_ping:
                    await self._send(
                        protocol.WireMessage(
                            kind=protocol.PING, room=self.room, ts=now_ms()
                        )
                    )
                    next_ping += PING_INTERVAL_S
                if self.profile.movement != "idle" and now >= next_send:
                    await self._send_update(next(stream))
                    next_send += interval
                    if self.profile.think_jitter_ms:
                        next_send += (
                            self.jitter_rng.uniform(0, self.profile.think_jitter_ms)
                            / 1000.0
                        )
        except ConnectionResetError:
            self.dropped += 1

    async def _send_update(self, transform: dict) -> None:
        # stamp before the WAN-emulation delay so the delay is measured
        stamp = round(now_ms(), 3)
        if self.inject_delay_s:
            await asyncio.sleep(self.inject_delay_s)
        self.seq += 1
        msg = protocol.WireMessage(
            kind=protocol.ENTITY_UPDATE,
            room=self.room,
            entity=self.entity_id,
            seq=self.seq,
            body={
                "component": "transform",
                "data": transform,
                "sent_ms": stamp,
            },
        )
        try:
            await self._send(msg)
        except (aiohttp.ClientError, ConnectionResetError, RuntimeError):
            self.dropped += 1
            return
        self.sent += 1
        self.sent_log.append(
            (self.entity_id, self.seq, transform["px"], transform["pz"])
        )

    async def _reader(self) -> None:
        try:
            while True:
                msg = await self._recv(timeout=None)
                if msg is None:
                    return
                if msg.kind in (
                    protocol.ENTITY_UPDATE,
                    protocol.ENTITY_CREATE,
                    protocol.ENTITY_DELETE,
                ):
                    if msg.sender == self.session_id:
                        continue  # server must not echo; belt and braces
                    if msg.sender == "server":
                        continue  # eviction cleanup is not peer traffic
                    self.received += 1
                    sent_ms = msg.body.get("sent_ms")
                    if isinstance(sent_ms, (int, float)) and msg.kind == protocol.ENTITY_UPDATE:
                        self.samples.append(
                            LatencySample(msg.entity, float(sent_ms), now_ms())
                        )
        except asyncio.CancelledError:
            pass

    async def leave(self) -> None:
        if self._reader_task is not None:
            self._reader_task.cancel()
        if self._ws is not None and not self._ws.closed:
            try:
                await self._send(
                    protocol.WireMessage(kind=protocol.BYE, room=self.room)
                )
            except (aiohttp.ClientError, ConnectionResetError, RuntimeError):
                pass
        await self._cleanup()

    async def _send(self, msg: protocol.WireMessage) -> None:
        await self._ws.send_str(protocol.encode(msg).decode("utf-8"))

    async def _recv(self, timeout: float | None = 10.0):
        if timeout is not None:
            frame = await asyncio.wait_for(self._ws.receive(), timeout)
        else:
            frame = await self._ws.receive()
        if frame.type not in (aiohttp.WSMsgType.TEXT, aiohttp.WSMsgType.BINARY):
            return None
        return protocol.decode(frame.data)

    async def _cleanup(self) -> None:
        if self._ws is not None:
            try:
                await self._ws.close()
            except Exception:
                pass
        if self._http is not None:
            await self._http.close()
