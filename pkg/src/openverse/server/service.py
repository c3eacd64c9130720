"""Authoritative sync service.

One asyncio process serves WebSocket sessions at ``/sync``, world documents
at ``/w/<world_id>``, static assets at ``/assets/...``, and ``/healthz``.
Each room runs its own tick task: inbound frames queue per room, drain once
per tick through the reducer, and fan out through bounded per-session write
queues so one slow consumer can never stall a room. Snapshots are written
off the tick task against an immutable copy of the state.
"""

from __future__ import annotations

import asyncio
import logging
import ssl
import time
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path

from aiohttp import WSMsgType, web

from openverse import PROTOCOL_VERSION, protocol
from openverse.errors import DecodeError, InvalidWorld, SYNTAX_ERROR
from openverse.server.persistence import (
    load_room_from_disk,
    persist_room,
    room_snapshot_doc,
    snapshot_path,
    write_snapshot_doc,
)
from openverse.server.room import (
    RoomState,
    admit_session,
    coalesce_batch,
    heartbeat_sweep,
    room_step,
    snapshot_entities,
)
from openverse.world.document import emit_world_document
from openverse.world.worldfile import (
    ensure_demo_world,
    load_world_file,
    world_file_path,
)

log = logging.getLogger("openverse.server")

# Startup failures get distinct exit codes so scripts can tell them apart.
EXIT_OK = 0
EXIT_TLS = 3
EXIT_PORT = 4
EXIT_PERSIST = 5

CLIENT_BUNDLE_ROUTE = "/client/openverse-client.js"


@dataclass
class ServerConfig:
    port: int = 8443
    host: str = "127.0.0.1"
    cert: str | None = None
    key: str | None = None
    persist_dir: str = "openverse-data"
    tick_ms: int = 50
    max_room_size: int = 20
    heartbeat_timeout_ms: int = 30_000
    dev_plaintext: bool = False
    auto_create: bool = True
    client_dir: str | None = None
    persist_debounce_ms: int = 5_000
    outbound_queue_limit: int = 256
    hello_timeout_s: float = 10.0
    # empty, clean rooms unload after this many idle ticks
    idle_unload_ticks: int = 40


def preflight(config: ServerConfig):
    """Validate startup requirements; returns (exit_code, message) or None."""
    persist = Path(config.persist_dir)
    try:
        persist.mkdir(parents=True, exist_ok=True)
        probe = persist / ".write-probe"
        probe.write_text("ok")
        probe.unlink()
    except OSError as exc:
        return EXIT_PERSIST, f"persist dir {persist} is not writable: {exc}"
    if not config.dev_plaintext:
        if not config.cert or not config.key:
            return EXIT_TLS, "production mode requires --cert and --key (or --dev-plaintext)"
        try:
            build_ssl_context(config)
        except (OSError, ssl.SSLError) as exc:
            return EXIT_TLS, f"cannot load TLS credentials: {exc}"
    return None


def build_ssl_context(config: ServerConfig) -> ssl.SSLContext:
    ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
    ctx.load_cert_chain(config.cert, config.key)
    return ctx


class SessionHandle:
    """Transport-side state for one live connection."""

    def __init__(self, session_id: str, ws, room_id: str, limit: int):
        self.session_id = session_id
        self.ws = ws
        self.room_id = room_id
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=limit)
        self.writer_task: asyncio.Task | None = None
        self.closed = False

    def enqueue(self, frame: str) -> bool:
        """Queue one outbound frame; False means overflow (disconnect policy)."""
        if self.closed:
            return True
        try:
            self.queue.put_nowait(frame)
            return True
        except asyncio.QueueFull:
            return False


class RoomRuntime:
    def __init__(self, state: RoomState):
        self.state = state
        self.inbound: deque = deque()
        self.handles: dict[str, SessionHandle] = {}
        self.task: asyncio.Task | None = None
        self.last_persist_ms = 0.0
        self.persist_inflight = False
        self.tick_utilization = 0.0
        self.idle_ticks = 0


def now_ms() -> float:
    return time.monotonic() * 1000.0


class SyncService:
    """The running server: rooms, sessions, HTTP routes."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.persist_dir = Path(config.persist_dir)
        self.rooms: dict[str, RoomRuntime] = {}
        self.allocator = protocol.SessionIdAllocator()
        self.runner: web.AppRunner | None = None
        self.port: int | None = None
        self.scheme = "http" if config.dev_plaintext else "https"
        self._stopping = False
        self._persist_tasks: set = set()

    # --- lifecycle -------------------------------------------------------

    def build_app(self) -> web.Application:
        app = web.Application()
        app.add_routes(
            [
                web.get("/healthz", self.handle_healthz),
                web.get("/sync", self.handle_sync),
                web.get("/w/{world_id}", self.handle_world),
                web.get("/assets/{path:.*}", self.handle_asset),
                web.get("/client/{path:.*}", self.handle_client),
            ]
        )
        return app

    async def start(self) -> int:
        """Bind and serve; returns the actual port. Raises OSError if busy."""
        ensure_demo_world(self.persist_dir)
        ctx = None if self.config.dev_plaintext else build_ssl_context(self.config)
        self.runner = web.AppRunner(self.build_app(), access_log=None)
        await self.runner.setup()
        site = web.TCPSite(
            self.runner, self.config.host, self.config.port, ssl_context=ctx
        )
        await site.start()
        self.port = self.runner.addresses[0][1]
        log.info(
            "event=listening url=%s://%s:%d sync=/sync",
            self.scheme, self.config.host, self.port,
        )
        return self.port

    async def stop(self) -> None:
        self._stopping = True
        tasks = [rt.task for rt in self.rooms.values() if rt.task is not None]
        if tasks:
            await asyncio.gather(*tasks, return_exceptions=True)
        if self._persist_tasks:
            await asyncio.gather(*self._persist_tasks, return_exceptions=True)
        # final persistence for anything still dirty
        for rt in list(self.rooms.values()):
            if rt.state.dirty:
                try:
                    await asyncio.to_thread(persist_room, rt.state, self.persist_dir)
                except OSError as exc:
                    log.error(
                        "event=persist_failed room=%s error=%s", rt.state.room_id, exc
                    )
            for handle in list(rt.handles.values()):
                self._close_handle(rt, handle)
        if self.runner is not None:
            await self.runner.cleanup()

    # --- room plumbing ----------------------------------------------------

    def _world_path(self, world_id: str) -> Path:
        return world_file_path(self.persist_dir, world_id)

    @staticmethod
    def world_of_room(room_id: str) -> str:
        """Room ids are '<world_id>' or '<world_id>:<instance>'."""
        return room_id.split(":", 1)[0]

    def _ensure_room(self, room_id: str) -> RoomRuntime | None:
        rt = self.rooms.get(room_id)
        if rt is not None:
            return rt
        world_id = self.world_of_room(room_id)
        path = self._world_path(world_id)
        if not path.exists():
            return None
        try:
            world = load_world_file(path)
        except InvalidWorld as exc:
            log.error("event=world_invalid world=%s error=%s", world_id, exc)
            return None
        state = load_room_from_disk(world, self.persist_dir, room_id)
        rt = RoomRuntime(state)
        rt.last_persist_ms = now_ms()
        rt.task = asyncio.get_running_loop().create_task(self._run_room(rt))
        self.rooms[room_id] = rt
        return rt

    async def _run_room(self, rt: RoomRuntime) -> None:
        tick_s = self.config.tick_ms / 1000.0
        room_id = rt.state.room_id
        try:
            while not self._stopping:
                started = time.monotonic()
                if rt.inbound:
                    batch = coalesce_batch(list(rt.inbound))
                    rt.inbound.clear()
                    _, plan = room_step(rt.state, batch)
                    self._dispatch(rt, plan)
                tick_now = now_ms()
                _, evictions = heartbeat_sweep(
                    rt.state, tick_now, self.config.heartbeat_timeout_ms
                )
                for eviction in evictions:
                    self._dispatch(rt, eviction.deliveries)
                self._reconcile_handles(rt)
                self._maybe_persist(rt, tick_now)

                if rt.state.sessions or rt.handles or rt.inbound or rt.state.dirty:
                    rt.idle_ticks = 0
                else:
                    rt.idle_ticks += 1
                    if rt.idle_ticks > self.config.idle_unload_ticks:
                        break

                elapsed = time.monotonic() - started
                rt.tick_utilization = (
                    0.9 * rt.tick_utilization + 0.1 * min(1.0, elapsed / tick_s)
                )
                await asyncio.sleep(max(0.0, tick_s - elapsed))
        except Exception:
            log.exception("event=room_task_crashed room=%s", room_id)
        finally:
            # during shutdown the room stays registered so stop() can flush it
            if not self._stopping:
                self.rooms.pop(room_id, None)
                log.info("event=room_unloaded room=%s", room_id)

    def _dispatch(self, rt: RoomRuntime, deliveries) -> None:
        for delivery in deliveries:
            if not delivery.recipients:
                continue
            frame = protocol.encode(delivery.message).decode("utf-8")
            for sid in delivery.recipients:
                handle = rt.handles.get(sid)
                if handle is None or handle.closed:
                    continue
                if not handle.enqueue(frame):
                    log.warning(
                        "event=session_overflow room=%s session=%s queue=%d",
                        rt.state.room_id, sid, self.config.outbound_queue_limit,
                    )
                    self._close_handle(rt, handle)
                session = rt.state.sessions.get(sid)
                if session is not None:
                    session.queue_depth = handle.queue.qsize()

    def _reconcile_handles(self, rt: RoomRuntime) -> None:
        for sid in list(rt.handles):
            if sid not in rt.state.sessions:
                self._close_handle(rt, rt.handles[sid])
                rt.handles.pop(sid, None)

    def _close_handle(self, rt: RoomRuntime, handle: SessionHandle) -> None:
        if handle.closed:
            return
        handle.closed = True
        try:
            handle.queue.put_nowait(None)  # writer sentinel
        except asyncio.QueueFull:
            pass
        asyncio.get_running_loop().create_task(self._finish_close(handle))

    async def _finish_close(self, handle: SessionHandle) -> None:
        if handle.writer_task is not None:
            try:
                await asyncio.wait_for(handle.writer_task, timeout=1.0)
            except (asyncio.TimeoutError, asyncio.CancelledError):
                handle.writer_task.cancel()
        try:
            await handle.ws.close()
        except Exception:
            pass

    def _maybe_persist(self, rt: RoomRuntime, tick_now: float) -> None:
        if not rt.state.dirty or rt.persist_inflight:
            return
        if tick_now - rt.last_persist_ms < self.config.persist_debounce_ms:
            return
        doc = room_snapshot_doc(rt.state)
        path = snapshot_path(self.persist_dir, rt.state.room_id)
        rt.state.dirty = False  # mutations during the write re-mark it
        rt.persist_inflight = True
        rt.last_persist_ms = tick_now

        async def write():
            try:
                await asyncio.to_thread(write_snapshot_doc, path, doc)
                log.info(
                    "event=room_persisted room=%s path=%s entities=%d",
                    rt.state.room_id, path, len(doc["entities"]),
                )
            except OSError as exc:
                rt.state.dirty = True
                log.error(
                    "event=persist_failed room=%s error=%s", rt.state.room_id, exc
                )
            finally:
                rt.persist_inflight = False

        task = asyncio.get_running_loop().create_task(write())
        self._persist_tasks.add(task)
        task.add_done_callback(self._persist_tasks.discard)

    # --- websocket sessions ------------------------------------------------

    async def handle_sync(self, request: web.Request) -> web.WebSocketResponse:
        ws = web.WebSocketResponse()
        await ws.prepare(request)

        async def refuse(message: protocol.WireMessage):
            await ws.send_str(protocol.encode(message).decode("utf-8"))
            await ws.close()
            return ws

        try:
            first = await ws.receive(timeout=self.config.hello_timeout_s)
        except asyncio.TimeoutError:
            await ws.close()
            return ws
        if first.type not in (WSMsgType.TEXT, WSMsgType.BINARY):
            await ws.close()
            return ws
        try:
            hello = protocol.decode(first.data)
        except DecodeError as exc:
            return await refuse(protocol.make_error("?", exc.code, exc.detail))
        if hello.kind != protocol.HELLO:
            return await refuse(
                protocol.make_error(
                    hello.room, SYNTAX_ERROR, f"expected Hello, got {hello.kind}"
                )
            )

        room_id = hello.room
        world_available = self._world_path(self.world_of_room(room_id)).exists()
        rt = self.rooms.get(room_id)
        if rt is None and world_available and self.config.auto_create:
            rt = self._ensure_room(room_id)
        session_id = self.allocator.allocate()
        response = protocol.admit(
            hello,
            room_exists=rt is not None,
            room_population=len(rt.state.sessions) if rt is not None else 0,
            session_id=session_id,
            snapshot_entities=snapshot_entities(rt.state) if rt is not None else None,
            server_version=PROTOCOL_VERSION,
            max_room_size=self.config.max_room_size,
            auto_create=False,  # a loadable world was already ensured above
            tick_ms=self.config.tick_ms,
        )
        if response.kind == protocol.ERROR:
            log.info(
                "event=session_refused room=%s code=%s",
                room_id, response.body.get("code"),
            )
            return await refuse(response)

        assert rt is not None
        session = admit_session(rt.state, session_id, now_ms())
        handle = SessionHandle(
            session_id, ws, room_id, self.config.outbound_queue_limit
        )
        handle.writer_task = asyncio.get_running_loop().create_task(
            self._writer(handle)
        )
        rt.handles[session_id] = handle
        handle.enqueue(protocol.encode(response).decode("utf-8"))
        rt.inbound.append(protocol.make_presence(room_id, session_id, "join"))
        log.info(
            "event=session_admitted room=%s session=%s population=%d",
            room_id, session_id, len(rt.state.sessions),
        )

        try:
            async for msg in ws:
                if msg.type not in (WSMsgType.TEXT, WSMsgType.BINARY):
                    break
                session.last_heartbeat_ms = now_ms()
                try:
                    wire = protocol.decode(msg.data)
                except DecodeError as exc:
                    handle.enqueue(
                        protocol.encode(
                            protocol.make_error(room_id, exc.code, exc.detail)
                        ).decode("utf-8")
                    )
                    continue
                if wire.kind in (protocol.HELLO, protocol.WELCOME):
                    continue  # already admitted; server-only kinds are ignored
                stamped = replace(wire, sender=session_id, room=room_id)
                rt.inbound.append(stamped)
                if wire.kind == protocol.BYE:
                    break
        finally:
            if session_id in rt.state.sessions:
                # transport died without a Bye; let the reducer evict in order
                rt.inbound.append(
                    protocol.WireMessage(
                        kind=protocol.BYE, room=room_id, sender=session_id
                    )
                )
            handle.closed = True
        return ws

    async def _writer(self, handle: SessionHandle) -> None:
        try:
            while True:
                frame = await handle.queue.get()
                if frame is None:
                    break
                await handle.ws.send_str(frame)
        except (ConnectionResetError, RuntimeError):
            handle.closed = True
        except Exception:
            handle.closed = True
            log.exception("event=writer_failed session=%s", handle.session_id)

    # --- http routes --------------------------------------------------------

    async def handle_healthz(self, request: web.Request) -> web.Response:
        detail = {
            room_id: {
                "sessions": len(rt.state.sessions),
                "entities": len(rt.state.entities),
                "tick_utilization": round(rt.tick_utilization, 4),
            }
            for room_id, rt in sorted(self.rooms.items())
        }
        return web.json_response(
            {
                "status": "ok",
                "rooms": len(self.rooms),
                "sessions": sum(d["sessions"] for d in detail.values()),
                "rooms_detail": detail,
            }
        )

    async def handle_world(self, request: web.Request) -> web.Response:
        world_id = request.match_info["world_id"]
        path = self._world_path(world_id)
        if not path.exists():
            return web.Response(status=404, text="")
        try:
            world = load_world_file(path)
            client_src = CLIENT_BUNDLE_ROUTE if self._client_bundle() else None
            doc = emit_world_document(
                world,
                "/sync",
                client_src=client_src,
                allow_http=self.config.dev_plaintext,
            )
        except InvalidWorld as exc:
            log.error("event=world_invalid world=%s error=%s", world_id, exc)
            return web.Response(status=500, text="world unavailable")
        return web.Response(text=doc, content_type="text/html")

    def _client_bundle(self) -> Path | None:
        if not self.config.client_dir:
            return None
        bundle = Path(self.config.client_dir) / "openverse-client.js"
        return bundle if bundle.is_file() else None

    @staticmethod
    def _safe_child(root: Path, rel: str) -> Path | None:
        try:
            target = (root / rel).resolve()
        except (OSError, ValueError):
            return None
        root = root.resolve()
        if root != target and root not in target.parents:
            return None
        return target if target.is_file() else None

    async def handle_asset(self, request: web.Request) -> web.StreamResponse:
        target = self._safe_child(self.persist_dir / "assets", request.match_info["path"])
        if target is None:
            return web.Response(status=404, text="")
        return web.FileResponse(target)

    async def handle_client(self, request: web.Request) -> web.StreamResponse:
        if not self.config.client_dir:
            return web.Response(status=404, text="")
        target = self._safe_child(Path(self.config.client_dir), request.match_info["path"])
        if target is None:
            return web.Response(status=404, text="")
        return web.FileResponse(target)


async def serve_until_stopped(config: ServerConfig, *, ready=None) -> int:
    """Run the service until SIGTERM/SIGINT; returns a process exit code."""
    import signal

    service = SyncService(config)
    try:
        port = await service.start()
    except OSError as exc:
        log.error("event=bind_failed port=%s error=%s", config.port, exc)
        return EXIT_PORT
    url = f"{service.scheme}://{config.host}:{port}"
    print(f"openverse serving url={url} sync={url}/sync", flush=True)
    if ready is not None:
        ready(service)
    stop = asyncio.Event()
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, stop.set)
        except NotImplementedError:
            pass
    try:
        await stop.wait()
    finally:
        await service.stop()
    return EXIT_OK
