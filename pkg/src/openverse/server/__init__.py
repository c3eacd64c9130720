"""Authoritative room service: reducer, persistence, transport."""

from openverse.server.room import (
    Delivery,
    Eviction,
    RoomState,
    SessionState,
    admit_session,
    coalesce_batch,
    evict_session,
    heartbeat_sweep,
    room_step,
    snapshot_entities,
)
from openverse.server.persistence import (
    load_room,
    load_room_from_disk,
    persist_room,
    room_snapshot_doc,
    snapshot_path,
)
from openverse.server.service import (
    EXIT_OK,
    EXIT_PERSIST,
    EXIT_PORT,
    EXIT_TLS,
    ServerConfig,
    SyncService,
    preflight,
    serve_until_stopped,
)

__all__ = [
    "Delivery",
    "Eviction",
    "RoomState",
    "SessionState",
    "admit_session",
    "coalesce_batch",
    "evict_session",
    "heartbeat_sweep",
    "room_step",
    "snapshot_entities",
    "load_room",
    "load_room_from_disk",
    "persist_room",
    "room_snapshot_doc",
    "snapshot_path",
    "EXIT_OK",
    "EXIT_PERSIST",
    "EXIT_PORT",
    "EXIT_TLS",
    "ServerConfig",
    "SyncService",
    "preflight",
    "serve_until_stopped",
]
