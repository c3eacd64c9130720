"""Room snapshots: atomic persistence and restore.

Snapshots live at ``<persist-dir>/rooms/<room_id>.snapshot.json`` and hold
the room's persistent entities in canonical form. Ownership is runtime state,
so durable entities are always recorded as server-owned; sessions never
survive a restart. Corrupt snapshot files are quarantined, never deleted.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from dataclasses import replace
from pathlib import Path

from openverse import protocol
from openverse.server.room import RoomState
from openverse.world.model import (
    SERVER_OWNER,
    WorldDescription,
    canonical_json,
    entity_from_dict,
    entity_to_dict,
)

log = logging.getLogger("openverse.persistence")

SNAPSHOT_FORMAT = 1
SNAPSHOT_SUFFIX = ".snapshot.json"


def snapshot_path(persist_dir, room_id: str) -> Path:
    # Room instance ids use ':' which stays out of file names.
    safe = room_id.replace(":", "__")
    return Path(persist_dir) / "rooms" / f"{safe}{SNAPSHOT_SUFFIX}"


def durable_entity_dict(entity) -> dict:
    """Canonical durable form of a persistent entity (ownership reset to server)."""
    if entity.owner != SERVER_OWNER:
        entity = replace(entity, owner=SERVER_OWNER)
    return entity_to_dict(entity)


def room_snapshot_doc(room: RoomState) -> dict:
    return {
        "format": SNAPSHOT_FORMAT,
        "room_id": room.room_id,
        "world_id": room.world.world_id,
        "entities": [
            durable_entity_dict(e)
            for _, e in sorted(room.entities.items())
            if e.persistent
        ],
    }


def write_snapshot_doc(path, doc: dict) -> Path:
    """Write-temp-then-rename so a crash never leaves a partial snapshot."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(canonical_json(doc))
            f.write("\n")
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def persist_room(room: RoomState, persist_dir) -> Path:
    """Write the room's durable snapshot; clears ``dirty`` on success.

    Raises OSError on storage failure, in which case ``dirty`` is untouched
    so the next persistence pass retries.
    """
    path = write_snapshot_doc(snapshot_path(persist_dir, room.room_id), room_snapshot_doc(room))
    room.dirty = False
    log.info(
        "event=room_persisted room=%s path=%s bytes=%d",
        room.room_id, path, path.stat().st_size,
    )
    return path


def quarantine_snapshot(path) -> Path:
    target = Path(f"{path}.corrupt-{int(time.time() * 1000)}")
    os.replace(path, target)
    log.warning("event=snapshot_quarantined path=%s quarantined=%s", path, target)
    return target


def load_snapshot_file(path) -> dict | None:
    """Parse a snapshot file; quarantines and returns None when corrupt."""
    path = Path(path)
    if not path.exists():
        return None
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
        if not isinstance(doc, dict) or doc.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"unsupported snapshot format: {doc!r:.80}")
        if not isinstance(doc.get("entities"), list):
            raise ValueError("snapshot entities must be a list")
        return doc
    except (json.JSONDecodeError, ValueError, UnicodeDecodeError) as exc:
        log.error("event=snapshot_corrupt path=%s error=%s", path, exc)
        quarantine_snapshot(path)
        return None


def load_room(
    world: WorldDescription, snapshot_doc: dict | None = None, *, room_id: str | None = None
) -> RoomState:
    """Build room state: world static entities overlaid with snapshot entities.

    The snapshot wins on entity-id collision (a moved piece of furniture keeps
    its moved transform). No sessions, not dirty.
    """
    room = RoomState(room_id=room_id or world.world_id, world=world)
    for entity in world.static_entities:
        room.entities[entity.entity_id] = entity
    if snapshot_doc is not None:
        for doc in snapshot_doc.get("entities", []):
            try:
                entity = entity_from_dict(doc)
            except Exception as exc:  # one bad entity does not void the room
                log.error(
                    "event=snapshot_entity_skipped room=%s error=%s", room.room_id, exc
                )
                continue
            if entity.owner != SERVER_OWNER:
                entity = replace(entity, owner=SERVER_OWNER)
            room.entities[entity.entity_id] = entity
    for entity in room.entities.values():
        room.ownership[entity.entity_id] = protocol.OwnershipRecord(
            entity.entity_id, entity.owner, entity.seq
        )
    room.dirty = False
    return room


def load_room_from_disk(world: WorldDescription, persist_dir, room_id: str) -> RoomState:
    doc = load_snapshot_file(snapshot_path(persist_dir, room_id))
    if doc is not None and doc.get("world_id") not in (None, world.world_id):
        log.error(
            "event=snapshot_world_mismatch room=%s snapshot_world=%s",
            room_id, doc.get("world_id"),
        )
        doc = None
    room = load_room(world, doc, room_id=room_id)
    log.info(
        "event=room_loaded room=%s world=%s entities=%d snapshot=%s",
        room_id, world.world_id, len(room.entities), "yes" if doc else "no",
    )
    return room
