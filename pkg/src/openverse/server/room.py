"""Authoritative room state and the per-tick reducer.

A room is mutated only through ``room_step`` (one admitted message batch at a
time), ``heartbeat_sweep``, and the session eviction helpers. Everything is
synchronous and deterministic: equal (state, batch) inputs produce equal
(state, fanout plan) outputs, which is what lets tests replay scripted
sessions against a single-threaded reference reducer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from openverse import protocol
from openverse.errors import InvalidComponent, MISSING_FIELD, SYNTAX_ERROR
from openverse.world.model import (
    AVATAR_TEMPLATE,
    SERVER_OWNER,
    TRANSFORM,
    ComponentState,
    EntityRecord,
    WorldDescription,
    apply_component_update,
    entity_to_dict,
    new_entity,
)

log = logging.getLogger("openverse.room")


@dataclass
class SessionState:
    """Book-keeping for one admitted session; transport handles live elsewhere."""

    session_id: str
    room_id: str
    last_heartbeat_ms: float
    avatar_entity: str | None = None
    queue_depth: int = 0


@dataclass
class RoomState:
    """The authoritative, persistent state of one world room."""

    room_id: str
    world: WorldDescription
    entities: dict = field(default_factory=dict)
    sessions: dict = field(default_factory=dict)
    ownership: dict = field(default_factory=dict)
    dirty: bool = False


@dataclass(frozen=True)
class Delivery:
    """One outbound frame and the sessions that must receive it."""

    message: protocol.WireMessage
    recipients: tuple


@dataclass(frozen=True)
class Eviction:
    session_id: str
    reason: str
    deleted_entities: tuple = ()
    transferred_entities: tuple = ()
    deliveries: tuple = ()


def snapshot_entities(room: RoomState) -> list:
    """Canonical entity dicts for a full room snapshot, sorted by id."""
    return [entity_to_dict(e) for _, e in sorted(room.entities.items())]


def _peers(room: RoomState, *exclude) -> tuple:
    return tuple(s for s in room.sessions if s not in exclude)


def _error_for(exc: InvalidComponent, room_id: str, msg) -> protocol.WireMessage:
    if exc.missing_field is not None:
        return protocol.make_error(
            room_id, MISSING_FIELD, f"body.data.{exc.missing_field}", entity=msg.entity
        )
    return protocol.make_error(room_id, SYNTAX_ERROR, exc.detail, entity=msg.entity)


def coalesce_batch(batch: list) -> list:
    """Keep at most one transform update per entity per tick, highest seq wins.

    Non-transform messages pass through untouched; the winner keeps its
    original batch position so it stays ordered against ownership traffic.
    """
    best = {}
    for i, msg in enumerate(batch):
        if msg.kind == protocol.ENTITY_UPDATE and msg.body.get("component") == TRANSFORM:
            seen = best.get(msg.entity)
            if seen is None or msg.seq > batch[seen].seq:
                best[msg.entity] = i
    out = []
    for i, msg in enumerate(batch):
        if msg.kind == protocol.ENTITY_UPDATE and msg.body.get("component") == TRANSFORM:
            if best.get(msg.entity) != i:
                continue
        out.append(msg)
    return out


def room_step(room: RoomState, inbound: list) -> tuple:
    """Apply one admitted message batch in order; returns (room, fanout plan).

    State updates fan out to every live peer except the originator (echo
    suppression); ownership grants reach everyone including the requester;
    per-message errors address the offender only and never abort the batch.
    """
    plan = []
    for msg in inbound:
        kind = msg.kind
        if kind == protocol.ENTITY_UPDATE:
            _handle_update(room, msg, plan)
        elif kind == protocol.ENTITY_CREATE:
            _handle_create(room, msg, plan)
        elif kind == protocol.ENTITY_DELETE:
            _handle_delete(room, msg, plan)
        elif kind == protocol.OWNERSHIP_REQUEST:
            _handle_ownership(room, msg, plan)
        elif kind == protocol.PING:
            if msg.sender in room.sessions:
                plan.append(Delivery(protocol.make_pong(msg), (msg.sender,)))
        elif kind == protocol.PRESENCE:
            plan.append(Delivery(msg, _peers(room, msg.sender)))
        elif kind == protocol.BYE:
            eviction = evict_session(room, msg.sender, reason="bye")
            if eviction is not None:
                plan.extend(eviction.deliveries)
        # Remaining kinds are server-emitted; clients sending them is a no-op.
    return room, plan


def _handle_create(room: RoomState, msg, plan) -> None:
    sender = msg.sender
    if sender not in room.sessions:
        return
    components = msg.body.get("components")
    if not isinstance(components, dict) or not components:
        plan.append(
            Delivery(
                protocol.make_error(
                    room.room_id, MISSING_FIELD, "body.components", entity=msg.entity
                ),
                (sender,),
            )
        )
        return

    existing = room.entities.get(msg.entity)
    if existing is not None:
        # Re-create of a live entity is an upsert: apply the payload as
        # ordinary component updates so replayed/raced creates converge.
        if existing.owner != sender:
            return
        updated = existing
        try:
            for name, data in components.items():
                updated = apply_component_update(
                    updated, ComponentState(name, data), msg.seq
                )
        except InvalidComponent as exc:
            plan.append(Delivery(_error_for(exc, room.room_id, msg), (sender,)))
            return
        if updated is not existing:
            room.entities[msg.entity] = updated
            room.dirty = True
            plan.append(Delivery(msg, _peers(room, sender)))
        return

    try:
        entity = new_entity(
            msg.entity,
            sender,
            components,
            seq=msg.seq,
            persistent=bool(msg.body.get("persistent", False)),
        )
    except InvalidComponent as exc:
        plan.append(Delivery(_error_for(exc, room.room_id, msg), (sender,)))
        return
    room.entities[msg.entity] = entity
    room.ownership[msg.entity] = protocol.OwnershipRecord(msg.entity, sender, msg.seq)
    room.dirty = True
    template = components.get("template")
    if isinstance(template, dict) and template.get("name") == AVATAR_TEMPLATE:
        room.sessions[sender].avatar_entity = msg.entity
    plan.append(Delivery(msg, _peers(room, sender)))


def _handle_update(room: RoomState, msg, plan) -> None:
    sender = msg.sender
    entity = room.entities.get(msg.entity)
    if entity is None or sender not in room.sessions:
        return  # deleted underneath an in-flight update; drop quietly
    if entity.owner != sender:
        return  # stale writer after an ownership transfer
    name = msg.body.get("component")
    if not isinstance(name, str) or not name:
        plan.append(
            Delivery(
                protocol.make_error(
                    room.room_id, MISSING_FIELD, "body.component", entity=msg.entity
                ),
                (sender,),
            )
        )
        return
    data = msg.body.get("data")
    if not isinstance(data, dict):
        plan.append(
            Delivery(
                protocol.make_error(
                    room.room_id, MISSING_FIELD, "body.data", entity=msg.entity
                ),
                (sender,),
            )
        )
        return
    try:
        updated = apply_component_update(entity, ComponentState(name, data), msg.seq)
    except InvalidComponent as exc:
        plan.append(Delivery(_error_for(exc, room.room_id, msg), (sender,)))
        return
    if updated is entity:
        return  # stale seq: no state change, no fanout
    room.entities[msg.entity] = updated
    room.dirty = True
    plan.append(Delivery(msg, _peers(room, sender)))


def _handle_delete(room: RoomState, msg, plan) -> None:
    sender = msg.sender
    entity = room.entities.get(msg.entity)
    if entity is None or sender not in room.sessions:
        return
    if entity.owner != sender:
        return
    del room.entities[msg.entity]
    room.ownership.pop(msg.entity, None)
    session = room.sessions.get(sender)
    if session is not None and session.avatar_entity == msg.entity:
        session.avatar_entity = None
    room.dirty = True
    plan.append(Delivery(msg, _peers(room, sender)))


def _handle_ownership(room: RoomState, msg, plan) -> None:
    if msg.sender not in room.sessions:
        return
    entity = room.entities.get(msg.entity)
    record = room.ownership.get(msg.entity)
    decision = protocol.resolve_ownership(entity, record, msg)
    if not decision.granted:
        plan.append(Delivery(decision.message, (msg.sender,)))
        return
    if decision.entity is not entity:
        room.entities[msg.entity] = decision.entity
        room.dirty = True
    room.ownership[msg.entity] = decision.record
    plan.append(Delivery(decision.message, _peers(room)))


def _release_session_entities(room: RoomState, session_id: str) -> tuple:
    """Delete the session's non-persistent entities, hand the rest to the server.

    Returns (deleted ids, transferred ids, broadcast messages). Recipients are
    resolved by the caller after the departing session is already gone.
    """
    deleted, transferred, messages = [], [], []
    for entity_id, entity in sorted(room.entities.items()):
        if entity.owner != session_id:
            continue
        if entity.persistent:
            fenced = replace(entity, owner=SERVER_OWNER, seq=entity.seq + 1)
            room.entities[entity_id] = fenced
            room.ownership[entity_id] = protocol.OwnershipRecord(
                entity_id, SERVER_OWNER, entity.seq
            )
            transferred.append(entity_id)
            messages.append(
                protocol.WireMessage(
                    kind=protocol.OWNERSHIP_GRANT,
                    room=room.room_id,
                    sender=SERVER_OWNER,
                    entity=entity_id,
                    seq=fenced.seq,
                    body={"owner": SERVER_OWNER, "granted_seq": entity.seq},
                )
            )
        else:
            del room.entities[entity_id]
            room.ownership.pop(entity_id, None)
            deleted.append(entity_id)
            messages.append(
                protocol.WireMessage(
                    kind=protocol.ENTITY_DELETE,
                    room=room.room_id,
                    sender=SERVER_OWNER,
                    entity=entity_id,
                    seq=entity.seq + 1,
                )
            )
    if deleted or transferred:
        room.dirty = True
    return tuple(deleted), tuple(transferred), messages


def evict_session(room: RoomState, session_id: str, *, reason: str) -> Eviction | None:
    """Remove one session, clean up its entities, and notify the survivors."""
    if session_id not in room.sessions:
        return None
    del room.sessions[session_id]
    deleted, transferred, messages = _release_session_entities(room, session_id)
    messages.append(protocol.make_presence(room.room_id, session_id, "leave"))
    recipients = _peers(room)
    deliveries = tuple(Delivery(m, recipients) for m in messages) if recipients else ()
    log.info(
        "event=session_evicted room=%s session=%s reason=%s deleted=%d transferred=%d",
        room.room_id, session_id, reason, len(deleted), len(transferred),
    )
    return Eviction(session_id, reason, deleted, transferred, deliveries)


def heartbeat_sweep(room: RoomState, now_ms: float, timeout_ms: float) -> tuple:
    """Evict every session whose last heartbeat is older than the timeout.

    All stale sessions leave before any notifications are built, so departing
    ghosts never receive each other's eviction traffic. Returns
    (room, evictions).
    """
    if timeout_ms <= 0:
        raise ValueError("timeout_ms must be > 0")
    stale = [
        s.session_id
        for s in room.sessions.values()
        if now_ms - s.last_heartbeat_ms > timeout_ms
    ]
    for session_id in stale:
        del room.sessions[session_id]
    evictions = []
    for session_id in stale:
        deleted, transferred, messages = _release_session_entities(room, session_id)
        messages.append(protocol.make_presence(room.room_id, session_id, "leave"))
        recipients = _peers(room)
        deliveries = tuple(Delivery(m, recipients) for m in messages) if recipients else ()
        log.info(
            "event=session_evicted room=%s session=%s reason=heartbeat_timeout "
            "deleted=%d transferred=%d",
            room.room_id, session_id, len(deleted), len(transferred),
        )
        evictions.append(
            Eviction(session_id, "heartbeat_timeout", deleted, transferred, deliveries)
        )
    return room, evictions


def admit_session(
    room: RoomState, session_id: str, now_ms: float
) -> SessionState:
    """Register a freshly admitted session with the room."""
    session = SessionState(
        session_id=session_id, room_id=room.room_id, last_heartbeat_ms=now_ms
    )
    room.sessions[session_id] = session
    return session
