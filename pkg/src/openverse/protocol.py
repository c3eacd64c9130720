"""Wire protocol: message grammar, JSON codec, admission, ownership transfer.

Frames are UTF-8 JSON text with the fixed top-level keys ``kind``, ``room``,
``sender``, ``entity``, ``seq``, ``body``, ``ts``. Ordering is carried by the
per-entity ``seq`` counter on update-bearing kinds; ``ts`` is sender wall
clock and is diagnostic only, never used for ordering.

Everything in this module is a pure function over messages and entity values;
the server supplies the stateful parts (session ids, room population,
snapshots) as arguments.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace

from openverse.errors import (
    DecodeError,
    FORBIDDEN,
    MISSING_FIELD,
    NO_SUCH_ENTITY,
    ROOM_FULL,
    ROOM_UNKNOWN,
    SYNTAX_ERROR,
    UNKNOWN_KIND,
    VERSION_MISMATCH,
)
from openverse import PROTOCOL_VERSION
from openverse.world.model import SERVER_OWNER, EntityRecord

# Message kinds, spelled exactly as they travel on the wire.
HELLO = "Hello"
WELCOME = "Welcome"
SNAPSHOT = "Snapshot"
ENTITY_CREATE = "EntityCreate"
ENTITY_UPDATE = "EntityUpdate"
ENTITY_DELETE = "EntityDelete"
OWNERSHIP_REQUEST = "OwnershipRequest"
OWNERSHIP_GRANT = "OwnershipGrant"
PRESENCE = "Presence"
PING = "Ping"
PONG = "Pong"
BYE = "Bye"
ERROR = "Error"

KINDS = frozenset(
    {
        HELLO,
        WELCOME,
        SNAPSHOT,
        ENTITY_CREATE,
        ENTITY_UPDATE,
        ENTITY_DELETE,
        OWNERSHIP_REQUEST,
        OWNERSHIP_GRANT,
        PRESENCE,
        PING,
        PONG,
        BYE,
        ERROR,
    }
)

# Kinds that carry an entity id and a per-entity seq counter.
UPDATE_KINDS = frozenset({ENTITY_CREATE, ENTITY_UPDATE, ENTITY_DELETE})

# Kinds that name an entity but carry no client seq.
ENTITY_KINDS = UPDATE_KINDS | frozenset({OWNERSHIP_REQUEST, OWNERSHIP_GRANT})


@dataclass(frozen=True)
class WireMessage:
    """One protocol frame. ``body`` holds the kind-specific payload."""

    kind: str
    room: str
    sender: str | None = None
    entity: str | None = None
    seq: int | None = None
    body: dict = field(default_factory=dict)
    ts: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "body", dict(self.body))


def encode(msg: WireMessage) -> bytes:
    """Encode one message as a UTF-8 text frame; decode(encode(m)) == m."""
    doc = {"kind": msg.kind, "room": msg.room}
    if msg.sender is not None:
        doc["sender"] = msg.sender
    if msg.entity is not None:
        doc["entity"] = msg.entity
    if msg.seq is not None:
        doc["seq"] = msg.seq
    doc["body"] = msg.body
    if msg.ts is not None:
        doc["ts"] = msg.ts
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def decode(frame) -> WireMessage:
    """Decode one frame (bytes or str) into a WireMessage.

    Unknown body fields are preserved verbatim for forward compatibility.
    Raises DecodeError naming the first offending field: SyntaxError for
    malformed JSON or wrong types, MissingField(path) for absent required
    fields, UnknownKind for kinds outside the grammar.
    """
    if isinstance(frame, (bytes, bytearray)):
        try:
            frame = frame.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(SYNTAX_ERROR, f"frame is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(frame)
    except json.JSONDecodeError as exc:
        raise DecodeError(SYNTAX_ERROR, f"frame is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DecodeError(SYNTAX_ERROR, "frame must be a JSON object")

    if "kind" not in doc:
        raise DecodeError(MISSING_FIELD, "kind")
    kind = doc["kind"]
    if not isinstance(kind, str):
        raise DecodeError(SYNTAX_ERROR, "kind must be a string")
    if kind not in KINDS:
        raise DecodeError(UNKNOWN_KIND, f"unknown kind {kind!r}")

    if "room" not in doc:
        raise DecodeError(MISSING_FIELD, "room")
    room = doc["room"]
    if not isinstance(room, str) or not room:
        raise DecodeError(SYNTAX_ERROR, "room must be a non-empty string")

    sender = doc.get("sender")
    if sender is not None and not isinstance(sender, str):
        raise DecodeError(SYNTAX_ERROR, "sender must be a string")

    entity = doc.get("entity")
    if entity is None and kind in ENTITY_KINDS:
        raise DecodeError(MISSING_FIELD, "entity")
    if entity is not None and (not isinstance(entity, str) or not entity):
        raise DecodeError(SYNTAX_ERROR, "entity must be a non-empty string")

    seq = doc.get("seq")
    if seq is None and kind in UPDATE_KINDS:
        raise DecodeError(MISSING_FIELD, "seq")
    if seq is not None:
        if isinstance(seq, bool) or not isinstance(seq, int) or seq < 0:
            raise DecodeError(SYNTAX_ERROR, "seq must be a non-negative integer")

    body = doc.get("body", {})
    if not isinstance(body, dict):
        raise DecodeError(SYNTAX_ERROR, "body must be an object")

    ts = doc.get("ts")
    if ts is not None and (isinstance(ts, bool) or not isinstance(ts, (int, float))):
        raise DecodeError(SYNTAX_ERROR, "ts must be a number")

    return WireMessage(
        kind=kind, room=room, sender=sender, entity=entity, seq=seq, body=body, ts=ts
    )


# --- frame constructors -------------------------------------------------------

def make_error(
    room: str, code: str, detail: str, *, entity: str | None = None
) -> WireMessage:
    return WireMessage(
        kind=ERROR,
        room=room,
        sender=SERVER_OWNER,
        entity=entity,
        body={"code": code, "detail": detail},
    )


def make_presence(room: str, session_id: str, event: str) -> WireMessage:
    return WireMessage(
        kind=PRESENCE,
        room=room,
        sender=session_id,
        body={"event": event, "session": session_id},
    )


def make_pong(ping: WireMessage) -> WireMessage:
    return WireMessage(
        kind=PONG, room=ping.room, sender=SERVER_OWNER, body=dict(ping.body), ts=ping.ts
    )


class SessionIdAllocator:
    """Hands out session ids; an id is never reused within one process lifetime."""

    def __init__(self, prefix: str = "s"):
        self._prefix = prefix
        self._counter = itertools.count(1)

    def allocate(self) -> str:
        return f"{self._prefix}{next(self._counter)}"


def admit(
    hello: WireMessage,
    room_exists: bool,
    room_population: int,
    *,
    session_id: str,
    snapshot_entities: list | None = None,
    server_version: int = PROTOCOL_VERSION,
    max_room_size: int = 20,
    auto_create: bool = True,
    tick_ms: int = 50,
) -> WireMessage:
    """Decide one join request.

    Returns a Welcome carrying the fresh session id, the protocol version,
    and a full room snapshot, or an Error frame with the refusal code. The
    caller supplies the session id and snapshot since those are server state.
    """
    if hello.kind != HELLO:
        raise ValueError(f"admit expects a Hello, got {hello.kind}")
    room = hello.room
    client_version = hello.body.get("version")
    if client_version != server_version:
        return make_error(
            room,
            VERSION_MISMATCH,
            f"client protocol {client_version!r}, server speaks {server_version}",
        )
    if not room_exists and not auto_create:
        return make_error(room, ROOM_UNKNOWN, f"no such room {room!r}")
    if room_population >= max_room_size:
        return make_error(
            room, ROOM_FULL, f"room holds {room_population} of {max_room_size} sessions"
        )
    return WireMessage(
        kind=WELCOME,
        room=room,
        sender=SERVER_OWNER,
        body={
            "session": session_id,
            "version": server_version,
            "tick_ms": tick_ms,
            "snapshot": {"entities": list(snapshot_entities or [])},
        },
    )


# --- ownership ----------------------------------------------------------------

@dataclass(frozen=True)
class OwnershipRecord:
    """Who may author updates for an entity, and the seq at grant time."""

    entity_id: str
    owner: str
    granted_seq: int


@dataclass(frozen=True)
class OwnershipDecision:
    """Outcome of one ownership request: a frame plus any state changes."""

    message: WireMessage
    entity: EntityRecord | None = None
    record: OwnershipRecord | None = None
    granted: bool = False


def resolve_ownership(
    entity: EntityRecord | None,
    record: OwnershipRecord | None,
    request: WireMessage,
) -> OwnershipDecision:
    """Grant-on-request ownership transfer.

    The requester becomes owner and ``granted_seq`` records the entity seq at
    grant time. The entity seq is then re-stamped to ``granted_seq + 1``,
    fencing off in-flight updates from the previous owner (their seq is at
    most ``granted_seq``, so they drop as stale); the grant broadcast tells
    the new owner the floor to continue from. Static world furniture
    (creator ``server``) is non-transferable.
    """
    room = request.room
    requester = request.sender
    entity_id = request.entity
    if requester is None:
        raise ValueError("ownership request carries no sender")
    if entity is None:
        return OwnershipDecision(
            make_error(room, NO_SUCH_ENTITY, f"no entity {entity_id!r}", entity=entity_id)
        )
    if entity.creator == SERVER_OWNER:
        return OwnershipDecision(
            make_error(
                room, FORBIDDEN, f"entity {entity_id!r} is not transferable", entity=entity_id
            )
        )
    if entity.owner == requester:
        granted_seq = record.granted_seq if record else entity.seq
        grant = WireMessage(
            kind=OWNERSHIP_GRANT,
            room=room,
            sender=SERVER_OWNER,
            entity=entity_id,
            seq=entity.seq,
            body={"owner": requester, "granted_seq": granted_seq},
        )
        rec = record or OwnershipRecord(entity_id, requester, granted_seq)
        return OwnershipDecision(grant, entity=entity, record=rec, granted=True)

    granted_seq = entity.seq
    fenced = replace(entity, owner=requester, seq=granted_seq + 1)
    rec = OwnershipRecord(entity_id, requester, granted_seq)
    grant = WireMessage(
        kind=OWNERSHIP_GRANT,
        room=room,
        sender=SERVER_OWNER,
        entity=entity_id,
        seq=fenced.seq,
        body={"owner": requester, "granted_seq": granted_seq},
    )
    return OwnershipDecision(grant, entity=fenced, record=rec, granted=True)
