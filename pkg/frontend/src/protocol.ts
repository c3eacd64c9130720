// Wire protocol mirror: JSON text frames with fixed top-level fields.
// Must stay field-compatible with the server codec; the shared fixtures in
// tests/vectors/frames.json pin the behavior on both sides.

export const PROTOCOL_VERSION = 1;

export type Scalar = string | number | boolean;

export interface WireMessage {
    kind: string;
    room: string;
    sender: string | null;
    entity: string | null;
    seq: number | null;
    body: Record<string, unknown>;
    ts: number | null;
}

export const KINDS = new Set([
    "Hello", "Welcome", "Snapshot",
    "EntityCreate", "EntityUpdate", "EntityDelete",
    "OwnershipRequest", "OwnershipGrant",
    "Presence", "Ping", "Pong", "Bye", "Error",
]);

export const UPDATE_KINDS = new Set(["EntityCreate", "EntityUpdate", "EntityDelete"]);
export const ENTITY_KINDS = new Set([...UPDATE_KINDS, "OwnershipRequest", "OwnershipGrant"]);

export type DecodeCode = "SyntaxError" | "MissingField" | "UnknownKind";

export class DecodeError extends Error {
    constructor(public readonly code: DecodeCode, public readonly detail: string) {
        super(`${code}: ${detail}`);
    }
}

export function message(fields: Partial<WireMessage> & { kind: string; room: string }): WireMessage {
    return {
        sender: null,
        entity: null,
        seq: null,
        body: {},
        ts: null,
        ...fields,
    };
}

export function encode(msg: WireMessage): string {
    const doc: Record<string, unknown> = { kind: msg.kind, room: msg.room };
    if (msg.sender !== null) doc.sender = msg.sender;
    if (msg.entity !== null) doc.entity = msg.entity;
    if (msg.seq !== null) doc.seq = msg.seq;
    doc.body = msg.body;
    if (msg.ts !== null) doc.ts = msg.ts;
    return JSON.stringify(doc);
}

export function decode(frame: string): WireMessage {
    let doc: unknown;
    try {
        doc = JSON.parse(frame);
    } catch (err) {
        throw new DecodeError("SyntaxError", `frame is not valid JSON: ${err}`);
    }
    if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
        throw new DecodeError("SyntaxError", "frame must be a JSON object");
    }
    const raw = doc as Record<string, unknown>;

    if (!("kind" in raw)) throw new DecodeError("MissingField", "kind");
    const kind = raw.kind;
    if (typeof kind !== "string") throw new DecodeError("SyntaxError", "kind must be a string");
    if (!KINDS.has(kind)) throw new DecodeError("UnknownKind", `unknown kind '${kind}'`);

    if (!("room" in raw)) throw new DecodeError("MissingField", "room");
    const room = raw.room;
    if (typeof room !== "string" || room === "") {
        throw new DecodeError("SyntaxError", "room must be a non-empty string");
    }

    const sender = raw.sender ?? null;
    if (sender !== null && typeof sender !== "string") {
        throw new DecodeError("SyntaxError", "sender must be a string");
    }

    const entity = raw.entity ?? null;
    if (entity === null && ENTITY_KINDS.has(kind)) {
        throw new DecodeError("MissingField", "entity");
    }
    if (entity !== null && (typeof entity !== "string" || entity === "")) {
        throw new DecodeError("SyntaxError", "entity must be a non-empty string");
    }

    const seq = raw.seq ?? null;
    if (seq === null && UPDATE_KINDS.has(kind)) {
        throw new DecodeError("MissingField", "seq");
    }
    if (seq !== null && (typeof seq !== "number" || !Number.isInteger(seq) || seq < 0)) {
        throw new DecodeError("SyntaxError", "seq must be a non-negative integer");
    }

    const body = raw.body ?? {};
    if (typeof body !== "object" || body === null || Array.isArray(body)) {
        throw new DecodeError("SyntaxError", "body must be an object");
    }

    const ts = raw.ts ?? null;
    if (ts !== null && typeof ts !== "number") {
        throw new DecodeError("SyntaxError", "ts must be a number");
    }

    return {
        kind,
        room,
        sender: sender as string | null,
        entity: entity as string | null,
        seq: seq as number | null,
        body: body as Record<string, unknown>,
        ts: ts as number | null,
    };
}
