// Entity replica and update application.
//
// These semantics are shared with the server: a component update applies iff
// its seq strictly exceeds that component's stored version, rotations
// normalize into [0, 360), transforms must carry the full field set with
// positive scale. tests/vectors/apply_updates.json pins every rule.

import type { Scalar } from "./protocol";

export const TRANSFORM = "transform";
export const TRANSFORM_FIELDS = ["px", "py", "pz", "rx", "ry", "rz", "sx", "sy", "sz"] as const;
export const ROTATION_FIELDS = ["rx", "ry", "rz"] as const;
export const SCALE_FIELDS = ["sx", "sy", "sz"] as const;

export type ComponentData = Record<string, Scalar>;

export interface ComponentState {
    name: string;
    data: ComponentData;
    version: number;
}

export interface EntityRecord {
    id: string;
    owner: string;
    creator: string;
    seq: number;
    persistent: boolean;
    components: Record<string, ComponentState>;
}

export class InvalidComponent extends Error {
    constructor(detail: string, public readonly missingField: string | null = null) {
        super(detail);
    }
}

function isScalar(value: unknown): value is Scalar {
    return (
        typeof value === "string" || typeof value === "number" || typeof value === "boolean"
    );
}

function isNumber(value: unknown): value is number {
    return typeof value === "number";
}

function normalizeDegrees(value: number): number {
    // JS % keeps the dividend's sign; fold into [0, 360)
    return ((value % 360) + 360) % 360;
}

export function validateComponentData(name: string, data: unknown): ComponentData {
    if (typeof name !== "string" || name === "") {
        throw new InvalidComponent("component name must be a non-empty string");
    }
    if (typeof data !== "object" || data === null || Array.isArray(data)) {
        throw new InvalidComponent(`component '${name}' data must be a flat map`);
    }
    const record = data as Record<string, unknown>;
    for (const [key, value] of Object.entries(record)) {
        if (key === "") {
            throw new InvalidComponent(`component '${name}' has an empty field key`);
        }
        if (!isScalar(value)) {
            throw new InvalidComponent(`component '${name}' field '${key}' must be a scalar`);
        }
        if (typeof value === "number" && !Number.isFinite(value)) {
            throw new InvalidComponent(`component '${name}' field '${key}' is not finite`);
        }
    }
    if (name !== TRANSFORM) {
        return { ...(record as ComponentData) };
    }
    for (const field of TRANSFORM_FIELDS) {
        if (!(field in record)) {
            throw new InvalidComponent(`transform missing field '${field}'`, field);
        }
    }
    for (const field of Object.keys(record)) {
        if (!(TRANSFORM_FIELDS as readonly string[]).includes(field)) {
            throw new InvalidComponent(`transform has unknown field '${field}'`);
        }
    }
    for (const field of TRANSFORM_FIELDS) {
        if (!isNumber(record[field])) {
            throw new InvalidComponent(`transform field '${field}' must be a number`);
        }
    }
    for (const field of SCALE_FIELDS) {
        if ((record[field] as number) <= 0) {
            throw new InvalidComponent(`transform field '${field}' must be > 0`);
        }
    }
    const out = { ...(record as ComponentData) };
    for (const field of ROTATION_FIELDS) {
        out[field] = normalizeDegrees(record[field] as number);
    }
    return out;
}

export function applyComponentUpdate(
    entity: EntityRecord,
    name: string,
    data: unknown,
    updateSeq: number,
): EntityRecord {
    const validated = validateComponentData(name, data);
    const current = entity.components[name];
    if (current !== undefined && updateSeq <= current.version) {
        return entity; // stale; dropped
    }
    return {
        ...entity,
        seq: Math.max(entity.seq, updateSeq),
        components: {
            ...entity.components,
            [name]: { name, data: validated, version: updateSeq },
        },
    };
}

export function newEntity(
    id: string,
    owner: string,
    components: Record<string, unknown>,
    seq: number,
    persistent: boolean,
    creator?: string,
): EntityRecord {
    const validated: Record<string, ComponentState> = {};
    for (const [name, data] of Object.entries(components)) {
        validated[name] = { name, data: validateComponentData(name, data), version: seq };
    }
    if (!(TRANSFORM in validated)) {
        throw new InvalidComponent("entity must carry a transform component", TRANSFORM);
    }
    return { id, owner, creator: creator ?? owner, seq, persistent, components: validated };
}

// --- canonical dict form (matches the server's entity encoding) -------------

export interface EntityDict {
    id: string;
    owner: string;
    creator: string;
    seq: number;
    persistent: boolean;
    components: Record<string, { version: number; data: ComponentData }>;
}

export function entityFromDict(doc: EntityDict): EntityRecord {
    const components: Record<string, ComponentState> = {};
    for (const [name, c] of Object.entries(doc.components)) {
        components[name] = { name, data: { ...c.data }, version: c.version };
    }
    return {
        id: doc.id,
        owner: doc.owner,
        creator: doc.creator,
        seq: doc.seq,
        persistent: doc.persistent,
        components,
    };
}

export function entityToDict(entity: EntityRecord): EntityDict {
    const components: EntityDict["components"] = {};
    for (const name of Object.keys(entity.components).sort()) {
        const c = entity.components[name];
        components[name] = { version: c.version, data: { ...c.data } };
    }
    return {
        id: entity.id,
        owner: entity.owner,
        creator: entity.creator,
        seq: entity.seq,
        persistent: entity.persistent,
        components,
    };
}
