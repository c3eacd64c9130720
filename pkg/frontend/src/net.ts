// Replication session: join a room, apply the welcome snapshot, stream the
// local avatar transform, and mirror peer state through the scene binding.
//
// Apply rules are identical to the server's (see apply.ts): updates gate on
// per-component versions, only the owner's updates apply, deletes always win,
// grants re-stamp owner and seq. Disconnects retry with exponential backoff;
// a protocol version mismatch is terminal.

import {
    applyComponentUpdate,
    newEntity,
    ComponentData,
    EntityRecord,
    InvalidComponent,
    TRANSFORM,
} from "./apply";
import { PROTOCOL_VERSION, WireMessage, decode, encode, message } from "./protocol";
import { ClientSceneState, SceneBinding } from "./state";

export interface TransportLike {
    send(data: string): void;
    close(): void;
    onopen: (() => void) | null;
    onmessage: ((data: string) => void) | null;
    onclose: (() => void) | null;
}

export type TransportFactory = (url: string) => TransportLike;

export interface SyncOptions {
    url: string;
    room: string;
    binding: SceneBinding;
    transport: TransportFactory;
    spawn?: ComponentData;
    updateRateHz?: number;
    reconnect?: boolean;
    backoffBaseMs?: number;
    backoffMaxMs?: number;
    pingIntervalMs?: number;
}

const DEFAULT_SPAWN: ComponentData = {
    px: 0, py: 1.6, pz: 0, rx: 0, ry: 0, rz: 0, sx: 1, sy: 1, sz: 1,
};

export class SyncSession {
    public readonly state = new ClientSceneState();
    public readonly entities = new Map<string, EntityRecord>();
    public tickMs = 50;

    private transport: TransportLike | null = null;
    private terminal = false;
    private closedByUser = false;
    private attempts = 0;
    private avatarSeq = 0;
    private pendingTransform: ComponentData | null = null;
    private updateTimer: ReturnType<typeof setInterval> | null = null;
    private pingTimer: ReturnType<typeof setInterval> | null = null;
    private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

    constructor(private readonly options: SyncOptions) {}

    public connect(): void {
        if (this.terminal || this.closedByUser) return;
        this.setConnection(this.attempts === 0 ? "connecting" : "reconnecting");
        const transport = this.options.transport(this.options.url);
        this.transport = transport;
        transport.onopen = () => {
            transport.send(
                encode(
                    message({
                        kind: "Hello",
                        room: this.options.room,
                        body: { version: PROTOCOL_VERSION },
                    }),
                ),
            );
        };
        transport.onmessage = (data) => this.handleFrame(data);
        transport.onclose = () => this.handleClose();
    }

    public close(): void {
        this.closedByUser = true;
        this.stopLoops();
        if (this.transport !== null) {
            try {
                this.transport.send(encode(message({ kind: "Bye", room: this.options.room })));
            } catch {
                // transport already gone
            }
            this.transport.close();
            this.transport = null;
        }
        this.setConnection("closed");
    }

    /** Retry after a RoomFull refusal (terminal errors never retry). */
    public retry(): void {
        if (this.terminal || this.state.connection !== "closed") return;
        this.closedByUser = false;
        this.connect();
    }

    /** Feed the local avatar pose; it streams at the configured rate. */
    public setLocalTransform(data: ComponentData): void {
        this.pendingTransform = { ...data };
    }

    private setConnection(connection: ClientSceneState["connection"], detail?: string): void {
        this.state.connection = connection;
        this.options.binding.setConnection(connection, detail);
    }

    private handleFrame(data: string): void {
        let msg: WireMessage;
        try {
            msg = decode(data);
        } catch {
            return; // an undecodable server frame is dropped, not fatal
        }
        switch (msg.kind) {
            case "Welcome":
                this.handleWelcome(msg);
                break;
            case "Error":
                this.handleError(msg);
                break;
            case "EntityCreate":
                this.handleCreate(msg);
                break;
            case "EntityUpdate":
                this.handleUpdate(msg);
                break;
            case "EntityDelete":
                this.handleDelete(msg);
                break;
            case "OwnershipGrant":
                this.handleGrant(msg);
                break;
            default:
                break; // Presence/Pong/Snapshot are informational here
        }
    }

    private handleWelcome(msg: WireMessage): void {
        const body = msg.body as {
            session: string;
            tick_ms?: number;
            snapshot?: { entities?: unknown[] };
        };
        this.attempts = 0;
        this.state.mySession = body.session;
        if (typeof body.tick_ms === "number") this.tickMs = body.tick_ms;

        // a fresh session means fresh authoritative state
        for (const handle of this.state.remoteEntities.values()) {
            this.options.binding.removeRemoteEntity(handle);
        }
        this.state.remoteEntities.clear();
        this.entities.clear();
        for (const doc of body.snapshot?.entities ?? []) {
            this.addFromSnapshot(doc as never);
        }
        this.spawnAvatar();
        this.startLoops();
        this.setConnection("live");
    }

    private addFromSnapshot(doc: {
        id: string;
        owner: string;
        creator: string;
        seq: number;
        persistent: boolean;
        components: Record<string, { version: number; data: ComponentData }>;
    }): void {
        const components: Record<string, ComponentData> = {};
        for (const [name, c] of Object.entries(doc.components)) components[name] = c.data;
        let entity: EntityRecord;
        try {
            entity = newEntity(doc.id, doc.owner, components, doc.seq, doc.persistent, doc.creator);
        } catch {
            return;
        }
        for (const [name, c] of Object.entries(doc.components)) {
            entity.components[name].version = c.version;
        }
        this.entities.set(doc.id, entity);
        this.renderNew(entity);
    }

    private renderNew(entity: EntityRecord): void {
        const handle = this.options.binding.addRemoteEntity(entity);
        this.state.remoteEntities.set(entity.id, handle);
        for (const component of Object.values(entity.components)) {
            this.options.binding.updateComponent(
                handle, entity, component.name, component.data, 0,
            );
        }
    }

    private spawnAvatar(): void {
        if (this.state.mySession === null || this.transport === null) return;
        const avatarId = `av-${this.state.mySession}`;
        this.state.myAvatar = avatarId;
        this.avatarSeq = 1;
        const spawn = { ...(this.options.spawn ?? DEFAULT_SPAWN) };
        const components = {
            transform: spawn,
            template: { name: "avatar" },
        };
        this.entities.set(
            avatarId,
            newEntity(avatarId, this.state.mySession, components, 1, false),
        );
        this.transport.send(
            encode(
                message({
                    kind: "EntityCreate",
                    room: this.options.room,
                    entity: avatarId,
                    seq: 1,
                    body: { components, persistent: false },
                }),
            ),
        );
        this.pendingTransform = null;
    }

    private handleError(msg: WireMessage): void {
        const code = msg.body.code;
        if (code === "VersionMismatch") {
            this.terminal = true;
            this.stopLoops();
            this.options.binding.showTerminal(
                `protocol version mismatch: ${String(msg.body.detail ?? "")}`,
            );
            this.transport?.close();
            this.setConnection("closed", "version mismatch");
        } else if (code === "RoomFull" || code === "RoomUnknown") {
            this.stopLoops();
            this.transport?.close();
            this.transport = null;
            this.closedByUser = true; // wait for an explicit retry()
            this.setConnection("closed", `${code}: ${String(msg.body.detail ?? "")}`);
        }
        // per-message errors (stale component payloads etc.) are non-fatal
    }

    private handleCreate(msg: WireMessage): void {
        if (msg.entity === null || msg.sender === null || msg.seq === null) return;
        const body = msg.body as { components?: Record<string, unknown>; persistent?: boolean };
        const components = body.components ?? {};
        const existing = this.entities.get(msg.entity);
        if (existing === undefined) {
            let entity: EntityRecord;
            try {
                entity = newEntity(
                    msg.entity, msg.sender, components, msg.seq, Boolean(body.persistent),
                );
            } catch {
                return;
            }
            this.entities.set(msg.entity, entity);
            this.renderNew(entity);
            return;
        }
        if (existing.owner !== msg.sender) return;
        let updated = existing;
        try {
            for (const [name, data] of Object.entries(components)) {
                updated = applyComponentUpdate(updated, name, data, msg.seq);
            }
        } catch (err) {
            if (err instanceof InvalidComponent) return;
            throw err;
        }
        if (updated === existing) return;
        this.entities.set(msg.entity, updated);
        this.pushChanged(existing, updated);
    }

    private handleUpdate(msg: WireMessage): void {
        if (msg.entity === null || msg.sender === null || msg.seq === null) return;
        const entity = this.entities.get(msg.entity);
        if (entity === undefined || entity.owner !== msg.sender) {
            return; // unknown entity or a stale writer after an ownership change
        }
        const body = msg.body as { component?: string; data?: unknown };
        if (typeof body.component !== "string" || body.component === "") return;
        let updated: EntityRecord;
        try {
            updated = applyComponentUpdate(entity, body.component, body.data, msg.seq);
        } catch (err) {
            if (err instanceof InvalidComponent) return;
            throw err;
        }
        if (updated === entity) return; // stale seq: never rendered
        this.entities.set(msg.entity, updated);
        this.pushChanged(entity, updated);
    }

    private pushChanged(before: EntityRecord, after: EntityRecord): void {
        const handle = this.state.remoteEntities.get(after.id);
        if (handle === undefined) return; // own avatar has no remote node
        for (const [name, component] of Object.entries(after.components)) {
            if (before.components[name] !== component) {
                this.options.binding.updateComponent(
                    handle,
                    after,
                    name,
                    component.data,
                    name === TRANSFORM ? this.tickMs : 0,
                );
            }
        }
    }

    private handleDelete(msg: WireMessage): void {
        if (msg.entity === null) return;
        this.entities.delete(msg.entity);
        const handle = this.state.remoteEntities.get(msg.entity);
        if (handle !== undefined) {
            this.options.binding.removeRemoteEntity(handle);
            this.state.remoteEntities.delete(msg.entity);
        }
    }

    private handleGrant(msg: WireMessage): void {
        if (msg.entity === null || msg.seq === null) return;
        const entity = this.entities.get(msg.entity);
        if (entity === undefined) return;
        const owner = msg.body.owner;
        if (typeof owner !== "string") return;
        this.entities.set(msg.entity, { ...entity, owner, seq: msg.seq });
    }

    private startLoops(): void {
        this.stopLoops();
        const rate = this.options.updateRateHz ?? 10;
        this.updateTimer = setInterval(() => this.flushTransform(), 1000 / rate);
        this.pingTimer = setInterval(
            () => this.sendRaw(message({ kind: "Ping", room: this.options.room, ts: Date.now() })),
            this.options.pingIntervalMs ?? 10_000,
        );
    }

    private stopLoops(): void {
        if (this.updateTimer !== null) clearInterval(this.updateTimer);
        if (this.pingTimer !== null) clearInterval(this.pingTimer);
        if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
        this.updateTimer = this.pingTimer = null;
        this.reconnectTimer = null;
    }

    private flushTransform(): void {
        if (this.pendingTransform === null || this.state.myAvatar === null) return;
        const avatar = this.entities.get(this.state.myAvatar);
        if (avatar === undefined) return;
        const data = this.pendingTransform;
        this.pendingTransform = null;
        this.avatarSeq += 1;
        let applied: EntityRecord;
        try {
            applied = applyComponentUpdate(avatar, TRANSFORM, data, this.avatarSeq);
        } catch {
            return; // locally produced transform should never be malformed
        }
        this.entities.set(avatar.id, applied);
        this.sendRaw(
            message({
                kind: "EntityUpdate",
                room: this.options.room,
                entity: avatar.id,
                seq: this.avatarSeq,
                body: { component: TRANSFORM, data },
            }),
        );
    }

    private sendRaw(msg: WireMessage): void {
        if (this.transport === null) return;
        try {
            this.transport.send(encode(msg));
        } catch {
            // the close handler owns recovery
        }
    }

    private handleClose(): void {
        this.stopLoops();
        this.transport = null;
        if (this.terminal || this.closedByUser) return;
        if (this.options.reconnect === false) {
            this.setConnection("closed");
            return;
        }
        const base = this.options.backoffBaseMs ?? 500;
        const cap = this.options.backoffMaxMs ?? 8_000;
        const delay = Math.min(base * 2 ** this.attempts, cap);
        this.attempts += 1;
        this.setConnection("reconnecting", `retry in ${delay} ms`);
        this.reconnectTimer = setTimeout(() => this.connect(), delay);
    }
}
