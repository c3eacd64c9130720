// Test doubles and fixtures shared by the client test suite.

import type { ComponentData, EntityRecord } from "../src/apply";
import type { TransportLike } from "../src/net";
import type { Connection, SceneBinding } from "../src/state";

export interface HeadlessNode {
    entity: EntityRecord;
    components: Record<string, ComponentData>;
    removed: boolean;
}

/** Records exactly what a renderer would have been told to draw. */
export class HeadlessBinding implements SceneBinding {
    public nodes = new Map<string, HeadlessNode>();
    public connection: Connection = "connecting";
    public connectionDetail: string | undefined;
    public terminal: string | null = null;

    addRemoteEntity(entity: EntityRecord): unknown {
        const node: HeadlessNode = { entity, components: {}, removed: false };
        this.nodes.set(entity.id, node);
        return node;
    }

    updateComponent(
        handle: unknown,
        entity: EntityRecord,
        name: string,
        data: ComponentData,
    ): void {
        const node = handle as HeadlessNode;
        node.entity = entity;
        node.components[name] = { ...data };
    }

    removeRemoteEntity(handle: unknown): void {
        const node = handle as HeadlessNode;
        node.removed = true;
        for (const [id, candidate] of this.nodes) {
            if (candidate === node) this.nodes.delete(id);
        }
    }

    setConnection(state: Connection, detail?: string): void {
        this.connection = state;
        this.connectionDetail = detail;
    }

    showTerminal(message: string): void {
        this.terminal = message;
    }
}

/** In-memory transport pair; the test plays the server side. */
export class FakeTransport implements TransportLike {
    public sent: string[] = [];
    public closed = false;
    public onopen: (() => void) | null = null;
    public onmessage: ((data: string) => void) | null = null;
    public onclose: (() => void) | null = null;

    send(data: string): void {
        if (this.closed) throw new Error("transport closed");
        this.sent.push(data);
    }

    close(): void {
        if (this.closed) return;
        this.closed = true;
        this.onclose?.();
    }

    open(): void {
        this.onopen?.();
    }

    deliver(frame: object): void {
        this.onmessage?.(JSON.stringify(frame));
    }

    sentKinds(): string[] {
        return this.sent.map((f) => (JSON.parse(f) as { kind: string }).kind);
    }

    lastSent(): Record<string, unknown> {
        return JSON.parse(this.sent[this.sent.length - 1]) as Record<string, unknown>;
    }
}

export function transformData(overrides: Partial<Record<string, number>> = {}): ComponentData {
    return {
        px: 0, py: 1.6, pz: 0, rx: 0, ry: 0, rz: 0, sx: 1, sy: 1, sz: 1,
        ...overrides,
    } as ComponentData;
}

export function welcomeFrame(
    session: string,
    room = "hello-world",
    entities: unknown[] = [],
): object {
    return {
        kind: "Welcome",
        room,
        sender: "server",
        body: { session, version: 1, tick_ms: 50, snapshot: { entities } },
    };
}
