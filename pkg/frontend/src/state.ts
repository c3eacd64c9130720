// Client-side scene state and the binding surface the renderer implements.

import type { ComponentData, EntityRecord } from "./apply";

export type Connection = "connecting" | "live" | "reconnecting" | "closed";

export interface SceneBinding {
    /** Create a rendered node for a remote entity; returns an opaque handle. */
    addRemoteEntity(entity: EntityRecord): unknown;
    /** Push one applied component state into the rendered node. */
    updateComponent(
        handle: unknown,
        entity: EntityRecord,
        name: string,
        data: ComponentData,
        smoothingMs: number,
    ): void;
    removeRemoteEntity(handle: unknown): void;
    setConnection(state: Connection, detail?: string): void;
    /** Fatal banner: shown once, the session will not retry. */
    showTerminal(message: string): void;
}

export class ClientSceneState {
    public mySession: string | null = null;
    public myAvatar: string | null = null;
    public remoteEntities = new Map<string, unknown>();
    public connection: Connection = "connecting";
    public fpsOverlay = false;
}
