// Browser entry point: boot the served world document, connect to the sync
// endpoint named in the embedded config, and drive the local avatar with
// keyboard locomotion. Bundled to dist/openverse-client.js.

import type { ComponentData } from "./apply";
import { SyncSession, TransportLike } from "./net";
import { boot, startFpsOverlay } from "./scene";

function webSocketTransport(url: string): TransportLike {
    const ws = new WebSocket(url);
    const transport: TransportLike = {
        send: (data) => ws.send(data),
        close: () => ws.close(),
        onopen: null,
        onmessage: null,
        onclose: null,
    };
    ws.onopen = () => transport.onopen?.();
    ws.onmessage = (event) => transport.onmessage?.(String(event.data));
    ws.onclose = () => transport.onclose?.();
    return transport;
}

function syncUrl(sync: string): string {
    if (sync.startsWith("ws://") || sync.startsWith("wss://")) return sync;
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    return `${scheme}://${location.host}${sync}`;
}

function startLocomotion(session: SyncSession, spawn: ComponentData): void {
    const pose = { ...spawn };
    const held = new Set<string>();
    const STEP = 0.06; // meters per frame at 60 FPS
    const TURN = 2.0; // degrees per frame
    document.addEventListener("keydown", (e) => held.add(e.key.toLowerCase()));
    document.addEventListener("keyup", (e) => held.delete(e.key.toLowerCase()));
    const step = () => {
        let moved = false;
        const heading = ((pose.ry as number) * Math.PI) / 180;
        if (held.has("w") || held.has("arrowup")) {
            pose.px = (pose.px as number) - Math.sin(heading) * STEP;
            pose.pz = (pose.pz as number) - Math.cos(heading) * STEP;
            moved = true;
        }
        if (held.has("s") || held.has("arrowdown")) {
            pose.px = (pose.px as number) + Math.sin(heading) * STEP;
            pose.pz = (pose.pz as number) + Math.cos(heading) * STEP;
            moved = true;
        }
        if (held.has("a") || held.has("arrowleft")) {
            pose.ry = (((pose.ry as number) + TURN) % 360 + 360) % 360;
            moved = true;
        }
        if (held.has("d") || held.has("arrowright")) {
            pose.ry = (((pose.ry as number) - TURN) % 360 + 360) % 360;
            moved = true;
        }
        if (moved) session.setLocalTransform(pose);
        requestAnimationFrame(step);
    };
    requestAnimationFrame(step);
}

function start(): void {
    const { config, binding } = boot(document);
    const session = new SyncSession({
        url: syncUrl(config.sync),
        room: config.room,
        binding,
        transport: webSocketTransport,
        spawn: config.spawn,
    });
    session.connect();
    startLocomotion(session, config.spawn);

    let fps: ReturnType<typeof startFpsOverlay> | null = null;
    document.addEventListener("keydown", (e) => {
        if (e.key.toLowerCase() !== "f" || e.repeat) return;
        if (fps === null) {
            fps = startFpsOverlay(document);
            session.state.fpsOverlay = true;
        } else {
            fps.stop();
            fps = null;
            session.state.fpsOverlay = false;
        }
    });
}

if (typeof document !== "undefined") {
    if (document.readyState === "loading") {
        document.addEventListener("DOMContentLoaded", start);
    } else {
        start();
    }
}
