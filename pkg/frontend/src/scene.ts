// DOM scene binding: renders remote entities into the page's single scene
// root, provides the enter-immersive affordance, and wires portal links.
//
// The binding degrades gracefully: with the scene framework present it
// builds framework entities, on a bare DOM it still creates structural
// nodes, so the page works (and is testable) without WebGL or XR support.

import type { ComponentData, EntityRecord } from "./apply";
import { TRANSFORM } from "./apply";
import { interpolateTransform } from "./interpolate";
import type { Connection, SceneBinding } from "./state";

export interface WorldConfig {
    world_id: string;
    title: string;
    room: string;
    sync: string;
    protocol: number;
    spawn: ComponentData;
    assets: { asset_id: string; path: string; media_type: string }[];
}

export const CONFIG_ELEMENT_ID = "openverse-config";
export const ENTER_VR_CLASS = "openverse-enter-vr";

export function readWorldConfig(doc: Document): WorldConfig {
    const node = doc.getElementById(CONFIG_ELEMENT_ID);
    if (node === null || node.textContent === null) {
        throw new Error("document carries no embedded world config");
    }
    return JSON.parse(node.textContent) as WorldConfig;
}

function formatVec(data: ComponentData, keys: [string, string, string]): string {
    return keys.map((k) => String(data[k] ?? 0)).join(" ");
}

interface RenderedNode {
    el: Element;
    current: ComponentData | null;
    target: ComponentData | null;
    animStart: number;
    animMs: number;
}

export class DomSceneBinding implements SceneBinding {
    private sceneEl: Element;
    private statusEl: Element | null = null;
    private nodes = new Set<RenderedNode>();
    private rafActive = false;

    constructor(private readonly doc: Document) {
        const scene = doc.querySelector("a-scene");
        if (scene === null) throw new Error("document has no scene root");
        this.sceneEl = scene;
    }

    public addRemoteEntity(entity: EntityRecord): unknown {
        const el = this.doc.createElement("a-entity");
        el.setAttribute("data-remote-entity", entity.id);
        const template = entity.components["template"];
        if (template !== undefined && template.data["name"] === "avatar") {
            el.setAttribute("data-avatar", "true");
            this.buildAvatarRig(el, String(template.data["label"] ?? entity.id));
        }
        this.sceneEl.appendChild(el);
        const node: RenderedNode = { el, current: null, target: null, animStart: 0, animMs: 0 };
        this.nodes.add(node);
        return node;
    }

    // simple primitive rig: body, head, and a name label
    private buildAvatarRig(el: Element, label: string): void {
        const body = this.doc.createElement("a-entity");
        body.setAttribute("geometry", "primitive: cylinder; radius: 0.22; height: 0.9");
        body.setAttribute("position", "0 -0.65 0");
        const head = this.doc.createElement("a-entity");
        head.setAttribute("geometry", "primitive: sphere; radius: 0.18");
        const tag = this.doc.createElement("a-entity");
        tag.setAttribute("text", `value: ${label}; align: center; width: 2`);
        tag.setAttribute("position", "0 0.35 0");
        el.appendChild(body);
        el.appendChild(head);
        el.appendChild(tag);
    }

    public updateComponent(
        handle: unknown,
        _entity: EntityRecord,
        name: string,
        data: ComponentData,
        smoothingMs: number,
    ): void {
        const node = handle as RenderedNode;
        if (name !== TRANSFORM) {
            node.el.setAttribute(
                `data-${name}`,
                Object.entries(data)
                    .map(([k, v]) => `${k}: ${v}`)
                    .join("; "),
            );
            return;
        }
        if (smoothingMs <= 0 || node.current === null || typeof requestAnimationFrame !== "function") {
            this.applyTransformNow(node, data);
            return;
        }
        node.target = data;
        node.animStart = performance.now();
        node.animMs = smoothingMs;
        this.kickAnimation();
    }

    private applyTransformNow(node: RenderedNode, data: ComponentData): void {
        node.current = data;
        node.target = null;
        node.el.setAttribute("position", formatVec(data, ["px", "py", "pz"]));
        node.el.setAttribute("rotation", formatVec(data, ["rx", "ry", "rz"]));
        node.el.setAttribute("scale", formatVec(data, ["sx", "sy", "sz"]));
    }

    private kickAnimation(): void {
        if (this.rafActive) return;
        this.rafActive = true;
        const step = () => {
            let pending = false;
            const now = performance.now();
            for (const node of this.nodes) {
                if (node.target === null || node.current === null) continue;
                const t = node.animMs <= 0 ? 1 : (now - node.animStart) / node.animMs;
                if (t >= 1) {
                    this.applyTransformNow(node, node.target);
                    continue;
                }
                const between = interpolateTransform(node.current, node.target, t);
                node.el.setAttribute("position", formatVec(between, ["px", "py", "pz"]));
                node.el.setAttribute("rotation", formatVec(between, ["rx", "ry", "rz"]));
                node.el.setAttribute("scale", formatVec(between, ["sx", "sy", "sz"]));
                pending = true;
            }
            if (pending) {
                requestAnimationFrame(step);
            } else {
                this.rafActive = false;
            }
        };
        requestAnimationFrame(step);
    }

    public removeRemoteEntity(handle: unknown): void {
        const node = handle as RenderedNode;
        node.el.remove();
        this.nodes.delete(node);
    }

    public setConnection(state: Connection, detail?: string): void {
        if (this.statusEl === null) {
            this.statusEl = this.doc.createElement("div");
            this.statusEl.setAttribute("class", "openverse-status");
            (this.statusEl as HTMLElement).style.cssText =
                "position:fixed;top:8px;left:8px;z-index:10;color:#fff;" +
                "background:rgba(20,24,40,.75);padding:4px 10px;border-radius:4px;" +
                "font:13px sans-serif";
            this.doc.body.appendChild(this.statusEl);
        }
        this.statusEl.textContent = detail ? `${state} (${detail})` : state;
        (this.statusEl as HTMLElement).style.display = state === "live" ? "none" : "block";
    }

    public showTerminal(message: string): void {
        const banner = this.doc.createElement("div");
        banner.setAttribute("class", "openverse-terminal");
        (banner as HTMLElement).style.cssText =
            "position:fixed;top:40%;left:50%;transform:translate(-50%,-50%);z-index:11;" +
            "color:#fff;background:#802;padding:16px 24px;border-radius:6px;" +
            "font:16px sans-serif";
        banner.textContent = message;
        this.doc.body.appendChild(banner);
    }
}

/**
 * Make sure the enter-immersive affordance exists in the lower right corner.
 *
 * The scene framework injects its own button when it runs; without it (bare
 * DOM, or headless tests) a fallback button appears that requests an XR
 * session when the device offers one and toggles full screen otherwise.
 */
export function ensureEnterVrButton(doc: Document): Element {
    const existing = doc.querySelector(`.a-enter-vr, .${ENTER_VR_CLASS}`);
    if (existing !== null) return existing;
    const button = doc.createElement("button");
    button.setAttribute("class", ENTER_VR_CLASS);
    button.textContent = "VR";
    (button as HTMLElement).style.cssText =
        "position:fixed;right:16px;bottom:16px;z-index:10;width:64px;height:40px;" +
        "border:2px solid #fff;border-radius:6px;background:rgba(0,0,0,.55);" +
        "color:#fff;font:bold 15px sans-serif;cursor:pointer";
    button.addEventListener("click", () => enterImmersive(doc));
    doc.body.appendChild(button);
    return button;
}

export function enterImmersive(doc: Document): void {
    const nav = (doc.defaultView?.navigator ?? null) as (Navigator & { xr?: unknown }) | null;
    const xr = nav?.xr as { requestSession?: (mode: string) => Promise<unknown> } | undefined;
    if (xr?.requestSession !== undefined) {
        xr.requestSession("immersive-vr").catch(() => toggleFullscreen(doc));
        return;
    }
    toggleFullscreen(doc);
}

function toggleFullscreen(doc: Document): void {
    if (doc.fullscreenElement !== null && doc.exitFullscreen !== undefined) {
        void doc.exitFullscreen();
    } else if (doc.documentElement.requestFullscreen !== undefined) {
        void doc.documentElement.requestFullscreen();
    }
}

/** Portal activation: replace the world, or open a new window per markup. */
export function bindPortals(doc: Document): void {
    const view = doc.defaultView;
    if (view === null) return;
    for (const portal of Array.from(doc.querySelectorAll("a-entity.portal"))) {
        portal.addEventListener("click", () => {
            const link = portal.getAttribute("link") ?? "";
            const match = /href:\s*(\S+)/.exec(link);
            if (match === null) return;
            const url = match[1];
            if (portal.getAttribute("data-open-mode") === "new_window") {
                view.open(url, "_blank");
            } else {
                view.location.href = url;
            }
        });
    }
}

export interface FpsOverlay {
    el: Element;
    stop(): void;
}

/** Frame-rate readout fed by requestAnimationFrame, toggleable by testers. */
export function startFpsOverlay(doc: Document): FpsOverlay {
    const el = doc.createElement("div");
    el.setAttribute("class", "openverse-fps");
    (el as HTMLElement).style.cssText =
        "position:fixed;top:8px;right:8px;z-index:10;color:#0f0;" +
        "background:rgba(0,0,0,.6);padding:2px 8px;font:12px monospace";
    el.textContent = "-- fps";
    doc.body.appendChild(el);
    let frames = 0;
    let window_start = performance.now();
    let running = true;
    const tick = () => {
        if (!running) return;
        frames += 1;
        const now = performance.now();
        if (now - window_start >= 1000) {
            el.textContent = `${Math.round((frames * 1000) / (now - window_start))} fps`;
            frames = 0;
            window_start = now;
        }
        requestAnimationFrame(tick);
    };
    if (typeof requestAnimationFrame === "function") requestAnimationFrame(tick);
    return {
        el,
        stop() {
            running = false;
            el.remove();
        },
    };
}

export interface BootedScene {
    config: WorldConfig;
    binding: DomSceneBinding;
    enterVr: Element;
}

/** Bring a served world document to life: config, binding, affordances. */
export function boot(doc: Document): BootedScene {
    const config = readWorldConfig(doc);
    const binding = new DomSceneBinding(doc);
    const enterVr = ensureEnterVrButton(doc);
    bindPortals(doc);
    return { config, binding, enterVr };
}
