// Remote transforms are smoothed over one server tick so 20 Hz updates look
// continuous on a 60+ FPS renderer.

import type { ComponentData } from "./apply";

export function lerp(a: number, b: number, t: number): number {
    return a + (b - a) * t;
}

// shortest-arc interpolation between angles in degrees; result in [0, 360)
export function angleLerpDeg(a: number, b: number, t: number): number {
    let delta = (b - a) % 360;
    if (delta > 180) delta -= 360;
    if (delta < -180) delta += 360;
    return (((a + delta * t) % 360) + 360) % 360;
}

export function interpolateTransform(
    from: ComponentData,
    to: ComponentData,
    t: number,
): ComponentData {
    if (t >= 1) return { ...to };
    if (t <= 0) return { ...from };
    const out: ComponentData = { ...to };
    for (const key of ["px", "py", "pz", "sx", "sy", "sz"]) {
        out[key] = lerp(from[key] as number, to[key] as number, t);
    }
    for (const key of ["rx", "ry", "rz"]) {
        out[key] = angleLerpDeg(from[key] as number, to[key] as number, t);
    }
    return out;
}
