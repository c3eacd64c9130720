"""Turns a world description into a self-contained spatial web app document.

The emitted page is plain HTML: one scene root, one entity node per static
entity, portal nodes plus an overlay of ordinary anchors, and an embedded
JSON config block the networking client reads to find the sync endpoint.
Emission is deterministic: identical inputs yield byte-identical documents.
"""

from __future__ import annotations

import html

from openverse import PROTOCOL_VERSION
from openverse.world.model import (
    ASSET_REF_PREFIX,
    OPEN_MODE_NEW_WINDOW,
    ROTATION_FIELDS,
    TRANSFORM,
    WorldDescription,
    canonical_json,
    check_world,
)

# Scene framework runtime, loaded from its public CDN. Cached by the browser
# separately from the world payload.
FRAMEWORK_SRC = "https://aframe.io/releases/1.5.0/aframe.min.js"

# Id of the embedded JSON config block consumed by the client bootstrap.
CONFIG_ELEMENT_ID = "openverse-config"


def fmt_scalar(value) -> str:
    """Format one component field the way scene markup spells it.

    Integral floats print without a decimal point so a radius of 1.0 emits
    as ``1`` and a position of -5.0 as ``-5``.
    """
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def display_degrees(deg: float) -> float:
    """Map a stored [0, 360) angle into [-180, 180) for markup emission.

    Scene markup conventionally spells small negative angles as negatives
    (a tilt of -30 rather than 330); both name the same rotation.
    """
    return ((float(deg) + 180.0) % 360.0) - 180.0


def _vec(data: dict, keys) -> str:
    return " ".join(fmt_scalar(data[k]) for k in keys)


def _rotation_vec(data: dict) -> str:
    return " ".join(fmt_scalar(display_degrees(data[k])) for k in ROTATION_FIELDS)


def _attr(name: str, value: str) -> str:
    return f'{name}="{html.escape(value, quote=True)}"'


def _component_attr_value(data: dict, asset_paths: dict) -> str:
    parts = []
    for key, value in data.items():
        if isinstance(value, str) and value.startswith(ASSET_REF_PREFIX):
            path = asset_paths[value[len(ASSET_REF_PREFIX):]]
            value = f"url(/assets/{path})"
        else:
            value = fmt_scalar(value)
        parts.append(f"{key}: {value}")
    return "; ".join(parts)


def _transform_attrs(data: dict) -> list:
    return [
        _attr("position", _vec(data, ("px", "py", "pz"))),
        _attr("rotation", _rotation_vec(data)),
        _attr("scale", _vec(data, ("sx", "sy", "sz"))),
    ]


def emit_world_document(
    world: WorldDescription,
    sync_endpoint: str,
    *,
    client_src: str | None = None,
    allow_http: bool = False,
) -> str:
    """Emit the single HTML document that delivers ``world``.

    ``sync_endpoint`` is embedded verbatim in the config block; pass a
    host-relative path like ``/sync`` to keep the document host-independent.
    ``client_src`` optionally references the replication client bundle.
    Raises InvalidWorld (naming the failing field path) on a bad description.
    """
    check_world(world, allow_http=allow_http)

    asset_paths = {a.asset_id: a.path for a in world.assets}
    config = {
        "world_id": world.world_id,
        "title": world.title,
        "room": world.world_id,
        "sync": sync_endpoint,
        "protocol": PROTOCOL_VERSION,
        "spawn": dict(world.spawn),
        "assets": [
            {"asset_id": a.asset_id, "path": a.path, "media_type": a.media_type}
            for a in world.assets
        ],
    }

    lines = []
    add = lines.append
    add("<!DOCTYPE html>")
    add('<html lang="en">')
    add("<head>")
    add('<meta charset="utf-8">')
    add('<meta name="viewport" content="width=device-width, initial-scale=1">')
    add(f"<title>{html.escape(world.title)}</title>")
    add(f'<script src="{html.escape(FRAMEWORK_SRC, quote=True)}"></script>')
    if client_src:
        add(f'<script src="{html.escape(client_src, quote=True)}" defer></script>')
    add(
        "<style>nav.portals{position:fixed;bottom:8px;left:8px;z-index:9}"
        "nav.portals a{color:#fff;background:#223;padding:4px 8px;margin-right:4px;"
        "border-radius:4px;text-decoration:none;font:14px sans-serif}</style>"
    )
    add("</head>")
    add("<body>")
    add(
        f'<script type="application/json" id="{CONFIG_ELEMENT_ID}">'
        f"{canonical_json(config)}</script>"
    )
    add("<a-scene>")
    for entity in world.static_entities:
        attrs = [_attr("id", entity.entity_id), _attr("data-entity", entity.entity_id)]
        attrs.extend(_transform_attrs(entity.components[TRANSFORM].data))
        for name, component in entity.components.items():
            if name == TRANSFORM:
                continue
            attrs.append(_attr(name, _component_attr_value(component.data, asset_paths)))
        add(f"  <a-entity {' '.join(attrs)}></a-entity>")
    for portal in world.portals:
        attrs = [_attr("id", portal.portal_id), _attr("class", "portal")]
        attrs.extend(_transform_attrs(portal.position))
        attrs.append(_attr("link", f"href: {portal.target_url}"))
        attrs.append(_attr("data-open-mode", portal.open_mode))
        if portal.open_mode == OPEN_MODE_NEW_WINDOW:
            attrs.append(_attr("target", "_blank"))
        add(f"  <a-entity {' '.join(attrs)}></a-entity>")
    add("</a-scene>")
    if world.portals:
        add('<nav class="portals">')
        for portal in world.portals:
            target = ' target="_blank"' if portal.open_mode == OPEN_MODE_NEW_WINDOW else ""
            add(
                f'  <a href="{html.escape(portal.target_url, quote=True)}"{target}>'
                f"{html.escape(portal.portal_id)}</a>"
            )
        add("</nav>")
    add("</body>")
    add("</html>")
    return "\n".join(lines) + "\n"
