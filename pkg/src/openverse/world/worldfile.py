"""World description files.

One UTF-8 JSON document per world, stored at
``<persist-dir>/worlds/<world_id>.world.json`` with top-level keys
``world_id``, ``title``, ``spawn``, ``entities``, ``portals``, ``assets``,
``regions``. Numbers are IEEE-754 doubles. Also home of the canonical
hello-world demo description and its generated texture.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from pathlib import Path

from openverse.errors import InvalidComponent, InvalidWorld
from openverse.world.model import (
    SERVER_OWNER,
    Asset,
    EntityRecord,
    Portal,
    RegionCoord,
    Violation,
    WorldDescription,
    new_entity,
    validate_component_data,
)

WORLD_FILE_SUFFIX = ".world.json"

HELLO_WORLD_ID = "hello-world"
HELLO_TEXTURE_PATH = "hello-world/texture.png"


def world_file_path(persist_dir, world_id: str) -> Path:
    return Path(persist_dir) / "worlds" / f"{world_id}{WORLD_FILE_SUFFIX}"


def world_to_dict(world: WorldDescription) -> dict:
    return {
        "world_id": world.world_id,
        "title": world.title,
        "spawn": dict(world.spawn),
        "entities": [
            {
                "entity_id": e.entity_id,
                "persistent": e.persistent,
                "components": {n: dict(c.data) for n, c in e.components.items()},
            }
            for e in world.static_entities
        ],
        "portals": [
            {
                "portal_id": p.portal_id,
                "position": dict(p.position),
                "target_url": p.target_url,
                "open_mode": p.open_mode,
            }
            for p in world.portals
        ],
        "assets": [
            {"asset_id": a.asset_id, "path": a.path, "media_type": a.media_type}
            for a in world.assets
        ],
        "regions": [
            {"rx": r.rx, "rz": r.rz, "side": r.side} for r in world.bounds_regions
        ],
    }


def world_from_dict(doc: dict) -> WorldDescription:
    """Build a WorldDescription from parsed JSON; raises InvalidWorld on bad structure."""
    if not isinstance(doc, dict):
        raise InvalidWorld([Violation("$", "world document must be an object")])
    problems = []
    for key in ("world_id", "title", "spawn"):
        if key not in doc:
            problems.append(Violation(key, "required key missing"))
    if problems:
        raise InvalidWorld(problems)

    try:
        spawn = validate_component_data("transform", doc["spawn"])
    except InvalidComponent as exc:
        raise InvalidWorld([Violation("spawn", str(exc))]) from exc

    entities = []
    for i, e in enumerate(doc.get("entities", [])):
        try:
            entities.append(
                new_entity(
                    str(e["entity_id"]),
                    SERVER_OWNER,
                    e.get("components", {}),
                    persistent=bool(e.get("persistent", True)),
                )
            )
        except (KeyError, TypeError, InvalidComponent) as exc:
            raise InvalidWorld([Violation(f"entities[{i}]", str(exc))]) from exc

    portals = []
    for i, p in enumerate(doc.get("portals", [])):
        try:
            portals.append(
                Portal(
                    portal_id=str(p["portal_id"]),
                    position=validate_component_data("transform", p["position"]),
                    target_url=str(p["target_url"]),
                    open_mode=str(p.get("open_mode", "replace")),
                )
            )
        except (KeyError, TypeError, InvalidComponent) as exc:
            raise InvalidWorld([Violation(f"portals[{i}]", str(exc))]) from exc

    assets = []
    for i, a in enumerate(doc.get("assets", [])):
        try:
            assets.append(
                Asset(str(a["asset_id"]), str(a["path"]), str(a["media_type"]))
            )
        except (KeyError, TypeError) as exc:
            raise InvalidWorld([Violation(f"assets[{i}]", str(exc))]) from exc

    regions = []
    for i, r in enumerate(doc.get("regions", [])):
        try:
            regions.append(RegionCoord(int(r["rx"]), int(r["rz"]), int(r.get("side", 256))))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidWorld([Violation(f"regions[{i}]", str(exc))]) from exc

    return WorldDescription(
        world_id=str(doc["world_id"]),
        title=str(doc["title"]),
        spawn=spawn,
        static_entities=tuple(entities),
        portals=tuple(portals),
        assets=tuple(assets),
        bounds_regions=tuple(regions),
    )


def load_world_file(path) -> WorldDescription:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidWorld([Violation(str(path), f"unreadable world file: {exc}")]) from exc
    return world_from_dict(doc)


def save_world_file(path, world: WorldDescription) -> None:
    """Atomic write (temp file then rename) of the world document.

    Pretty-printed without key sorting: world files are hand-editable and
    component field order carries through to the emitted scene markup.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(world_to_dict(world), f, indent=2, ensure_ascii=False)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


# --- canonical demo world ----------------------------------------------------

def hello_world() -> WorldDescription:
    """The canonical demo: one textured sphere spinning on a 10 s linear loop."""
    sphere = new_entity(
        "hello-sphere",
        SERVER_OWNER,
        {
            "transform": {
                "px": 0, "py": 1.5, "pz": -5,
                "rx": 0, "ry": 0, "rz": -30,
                "sx": 1, "sy": 1, "sz": 1,
            },
            "geometry": {"primitive": "sphere", "radius": 1},
            "material": {"src": "asset:hello-texture"},
            "animation": {
                "property": "rotation",
                "to": "0 360 -30",
                "loop": True,
                "dur": 10000,
                "easing": "linear",
            },
        },
        persistent=True,
    )
    return WorldDescription(
        world_id=HELLO_WORLD_ID,
        title="Hello World",
        spawn=validate_component_data(
            "transform",
            {
                "px": 0, "py": 1.6, "pz": 0,
                "rx": 0, "ry": 0, "rz": 0,
                "sx": 1, "sy": 1, "sz": 1,
            },
        ),
        static_entities=(sphere,),
        assets=(Asset("hello-texture", HELLO_TEXTURE_PATH, "image/png"),),
        bounds_regions=(
            RegionCoord(0, 0),
            RegionCoord(-1, 0),
            RegionCoord(0, -1),
            RegionCoord(-1, -1),
        ),
    )


def demo_texture_png() -> bytes:
    """Deterministic 64x64 checker PNG for the demo sphere; stdlib only."""
    size = 64
    rows = bytearray()
    for y in range(size):
        rows.append(0)  # no scanline filter
        for x in range(size):
            if ((x // 8) + (y // 8)) % 2:
                rows += bytes((235, 240, 248))
            else:
                rows += bytes((58, 110, 165))

    def chunk(tag: bytes, payload: bytes) -> bytes:
        body = tag + payload
        return struct.pack(">I", len(payload)) + body + struct.pack(
            ">I", zlib.crc32(body) & 0xFFFFFFFF
        )

    ihdr = struct.pack(">IIBBBBB", size, size, 8, 2, 0, 0, 0)
    idat = zlib.compress(bytes(rows), 9)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", idat)
        + chunk(b"IEND", b"")
    )


def ensure_demo_world(persist_dir) -> Path:
    """Write the hello-world description and texture if not already present."""
    path = world_file_path(persist_dir, HELLO_WORLD_ID)
    if not path.exists():
        save_world_file(path, hello_world())
    texture = Path(persist_dir) / "assets" / HELLO_TEXTURE_PATH
    if not texture.exists():
        texture.parent.mkdir(parents=True, exist_ok=True)
        texture.write_bytes(demo_texture_png())
    return path
