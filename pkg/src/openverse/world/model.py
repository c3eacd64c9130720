"""Entity-component world state.

Entities are plain containers of named components; a component is a flat map
of scalar fields plus a version counter. The ground plane is tiled into fixed
256 m square regions, and worlds link to each other through portals.

All types here are value-like: construct once, derive new values through the
operations below. Nothing in this module touches the network or the clock.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from urllib.parse import urlparse

from openverse.errors import (
    InvalidAnimation,
    InvalidComponent,
    InvalidPosition,
    InvalidWorld,
)

# Edge length of one ground region, in meters. Region area is 65,536 m².
REGION_SIDE_M = 256

# The component every entity must carry.
TRANSFORM = "transform"

TRANSFORM_FIELDS = ("px", "py", "pz", "rx", "ry", "rz", "sx", "sy", "sz")
ROTATION_FIELDS = ("rx", "ry", "rz")
SCALE_FIELDS = ("sx", "sy", "sz")

# Owner token for entities held by the service itself rather than a session.
SERVER_OWNER = "server"

# Reserved template name that marks an entity as a user avatar.
AVATAR_TEMPLATE = "avatar"

# Component data values that start with this prefix reference a world asset
# by id, e.g. {"src": "asset:hello-texture"}.
ASSET_REF_PREFIX = "asset:"

OPEN_MODE_REPLACE = "replace"
OPEN_MODE_NEW_WINDOW = "new_window"
OPEN_MODES = (OPEN_MODE_REPLACE, OPEN_MODE_NEW_WINDOW)

WORLD_ID_RE = re.compile(r"^[a-z0-9-]{1,64}$")

Scalar = bool | int | float | str


def _is_number(value) -> bool:
    # bool is an int subclass; a transform field of True is malformed.
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_component_data(name: str, data: dict) -> dict:
    """Check one component payload and return a normalized copy.

    Any component must be a flat map of scalar fields. The transform component
    additionally must hold exactly px..sz, with finite numbers, positive
    scale, and rotations are normalized into [0, 360).

    Raises InvalidComponent on violation. Unknown component names are fine;
    they are stored and replicated verbatim.
    """
    if not isinstance(name, str) or not name:
        raise InvalidComponent("component name must be a non-empty string")
    if not isinstance(data, dict):
        raise InvalidComponent(f"component {name!r} data must be a flat map")
    for key, value in data.items():
        if not isinstance(key, str) or not key:
            raise InvalidComponent(f"component {name!r} has a non-string field key")
        if not isinstance(value, (bool, int, float, str)):
            raise InvalidComponent(
                f"component {name!r} field {key!r} must be a scalar"
            )
        if _is_number(value) and not math.isfinite(value):
            raise InvalidComponent(f"component {name!r} field {key!r} is not finite")
    if name != TRANSFORM:
        return dict(data)

    missing = [f for f in TRANSFORM_FIELDS if f not in data]
    if missing:
        raise InvalidComponent(
            f"transform missing field {missing[0]!r}", missing_field=missing[0]
        )
    extra = [f for f in data if f not in TRANSFORM_FIELDS]
    if extra:
        raise InvalidComponent(f"transform has unknown field {extra[0]!r}")
    for key in TRANSFORM_FIELDS:
        if not _is_number(data[key]):
            raise InvalidComponent(f"transform field {key!r} must be a number")
    for key in SCALE_FIELDS:
        if data[key] <= 0:
            raise InvalidComponent(f"transform field {key!r} must be > 0")
    out = dict(data)
    for key in ROTATION_FIELDS:
        # Python's float modulo keeps the divisor's sign, so this lands in
        # [0, 360) for any finite input, including negatives.
        out[key] = float(data[key]) % 360.0
    return out


@dataclass(frozen=True)
class ComponentState:
    """A named, typed data container attached to an entity."""

    name: str
    data: dict = field(default_factory=dict)
    version: int = 0

    def __post_init__(self):
        object.__setattr__(self, "data", dict(self.data))


@dataclass(frozen=True)
class EntityRecord:
    """One replicated scene object.

    ``seq`` is the highest update counter applied to any of its components
    and never decreases. Every entity carries a transform component.
    """

    entity_id: str
    owner: str
    creator: str
    seq: int = 0
    components: dict = field(default_factory=dict)
    persistent: bool = False

    def __post_init__(self):
        object.__setattr__(self, "components", dict(self.components))
        if TRANSFORM not in self.components:
            raise InvalidComponent(
                "entity must carry a transform component", missing_field=TRANSFORM
            )

    def transform(self) -> dict:
        return self.components[TRANSFORM].data


def new_entity(
    entity_id: str,
    owner: str,
    components: dict,
    *,
    seq: int = 0,
    persistent: bool = False,
    creator: str | None = None,
) -> EntityRecord:
    """Build an entity from ``{name: data}`` payloads, validating every component."""
    validated = {
        name: ComponentState(name, validate_component_data(name, data), version=seq)
        for name, data in components.items()
    }
    return EntityRecord(
        entity_id=entity_id,
        owner=owner,
        creator=creator if creator is not None else owner,
        seq=seq,
        components=validated,
        persistent=persistent,
    )


def apply_component_update(
    entity: EntityRecord, update: ComponentState, update_seq: int
) -> EntityRecord:
    """Apply one component update, last-writer-wins per component.

    The update replaces the named component iff ``update_seq`` is strictly
    newer than that component's stored version; otherwise the entity is
    returned unchanged (stale update dropped). ``entity.seq`` only ever moves
    forward. Gating per component (rather than per entity) makes applying any
    permutation of a set of distinct-seq updates converge to the max-seq state
    of each component.

    Transform payloads are validated in full and rotations normalized into
    [0, 360). Raises InvalidComponent for malformed payloads regardless of
    staleness.
    """
    data = validate_component_data(update.name, update.data)
    current = entity.components.get(update.name)
    if current is not None and update_seq <= current.version:
        return entity
    components = dict(entity.components)
    components[update.name] = ComponentState(update.name, data, version=update_seq)
    return replace(
        entity, components=components, seq=max(entity.seq, update_seq)
    )


def animate_rotation(
    from_deg: float, to_deg: float, duration_ms: float, t_ms: float
) -> float:
    """Looping linear rotation: value at time ``t_ms`` of a ``duration_ms`` cycle."""
    if duration_ms <= 0:
        raise InvalidAnimation(f"duration must be > 0, got {duration_ms}")
    if t_ms < 0:
        raise InvalidAnimation(f"time must be >= 0, got {t_ms}")
    phase = (t_ms % duration_ms) / duration_ms
    return from_deg + (to_deg - from_deg) * phase


@dataclass(frozen=True)
class RegionCoord:
    """One tile of the fixed 256 m ground grid."""

    rx: int
    rz: int
    side: int = REGION_SIDE_M


def region_of(px: float, pz: float) -> RegionCoord:
    """Map a ground position in meters to its region tile.

    ``rx = floor(px / 256)`` and likewise for ``rz``; dividing by a power of
    two is exact in IEEE-754, so the floor is exact for any finite input.
    """
    if not (math.isfinite(px) and math.isfinite(pz)):
        raise InvalidPosition(f"non-finite position ({px}, {pz})")
    return RegionCoord(
        rx=math.floor(px / REGION_SIDE_M), rz=math.floor(pz / REGION_SIDE_M)
    )


@dataclass(frozen=True)
class Portal:
    """A clickable link from one world into another."""

    portal_id: str
    position: dict
    target_url: str
    open_mode: str = OPEN_MODE_REPLACE


@dataclass(frozen=True)
class Asset:
    asset_id: str
    path: str
    media_type: str


@dataclass(frozen=True)
class WorldDescription:
    """Declarative definition of one world: static scene, spawn, portals, assets."""

    world_id: str
    title: str
    spawn: dict
    static_entities: tuple = ()
    portals: tuple = ()
    assets: tuple = ()
    bounds_regions: tuple = ()


@dataclass(frozen=True)
class Violation:
    """One failed world-description rule, naming the offending field path."""

    path: str
    rule: str

    def __str__(self) -> str:
        return f"{self.path}: {self.rule}"


def asset_refs(data: dict) -> list:
    """Asset ids referenced by one component's data values."""
    return [
        value[len(ASSET_REF_PREFIX):]
        for value in data.values()
        if isinstance(value, str) and value.startswith(ASSET_REF_PREFIX)
    ]


def validate_world(world: WorldDescription, *, allow_http: bool = False) -> list:
    """Check every world invariant; returns a list of Violations (empty if valid).

    Pure: never raises for content problems, never mutates. ``allow_http``
    relaxes the https-only portal rule for servers running in dev mode.
    """
    violations = []

    def bad(path, rule):
        violations.append(Violation(path, rule))

    if not WORLD_ID_RE.match(world.world_id or ""):
        bad("world_id", "must match [a-z0-9-]{1,64}")

    try:
        spawn = validate_component_data(TRANSFORM, world.spawn)
    except InvalidComponent as exc:
        spawn = None
        bad("spawn", str(exc))

    region_set = set()
    for i, region in enumerate(world.bounds_regions):
        if region.side != REGION_SIDE_M:
            bad(f"regions[{i}].side", f"must be {REGION_SIDE_M}")
        region_set.add((region.rx, region.rz))
    if not region_set:
        bad("regions", "world must span at least one region")
    elif spawn is not None:
        at = region_of(spawn["px"], spawn["pz"])
        if (at.rx, at.rz) not in region_set:
            bad("spawn", f"position lies in region ({at.rx}, {at.rz}) outside bounds")

    asset_ids = set()
    for i, asset in enumerate(world.assets):
        if not asset.asset_id:
            bad(f"assets[{i}].asset_id", "must be non-empty")
        elif asset.asset_id in asset_ids:
            bad(f"assets[{i}].asset_id", f"duplicate asset id {asset.asset_id!r}")
        asset_ids.add(asset.asset_id)
        if not asset.path or asset.path.startswith("/") or ".." in asset.path.split("/"):
            bad(f"assets[{i}].path", "must be a relative path without '..'")
        if not asset.media_type:
            bad(f"assets[{i}].media_type", "must be non-empty")

    entity_ids = set()
    for i, entity in enumerate(world.static_entities):
        path = f"entities[{i}]"
        if not entity.entity_id:
            bad(f"{path}.entity_id", "must be non-empty")
        elif entity.entity_id in entity_ids:
            bad(f"{path}.entity_id", f"duplicate entity id {entity.entity_id!r}")
        entity_ids.add(entity.entity_id)
        for name, component in entity.components.items():
            try:
                validate_component_data(name, component.data)
            except InvalidComponent as exc:
                bad(f"{path}.components.{name}", str(exc))
                continue
            for ref in asset_refs(component.data):
                if ref not in asset_ids:
                    bad(f"{path}.components.{name}", f"unresolved asset {ref}")

    portal_ids = set()
    schemes = ("https", "http") if allow_http else ("https",)
    for i, portal in enumerate(world.portals):
        path = f"portals[{i}]"
        if not portal.portal_id:
            bad(f"{path}.portal_id", "must be non-empty")
        elif portal.portal_id in portal_ids:
            bad(f"{path}.portal_id", f"duplicate portal id {portal.portal_id!r}")
        portal_ids.add(portal.portal_id)
        try:
            validate_component_data(TRANSFORM, portal.position)
        except InvalidComponent as exc:
            bad(f"{path}.position", str(exc))
        parsed = urlparse(portal.target_url or "")
        if parsed.scheme not in schemes or not parsed.netloc:
            bad(
                f"{path}.target_url",
                f"must be an absolute {' or '.join(schemes)} URL",
            )
        if portal.open_mode not in OPEN_MODES:
            bad(f"{path}.open_mode", f"must be one of {OPEN_MODES}")

    return violations


def check_world(world: WorldDescription, *, allow_http: bool = False) -> None:
    """Raise InvalidWorld if the description fails validation."""
    violations = validate_world(world, allow_http=allow_http)
    if violations:
        raise InvalidWorld(violations)


# --- canonical encoding ------------------------------------------------------

def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, compact separators, raw unicode."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def entity_to_dict(entity: EntityRecord) -> dict:
    return {
        "id": entity.entity_id,
        "owner": entity.owner,
        "creator": entity.creator,
        "seq": entity.seq,
        "persistent": entity.persistent,
        "components": {
            name: {"version": c.version, "data": dict(c.data)}
            for name, c in sorted(entity.components.items())
        },
    }


def entity_from_dict(doc: dict) -> EntityRecord:
    components = {
        name: ComponentState(name, c.get("data", {}), version=int(c.get("version", 0)))
        for name, c in doc["components"].items()
    }
    return EntityRecord(
        entity_id=doc["id"],
        owner=doc["owner"],
        creator=doc["creator"],
        seq=int(doc["seq"]),
        components=components,
        persistent=bool(doc["persistent"]),
    )
