"""World model: entities, components, regions, portals, world documents."""

from openverse.world.model import (
    AVATAR_TEMPLATE,
    REGION_SIDE_M,
    SERVER_OWNER,
    TRANSFORM,
    Asset,
    ComponentState,
    EntityRecord,
    Portal,
    RegionCoord,
    Violation,
    WorldDescription,
    animate_rotation,
    apply_component_update,
    canonical_json,
    entity_from_dict,
    entity_to_dict,
    new_entity,
    region_of,
    validate_component_data,
    validate_world,
)
from openverse.world.document import emit_world_document
from openverse.world.worldfile import (
    HELLO_WORLD_ID,
    ensure_demo_world,
    hello_world,
    load_world_file,
    save_world_file,
    world_file_path,
)

__all__ = [
    "AVATAR_TEMPLATE",
    "REGION_SIDE_M",
    "SERVER_OWNER",
    "TRANSFORM",
    "Asset",
    "ComponentState",
    "EntityRecord",
    "Portal",
    "RegionCoord",
    "Violation",
    "WorldDescription",
    "animate_rotation",
    "apply_component_update",
    "canonical_json",
    "emit_world_document",
    "entity_from_dict",
    "entity_to_dict",
    "new_entity",
    "region_of",
    "validate_component_data",
    "validate_world",
    "HELLO_WORLD_ID",
    "ensure_demo_world",
    "hello_world",
    "load_world_file",
    "save_world_file",
    "world_file_path",
]
