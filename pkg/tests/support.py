"""Shared builders for test fixtures."""

from __future__ import annotations

import random

from openverse import protocol
from openverse.world.model import (
    Asset,
    ComponentState,
    EntityRecord,
    Portal,
    RegionCoord,
    WorldDescription,
    new_entity,
)


def transform(px=0.0, py=0.0, pz=0.0, rx=0.0, ry=0.0, rz=0.0, sx=1.0, sy=1.0, sz=1.0):
    return {
        "px": px, "py": py, "pz": pz,
        "rx": rx, "ry": ry, "rz": rz,
        "sx": sx, "sy": sy, "sz": sz,
    }


def make_entity(
    entity_id="e1",
    owner="sA",
    seq=0,
    persistent=False,
    components=None,
    creator=None,
):
    comps = {"transform": transform()}
    if components:
        comps.update(components)
    return new_entity(
        entity_id, owner, comps, seq=seq, persistent=persistent, creator=creator
    )


def make_world(
    world_id="test-world",
    entities=(),
    portals=(),
    assets=(),
    regions=(RegionCoord(0, 0),),
    spawn=None,
):
    return WorldDescription(
        world_id=world_id,
        title="Test World",
        spawn=spawn or transform(py=1.6),
        static_entities=tuple(entities),
        portals=tuple(portals),
        assets=tuple(assets),
        bounds_regions=tuple(regions),
    )


def random_scalar(rng: random.Random):
    pick = rng.randrange(4)
    if pick == 0:
        return rng.choice([True, False])
    if pick == 1:
        return rng.randrange(-1000, 1000)
    if pick == 2:
        return round(rng.uniform(-1e4, 1e4), 6)
    return "".join(rng.choice("abcdefgh-_ :") for _ in range(rng.randrange(0, 12)))


def random_body(rng: random.Random) -> dict:
    return {
        f"f{idx}": random_scalar(rng) for idx in range(rng.randrange(0, 5))
    }


def random_message(rng: random.Random) -> protocol.WireMessage:
    """Structured generator covering every kind and optional-field combination."""
    kind = rng.choice(sorted(protocol.KINDS))
    needs_entity = kind in protocol.ENTITY_KINDS
    needs_seq = kind in protocol.UPDATE_KINDS
    return protocol.WireMessage(
        kind=kind,
        room=rng.choice(["hello-world", "atrium", "hello-world:bench1"]),
        sender=rng.choice([None, "s1", "s42", "server"]),
        entity=f"e{rng.randrange(100)}" if needs_entity or rng.random() < 0.3 else None,
        seq=rng.randrange(0, 10_000) if needs_seq or rng.random() < 0.3 else None,
        body=random_body(rng),
        ts=rng.choice([None, 0, 123456.75, 1e12]),
    )
