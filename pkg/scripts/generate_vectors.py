#!/usr/bin/env python3
"""Regenerate the shared conformance vectors under tests/vectors/.

The browser client must apply updates bit-identically to the server's
world model; these fixtures freeze the authoritative behavior so both
implementations test against the same cases.
"""

from __future__ import annotations

import json
from pathlib import Path

from openverse import protocol
from openverse.errors import DecodeError, InvalidComponent
from openverse.world.model import (
    ComponentState,
    apply_component_update,
    entity_from_dict,
    entity_to_dict,
    new_entity,
)

VECTOR_DIR = Path(__file__).resolve().parent.parent / "tests" / "vectors"


def transform(**overrides):
    data = {
        "px": 0.0, "py": 1.0, "pz": 0.0,
        "rx": 0.0, "ry": 0.0, "rz": 0.0,
        "sx": 1.0, "sy": 1.0, "sz": 1.0,
    }
    data.update(overrides)
    return data


def base_entity(seq=5):
    entity = new_entity(
        "e1",
        "sA",
        {"transform": transform(), "label": {"text": "base"}},
        seq=0,
        persistent=False,
    )
    return apply_component_update(entity, ComponentState("transform", transform()), seq)


def apply_cases():
    cases = []

    def case(name, entity, component, data, seq):
        before = entity_to_dict(entity)
        update = {"component": component, "data": data, "seq": seq}
        try:
            after = apply_component_update(
                entity_from_dict(before), ComponentState(component, data), seq
            )
        except InvalidComponent:
            cases.append(
                {"name": name, "entity": before, "update": update,
                 "expect": {"error": "InvalidComponent"}}
            )
            return
        cases.append(
            {"name": name, "entity": before, "update": update,
             "expect": {"entity": entity_to_dict(after)}}
        )

    e = base_entity(seq=5)
    case("newer transform applies", e, "transform", transform(px=2.5), 6)
    case("equal seq dropped", e, "transform", transform(px=9.0), 5)
    case("older seq dropped", e, "transform", transform(px=9.0), 3)
    case("rotation 450 wraps to 90", e, "transform", transform(ry=450), 6)
    case("rotation -90 wraps to 270", e, "transform", transform(rz=-90), 6)
    case("rotation 720 wraps to 0", e, "transform", transform(rx=720), 6)
    case("rotation -360 wraps to 0", e, "transform", transform(ry=-360), 6)
    case(
        "fresh component applies below entity seq",
        e, "media", {"src": "clip.mp4", "volume": 0.5}, 3,
    )
    case("unknown component stored opaquely", e, "glow", {"intensity": 2, "on": True}, 6)
    case(
        "existing non-transform gated per component",
        e, "label", {"text": "changed"}, 0,
    )
    case("missing transform field rejected", e, "transform",
         {k: v for k, v in transform().items() if k != "sz"}, 7)
    case("zero scale rejected", e, "transform", transform(sx=0), 7)
    case("negative scale rejected", e, "transform", transform(sy=-2), 7)
    case("extra transform field rejected", e, "transform",
         dict(transform(), warp=1.0), 7)
    case("boolean not a number", e, "transform", transform(px=True), 7)
    case("nested data rejected", e, "media", {"srcs": {"a": 1}}, 7)

    idem = base_entity(seq=4)
    stepped = apply_component_update(
        idem, ComponentState("transform", transform(px=1.25)), 6
    )
    cases.append(
        {
            "name": "idempotent re-apply of the applied update",
            "entity": entity_to_dict(stepped),
            "update": {"component": "transform", "data": transform(px=1.25), "seq": 6},
            "expect": {"entity": entity_to_dict(stepped)},
        }
    )
    return cases


def frame_cases():
    cases = []

    def ok(name, frame):
        msg = protocol.decode(frame)
        cases.append(
            {
                "name": name,
                "frame": frame,
                "expect": {
                    "message": {
                        "kind": msg.kind,
                        "room": msg.room,
                        "sender": msg.sender,
                        "entity": msg.entity,
                        "seq": msg.seq,
                        "body": msg.body,
                        "ts": msg.ts,
                    }
                },
            }
        )

    def bad(name, frame):
        try:
            protocol.decode(frame)
            raise AssertionError(f"case {name!r} unexpectedly decoded")
        except DecodeError as exc:
            cases.append(
                {"name": name, "frame": frame,
                 "expect": {"error": exc.code, "detail": exc.detail}}
            )

    ok("ping", '{"kind":"Ping","room":"hello-world","body":{},"ts":0}')
    ok(
        "entity update with unknown body field preserved",
        '{"kind":"EntityUpdate","room":"hello-world","sender":"s1","entity":"e1",'
        '"seq":7,"body":{"component":"transform","data":{"px":1,"py":2,"pz":3,'
        '"rx":0,"ry":0,"rz":0,"sx":1,"sy":1,"sz":1},"tint":"red"},"ts":12.5}',
    )
    ok(
        "welcome with embedded snapshot",
        '{"kind":"Welcome","room":"hello-world","sender":"server",'
        '"body":{"session":"s9","version":1,"tick_ms":50,'
        '"snapshot":{"entities":[]}}}',
    )
    ok(
        "ownership grant",
        '{"kind":"OwnershipGrant","room":"r","sender":"server","entity":"e1",'
        '"seq":8,"body":{"owner":"s2","granted_seq":7}}',
    )
    ok("error frame", '{"kind":"Error","room":"r","body":{"code":"RoomFull","detail":"full"}}')
    bad("empty frame", "")
    bad("not json", "{nope")
    bad("not an object", "[1,2]")
    bad("missing kind", '{"room":"r"}')
    bad("unknown kind", '{"kind":"Teleport","room":"r"}')
    bad("missing room", '{"kind":"Ping"}')
    bad("update without entity", '{"kind":"EntityUpdate","room":"r","seq":1}')
    bad("update without seq", '{"kind":"EntityUpdate","room":"r","entity":"e1"}')
    bad("negative seq", '{"kind":"EntityUpdate","room":"r","entity":"e1","seq":-2}')
    bad("fractional seq", '{"kind":"EntityUpdate","room":"r","entity":"e1","seq":1.5}')
    bad("body not object", '{"kind":"Ping","room":"r","body":[]}')
    return cases


def main():
    VECTOR_DIR.mkdir(parents=True, exist_ok=True)
    files = {
        "apply_updates.json": {
            "description": "Component update application semantics shared by server and client",
            "cases": apply_cases(),
        },
        "frames.json": {
            "description": "Wire frame decode semantics shared by server and client",
            "cases": frame_cases(),
        },
    }
    for name, doc in files.items():
        path = VECTOR_DIR / name
        with open(path, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, ensure_ascii=False, sort_keys=True)
            f.write("\n")
        print(f"wrote {path} ({len(doc['cases'])} cases)")


if __name__ == "__main__":
    main()
