"""The frozen conformance vectors must match the live implementation."""

import json
from pathlib import Path

import pytest

from openverse import protocol
from openverse.errors import DecodeError, InvalidComponent
from openverse.world.model import (
    ComponentState,
    apply_component_update,
    entity_from_dict,
    entity_to_dict,
)

VECTOR_DIR = Path(__file__).parent / "vectors"


def load(name):
    with open(VECTOR_DIR / name, encoding="utf-8") as f:
        return json.load(f)


def test_vector_files_exist():
    assert (VECTOR_DIR / "apply_updates.json").is_file()
    assert (VECTOR_DIR / "frames.json").is_file()


def apply_case_ids():
    return [c["name"] for c in load("apply_updates.json")["cases"]]


@pytest.mark.parametrize("case", load("apply_updates.json")["cases"], ids=apply_case_ids())
def test_apply_vectors(case):
    entity = entity_from_dict(case["entity"])
    update = case["update"]
    component = ComponentState(update["component"], update["data"])
    if "error" in case["expect"]:
        with pytest.raises(InvalidComponent):
            apply_component_update(entity, component, update["seq"])
        return
    result = apply_component_update(entity, component, update["seq"])
    assert entity_to_dict(result) == case["expect"]["entity"]


def frame_case_ids():
    return [c["name"] for c in load("frames.json")["cases"]]


@pytest.mark.parametrize("case", load("frames.json")["cases"], ids=frame_case_ids())
def test_frame_vectors(case):
    if "error" in case["expect"]:
        with pytest.raises(DecodeError) as err:
            protocol.decode(case["frame"])
        assert err.value.code == case["expect"]["error"]
        return
    msg = protocol.decode(case["frame"])
    expected = case["expect"]["message"]
    assert msg.kind == expected["kind"]
    assert msg.room == expected["room"]
    assert msg.sender == expected["sender"]
    assert msg.entity == expected["entity"]
    assert msg.seq == expected["seq"]
    assert msg.body == expected["body"]
    assert msg.ts == expected["ts"]
    # encode -> decode is lossless
    assert protocol.decode(protocol.encode(msg)) == msg
