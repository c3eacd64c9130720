import random

import pytest

from openverse.errors import InvalidComponent
from openverse.world.model import (
    ComponentState,
    EntityRecord,
    apply_component_update,
    new_entity,
    validate_component_data,
)
from support import make_entity, transform

# Reference modulo table for degree normalization into [0, 360).
NORMALIZED_DEGREES = {-360: 0.0, -90: 270.0, 0: 0.0, 360: 0.0, 450: 90.0, 720: 0.0}


def seeded_entity(seq=5):
    # Transform applied at version `seq`, so entity.seq == transform version.
    e = make_entity(seq=0)
    return apply_component_update(e, ComponentState("transform", transform()), seq)


def test_newer_update_applies():
    e = seeded_entity(seq=5)
    up = ComponentState("transform", transform(px=1.0))
    e2 = apply_component_update(e, up, 6)
    assert e2.seq == 6
    assert e2.components["transform"].data["px"] == 1.0
    assert e2.components["transform"].version == 6


def test_equal_seq_dropped():
    e = seeded_entity(seq=5)
    up = ComponentState("transform", transform(px=9.0))
    e2 = apply_component_update(e, up, 5)
    assert e2 is e


def test_older_seq_dropped():
    e = seeded_entity(seq=5)
    e2 = apply_component_update(e, ComponentState("transform", transform(px=9.0)), 3)
    assert e2 is e


@pytest.mark.parametrize("deg,expected", sorted(NORMALIZED_DEGREES.items()))
def test_rotation_normalization_table(deg, expected):
    e = seeded_entity(seq=0)
    e2 = apply_component_update(
        e, ComponentState("transform", transform(ry=deg)), 1
    )
    assert e2.components["transform"].data["ry"] == expected


def test_unknown_component_not_an_error():
    e = seeded_entity(seq=5)
    e2 = apply_component_update(
        e, ComponentState("glow", {"intensity": 0.5, "color": "teal"}), 6
    )
    assert e2.components["glow"].data == {"intensity": 0.5, "color": "teal"}
    assert e2.seq == 6
    # transform untouched
    assert e2.components["transform"] == e.components["transform"]


def test_idempotent_for_equal_update():
    e = seeded_entity(seq=0)
    up = ComponentState("transform", transform(px=2.0))
    once = apply_component_update(e, up, 4)
    twice = apply_component_update(once, up, 4)
    assert twice == once


def test_entity_seq_never_decreases():
    e = seeded_entity(seq=5)
    e2 = apply_component_update(e, ComponentState("media", {"src": "x"}), 3)
    assert e2.seq == 5  # applied to a fresh component, entity counter keeps max


def test_permutation_convergence():
    """Any permutation of a distinct-seq update set ends at the max-seq state per component."""
    rng = random.Random(7)
    names = ["transform", "media", "label"]
    for _ in range(200):
        updates = []
        seqs = rng.sample(range(1, 100), rng.randrange(2, 10))
        for seq in seqs:
            name = rng.choice(names)
            if name == "transform":
                data = transform(px=float(seq))
            else:
                data = {"value": seq}
            updates.append((ComponentState(name, data), seq))

        # Independent oracle: per component, the touching update with max seq.
        expected = {}
        for comp, seq in updates:
            if comp.name not in expected or seq > expected[comp.name][1]:
                expected[comp.name] = (comp, seq)

        base = make_entity(seq=0)
        order = updates[:]
        rng.shuffle(order)
        state = base
        for comp, seq in order:
            state = apply_component_update(state, comp, seq)

        for name, (comp, seq) in expected.items():
            got = state.components[name]
            assert got.version == seq
            expected_data = validate_component_data(name, comp.data)
            assert got.data == expected_data
        assert state.seq == max(seq for _, seq in updates)


def test_malformed_transform_missing_field():
    e = seeded_entity()
    bad = {k: v for k, v in transform().items() if k != "py"}
    with pytest.raises(InvalidComponent) as err:
        apply_component_update(e, ComponentState("transform", bad), 9)
    assert err.value.missing_field == "py"


@pytest.mark.parametrize("scale", [0, -1, -0.25])
def test_non_positive_scale_rejected(scale):
    e = seeded_entity()
    with pytest.raises(InvalidComponent):
        apply_component_update(
            e, ComponentState("transform", transform(sy=scale)), 9
        )


def test_transform_extra_field_rejected():
    data = transform()
    data["warp"] = 1.0
    with pytest.raises(InvalidComponent):
        validate_component_data("transform", data)


def test_non_scalar_data_rejected():
    with pytest.raises(InvalidComponent):
        validate_component_data("media", {"nested": {"a": 1}})
    with pytest.raises(InvalidComponent):
        validate_component_data("media", {"items": [1, 2]})
    with pytest.raises(InvalidComponent):
        validate_component_data("media", {"missing": None})


def test_non_finite_data_rejected():
    with pytest.raises(InvalidComponent):
        validate_component_data("media", {"x": float("nan")})
    with pytest.raises(InvalidComponent):
        apply_component_update(
            seeded_entity(), ComponentState("transform", transform(px=float("inf"))), 9
        )


def test_boolean_is_not_a_transform_number():
    with pytest.raises(InvalidComponent):
        validate_component_data("transform", transform(px=True))


def test_entity_requires_transform():
    with pytest.raises(InvalidComponent):
        EntityRecord("e9", "sA", "sA", components={})
    with pytest.raises(InvalidComponent):
        new_entity("e9", "sA", {"media": {"src": "x"}})


def test_malformed_update_raises_even_when_stale():
    e = seeded_entity(seq=5)
    with pytest.raises(InvalidComponent):
        apply_component_update(e, ComponentState("transform", {"px": 1}), 2)
