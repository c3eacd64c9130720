from openverse import protocol
from openverse.errors import FORBIDDEN, NO_SUCH_ENTITY
from openverse.world.model import ComponentState, apply_component_update
from support import make_entity, transform


def request(entity_id="e1", sender="sB", room="r"):
    return protocol.WireMessage(
        kind="OwnershipRequest", room=room, sender=sender, entity=entity_id
    )


def test_grant_for_server_owned_dynamic_entity():
    # "Unowned": held by the server after its creator left, but created by a session.
    entity = make_entity(owner="server", creator="sA", seq=4)
    decision = protocol.resolve_ownership(entity, None, request(sender="sB"))
    assert decision.granted
    assert decision.entity.owner == "sB"
    assert decision.record.granted_seq == 4
    assert decision.entity.seq == 5  # fence
    assert decision.message.kind == "OwnershipGrant"
    assert decision.message.body == {"owner": "sB", "granted_seq": 4}
    assert decision.message.seq == 5


def test_transfer_fences_previous_owner():
    entity = make_entity(owner="sA", creator="sA", seq=0)
    entity = apply_component_update(
        entity, ComponentState("transform", transform(px=1.0)), 6
    )
    record = protocol.OwnershipRecord("e1", "sA", 0)
    decision = protocol.resolve_ownership(entity, record, request(sender="sB"))
    assert decision.granted
    granted_seq = decision.record.granted_seq
    assert granted_seq == 6
    assert decision.entity.seq == 7

    # A queued update from the previous owner at seq <= granted_seq stays stale:
    # the new owner's floor (grant.seq) strictly exceeds every seq A could have sent.
    stale = apply_component_update(
        decision.entity, ComponentState("transform", transform(px=9.0)), 6
    )
    assert stale.components["transform"].data["px"] == 1.0

    # The new owner continues from the advertised floor.
    fresh = apply_component_update(
        decision.entity,
        ComponentState("transform", transform(px=2.0)),
        decision.message.seq,
    )
    assert fresh.components["transform"].data["px"] == 2.0


def test_static_furniture_is_forbidden():
    entity = make_entity(owner="server", creator="server", persistent=True)
    decision = protocol.resolve_ownership(entity, None, request())
    assert not decision.granted
    assert decision.message.kind == "Error"
    assert decision.message.body["code"] == FORBIDDEN


def test_unknown_entity():
    decision = protocol.resolve_ownership(None, None, request(entity_id="ghost"))
    assert decision.message.body["code"] == NO_SUCH_ENTITY


def test_regrant_to_current_owner_is_idempotent():
    entity = make_entity(owner="sB", creator="sA", seq=7)
    record = protocol.OwnershipRecord("e1", "sB", 6)
    decision = protocol.resolve_ownership(entity, record, request(sender="sB"))
    assert decision.granted
    assert decision.entity == entity  # no fence bump
    assert decision.record == record


def test_exactly_one_owner_after_any_interleaving():
    import random

    rng = random.Random(3)
    for _ in range(100):
        entity = make_entity(owner="sA", creator="sA", seq=1)
        record = protocol.OwnershipRecord("e1", "sA", 0)
        owners = ["sA", "sB", "sC"]
        for _ in range(rng.randrange(1, 8)):
            decision = protocol.resolve_ownership(
                entity, record, request(sender=rng.choice(owners))
            )
            if decision.granted:
                entity, record = decision.entity, decision.record
        assert entity.owner in owners
        assert record.owner == entity.owner
