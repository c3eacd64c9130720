from openverse import protocol
from openverse.errors import ROOM_FULL, ROOM_UNKNOWN, VERSION_MISMATCH


def hello(room="hello-world", version=protocol.PROTOCOL_VERSION):
    return protocol.WireMessage(kind="Hello", room=room, body={"version": version})


def test_welcome_carries_session_version_and_empty_snapshot():
    msg = protocol.admit(hello(), True, 0, session_id="s1")
    assert msg.kind == "Welcome"
    assert msg.room == "hello-world"
    assert msg.body["session"] == "s1"
    assert msg.body["version"] == protocol.PROTOCOL_VERSION
    assert msg.body["snapshot"]["entities"] == []


def test_welcome_embeds_room_snapshot():
    entities = [{"id": "e1"}, {"id": "e2"}]
    msg = protocol.admit(hello(), True, 3, session_id="s9", snapshot_entities=entities)
    assert msg.body["snapshot"]["entities"] == entities


def test_version_mismatch():
    msg = protocol.admit(hello(version=0), True, 0, session_id="s1")
    assert msg.kind == "Error"
    assert msg.body["code"] == VERSION_MISMATCH


def test_missing_version_is_mismatch():
    bad = protocol.WireMessage(kind="Hello", room="r", body={})
    msg = protocol.admit(bad, True, 0, session_id="s1")
    assert msg.body["code"] == VERSION_MISMATCH


def test_room_full_at_bound():
    # Scripted sequential joins: the 21st Hello against max_room_size=20 fails.
    population = 0
    rejected = []
    for _ in range(21):
        msg = protocol.admit(
            hello(), True, population, session_id="sx", max_room_size=20
        )
        if msg.kind == "Welcome":
            population += 1
        else:
            rejected.append(msg)
    assert population == 20
    assert len(rejected) == 1
    assert rejected[0].body["code"] == ROOM_FULL


def test_unknown_room_with_auto_create_disabled():
    msg = protocol.admit(hello(), False, 0, session_id="s1", auto_create=False)
    assert msg.body["code"] == ROOM_UNKNOWN


def test_unknown_room_auto_created_by_default():
    msg = protocol.admit(hello(), False, 0, session_id="s1")
    assert msg.kind == "Welcome"


def test_version_checked_before_capacity():
    msg = protocol.admit(hello(version=99), True, 999, session_id="s1")
    assert msg.body["code"] == VERSION_MISMATCH
