import pytest

from openverse.errors import InvalidWorld
from openverse.world.document import display_degrees, emit_world_document, fmt_scalar
from openverse.world.model import Portal
from openverse.world.worldfile import hello_world
from support import make_entity, make_world, transform


def test_hello_world_contains_listing_values():
    doc = emit_world_document(hello_world(), "/sync")
    assert 'position="0 1.5 -5"' in doc
    assert "radius: 1" in doc
    assert 'rotation="0 0 -30"' in doc
    assert "dur: 10000" in doc
    assert "easing: linear" in doc
    assert "to: 0 360 -30" in doc
    assert "loop: true" in doc


def test_emission_is_deterministic():
    a = emit_world_document(hello_world(), "/sync")
    b = emit_world_document(hello_world(), "/sync")
    assert a.encode("utf-8") == b.encode("utf-8")


def test_single_scene_root():
    doc = emit_world_document(hello_world(), "/sync")
    assert doc.count("<a-scene>") == 1
    assert doc.count("</a-scene>") == 1


def test_empty_world_has_scene_and_no_entities():
    doc = emit_world_document(make_world(), "/sync")
    assert "<a-scene>" in doc
    assert "<a-entity" not in doc


def test_portal_new_window_emits_target_blank():
    portal = Portal("to-atrium", transform(), "https://example.org/atrium", "new_window")
    doc = emit_world_document(make_world(portals=[portal]), "/sync")
    assert "https://example.org/atrium" in doc
    assert 'target="_blank"' in doc


def test_portal_replace_has_no_target_blank():
    portal = Portal("to-atrium", transform(), "https://example.org/atrium", "replace")
    doc = emit_world_document(make_world(portals=[portal]), "/sync")
    assert "https://example.org/atrium" in doc
    assert 'target="_blank"' not in doc


def test_sync_endpoint_embedded():
    doc = emit_world_document(make_world(), "wss://example.net/sync")
    assert '"sync":"wss://example.net/sync"' in doc


def test_client_bundle_reference_optional():
    world = make_world()
    bare = emit_world_document(world, "/sync")
    wired = emit_world_document(world, "/sync", client_src="/client/openverse-client.js")
    assert "/client/openverse-client.js" not in bare
    assert '<script src="/client/openverse-client.js" defer></script>' in wired


def test_invalid_world_raises_with_field_path():
    world = make_world(world_id="Bad World!")
    with pytest.raises(InvalidWorld) as err:
        emit_world_document(world, "/sync")
    assert any(v.path == "world_id" for v in err.value.violations)


def test_validated_world_always_emits():
    # validate_world(w) == [] implies emission succeeds for any endpoint.
    entity = make_entity(entity_id="obj-1", owner="server", creator="server")
    world = make_world(entities=[entity])
    for endpoint in ("/sync", "wss://h:1/sync", ""):
        assert "<a-scene>" in emit_world_document(world, endpoint)


def test_scalar_formatting():
    assert fmt_scalar(1.0) == "1"
    assert fmt_scalar(-5.0) == "-5"
    assert fmt_scalar(1.5) == "1.5"
    assert fmt_scalar(10000) == "10000"
    assert fmt_scalar(True) == "true"
    assert fmt_scalar(False) == "false"
    assert fmt_scalar("linear") == "linear"


def test_display_degrees_range():
    assert display_degrees(330.0) == -30.0
    assert display_degrees(0.0) == 0.0
    assert display_degrees(90.0) == 90.0
    assert display_degrees(180.0) == -180.0
    for deg in range(0, 360, 7):
        shown = display_degrees(float(deg))
        assert -180.0 <= shown < 180.0
        assert shown % 360.0 == float(deg) % 360.0
