import asyncio
import datetime
import ipaddress
import socket
import ssl

import pytest
from aiohttp import ClientSession

from openverse.server import (
    EXIT_PERSIST,
    EXIT_TLS,
    ServerConfig,
    SyncService,
    persist_room,
    preflight,
)
from openverse.server.persistence import snapshot_path
from netutil import WsClient, run, running_service
from support import transform


def test_world_document_route(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            async with ClientSession() as http:
                resp = await http.get(f"{fx.http_url}/w/hello-world")
                assert resp.status == 200
                text = await resp.text()
                assert 'position="0 1.5 -5"' in text
                assert '"sync":"/sync"' in text

                missing = await http.get(f"{fx.http_url}/w/no-such-world")
                assert missing.status == 404
                assert await missing.text() == ""

    run(scenario())


def test_asset_route_and_traversal_guard(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            async with ClientSession() as http:
                ok = await http.get(f"{fx.http_url}/assets/hello-world/texture.png")
                assert ok.status == 200
                body = await ok.read()
                assert body.startswith(b"\x89PNG")

                for sneaky in ("../../etc/passwd", "..%2f..%2fetc%2fpasswd"):
                    resp = await http.get(f"{fx.http_url}/assets/{sneaky}")
                    assert resp.status == 404

    run(scenario())


def test_healthz_counts(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            a, _ = await WsClient.join(fx.ws_url, "hello-world")
            b, _ = await WsClient.join(fx.ws_url, "hello-world")
            async with ClientSession() as http:
                doc = await (await http.get(f"{fx.http_url}/healthz")).json()
            assert doc["status"] == "ok"
            assert doc["rooms"] == 1
            assert doc["sessions"] == 2
            assert doc["rooms_detail"]["hello-world"]["entities"] == 1  # the sphere
            await a.close()
            await b.close()

    run(scenario())


def test_join_welcome_carries_static_snapshot(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            client, welcome = await WsClient.join(fx.ws_url, "hello-world")
            assert welcome.kind == "Welcome"
            snap = welcome.body["snapshot"]["entities"]
            assert [e["id"] for e in snap] == ["hello-sphere"]
            assert welcome.body["version"] == 1
            await client.close()

    run(scenario())


def test_two_clients_replicate_and_suppress_echo(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            a, _ = await WsClient.join(fx.ws_url, "hello-world")
            b, _ = await WsClient.join(fx.ws_url, "hello-world")
            # B sees A's presence (join order) eventually; create then update
            await a.create_entity("av-a", seq=1)
            created = await b.recv_until(lambda m: m.kind == "EntityCreate")
            assert created.entity == "av-a"
            assert created.sender == a.session_id

            await a.update_transform("av-a", seq=2, px=4.25)
            update = await b.recv_until(lambda m: m.kind == "EntityUpdate")
            assert update.body["data"]["px"] == 4.25

            # echo suppression: A never receives its own create/update
            echoes = [
                m for m in await a.drain(0.3)
                if m.kind in ("EntityCreate", "EntityUpdate") and m.entity == "av-a"
            ]
            assert echoes == []
            await a.close()
            await b.close()

    run(scenario())


def test_late_joiner_gets_entity_in_snapshot(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            a, _ = await WsClient.join(fx.ws_url, "hello-world")
            await a.create_entity("av-a", seq=1)
            await asyncio.sleep(0.1)  # let a tick apply it
            b, welcome = await WsClient.join(fx.ws_url, "hello-world")
            ids = [e["id"] for e in welcome.body["snapshot"]["entities"]]
            assert "av-a" in ids
            await a.close()
            await b.close()

    run(scenario())


def test_version_mismatch_over_wire(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            client, reply = await WsClient.join(fx.ws_url, "hello-world", version=0)
            assert reply.kind == "Error"
            assert reply.body["code"] == "VersionMismatch"
            await client.close()

    run(scenario())


def test_room_full_over_wire(tmp_path):
    async def scenario():
        async with running_service(tmp_path, max_room_size=2) as fx:
            a, ra = await WsClient.join(fx.ws_url, "hello-world")
            b, rb = await WsClient.join(fx.ws_url, "hello-world")
            c, rc = await WsClient.join(fx.ws_url, "hello-world")
            assert ra.kind == rb.kind == "Welcome"
            assert rc.kind == "Error"
            assert rc.body["code"] == "RoomFull"
            for cl in (a, b, c):
                await cl.close()

    run(scenario())


def test_unknown_world_is_room_unknown(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            client, reply = await WsClient.join(fx.ws_url, "never-written")
            assert reply.kind == "Error"
            assert reply.body["code"] == "RoomUnknown"
            await client.close()

    run(scenario())


def test_room_instances_are_isolated(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            a, _ = await WsClient.join(fx.ws_url, "hello-world")
            other, _ = await WsClient.join(fx.ws_url, "hello-world:two")
            await a.create_entity("av-a", seq=1)
            await a.update_transform("av-a", seq=2, px=1.0)
            leaked = [
                m for m in await other.drain(0.4)
                if m.kind in ("EntityCreate", "EntityUpdate")
            ]
            assert leaked == []
            await a.close()
            await other.close()

    run(scenario())


def test_bye_deletes_avatar_and_notifies_peer(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            a, _ = await WsClient.join(fx.ws_url, "hello-world")
            b, _ = await WsClient.join(fx.ws_url, "hello-world")
            await a.create_entity("av-a", seq=1)
            await b.recv_until(lambda m: m.kind == "EntityCreate")
            from openverse import protocol

            await a.send(protocol.WireMessage(kind="Bye", room="hello-world"))
            deleted = await b.recv_until(lambda m: m.kind == "EntityDelete")
            assert deleted.entity == "av-a"
            left = await b.recv_until(lambda m: m.kind == "Presence")
            assert left.body["event"] == "leave"
            await a.close()
            await b.close()

    run(scenario())


def test_heartbeat_eviction_over_wire(tmp_path):
    async def scenario():
        async with running_service(tmp_path, heartbeat_timeout_ms=300) as fx:
            a, _ = await WsClient.join(fx.ws_url, "hello-world")
            b, _ = await WsClient.join(fx.ws_url, "hello-world")
            await a.create_entity("av-a", seq=1)
            await b.recv_until(lambda m: m.kind == "EntityCreate")

            async def keepalive():
                from openverse import protocol

                for _ in range(10):
                    await b.send(protocol.WireMessage(kind="Ping", room="hello-world"))
                    await asyncio.sleep(0.1)

            task = asyncio.create_task(keepalive())
            deleted = await b.recv_until(lambda m: m.kind == "EntityDelete", timeout=3)
            assert deleted.entity == "av-a"
            task.cancel()
            await a.close()
            await b.close()

    run(scenario())


def test_persistence_roundtrip_through_service(tmp_path):
    async def scenario():
        async with running_service(tmp_path, persist_debounce_ms=0) as fx:
            a, _ = await WsClient.join(fx.ws_url, "hello-world")
            await a.create_entity(
                "board", seq=1, persistent=True,
                components={"transform": transform(px=2.5), "label": {"text": "hi"}},
            )
            await asyncio.sleep(0.3)  # tick + debounced write
            await a.close()
        assert snapshot_path(tmp_path, "hello-world").exists()

        async with running_service(tmp_path) as fx:
            b, welcome = await WsClient.join(fx.ws_url, "hello-world")
            snap = {e["id"]: e for e in welcome.body["snapshot"]["entities"]}
            assert "board" in snap
            assert snap["board"]["owner"] == "server"
            assert snap["board"]["components"]["label"]["data"]["text"] == "hi"
            assert snap["board"]["components"]["transform"]["data"]["px"] == 2.5
            await b.close()

    run(scenario())


def test_malformed_frame_gets_error_reply(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            a, _ = await WsClient.join(fx.ws_url, "hello-world")
            await a.ws.send_str("{nonsense")
            err = await a.recv_until(lambda m: m.kind == "Error")
            assert err.body["code"] == "SyntaxError"
            # connection still alive
            from openverse import protocol

            await a.send(protocol.WireMessage(kind="Ping", room="hello-world", ts=7))
            pong = await a.recv_until(lambda m: m.kind == "Pong")
            assert pong.ts == 7
            await a.close()

    run(scenario())


def test_stale_update_not_fanned_out(tmp_path):
    async def scenario():
        async with running_service(tmp_path) as fx:
            a, _ = await WsClient.join(fx.ws_url, "hello-world")
            b, _ = await WsClient.join(fx.ws_url, "hello-world")
            await a.create_entity("av-a", seq=1)
            await b.recv_until(lambda m: m.kind == "EntityCreate")
            await a.update_transform("av-a", seq=5, px=5.0)
            await b.recv_until(
                lambda m: m.kind == "EntityUpdate" and m.body["data"]["px"] == 5.0
            )
            await a.update_transform("av-a", seq=3, px=3.0)  # stale
            stale = [
                m for m in await b.drain(0.3)
                if m.kind == "EntityUpdate" and m.body["data"]["px"] == 3.0
            ]
            assert stale == []
            await a.close()
            await b.close()

    run(scenario())


def make_self_signed(tmp_path):
    from cryptography import x509
    from cryptography.hazmat.primitives import hashes, serialization
    from cryptography.hazmat.primitives.asymmetric import rsa
    from cryptography.x509.oid import NameOID

    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, "127.0.0.1")])
    now = datetime.datetime.now(datetime.timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(name)
        .issuer_name(name)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - datetime.timedelta(days=1))
        .not_valid_after(now + datetime.timedelta(days=1))
        .add_extension(
            x509.SubjectAlternativeName(
                [
                    x509.IPAddress(ipaddress.ip_address("127.0.0.1")),
                    x509.DNSName("localhost"),
                ]
            ),
            critical=False,
        )
        .sign(key, hashes.SHA256())
    )
    cert_path = tmp_path / "cert.pem"
    key_path = tmp_path / "key.pem"
    cert_path.write_bytes(cert.public_bytes(serialization.Encoding.PEM))
    key_path.write_bytes(
        key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.TraditionalOpenSSL,
            serialization.NoEncryption(),
        )
    )
    return cert_path, key_path


def test_tls_serving(tmp_path):
    cert_path, key_path = make_self_signed(tmp_path)

    async def scenario():
        async with running_service(
            tmp_path, dev_plaintext=False, cert=str(cert_path), key=str(key_path)
        ) as fx:
            assert fx.http_url.startswith("https://")
            client_ctx = ssl.create_default_context(cafile=str(cert_path))
            async with ClientSession() as http:
                resp = await http.get(f"{fx.http_url}/healthz", ssl=client_ctx)
                assert resp.status == 200
            ws, welcome = await WsClient.join(
                fx.ws_url, "hello-world", ssl=client_ctx
            )
            assert welcome.kind == "Welcome"
            await ws.close()

    run(scenario())


def test_preflight_requires_tls_in_production(tmp_path):
    config = ServerConfig(persist_dir=str(tmp_path), dev_plaintext=False)
    code, message = preflight(config)
    assert code == EXIT_TLS
    assert "cert" in message

    config = ServerConfig(
        persist_dir=str(tmp_path),
        dev_plaintext=False,
        cert=str(tmp_path / "missing.pem"),
        key=str(tmp_path / "missing.key"),
    )
    code, _ = preflight(config)
    assert code == EXIT_TLS


def test_preflight_unwritable_persist_dir(tmp_path):
    # a regular file where a directory is needed fails mkdir even for root
    in_the_way = tmp_path / "not-a-dir"
    in_the_way.write_text("occupied")
    config = ServerConfig(
        persist_dir=str(in_the_way / "data"), dev_plaintext=True
    )
    result = preflight(config)
    assert result is not None
    assert result[0] == EXIT_PERSIST


def test_port_busy_raises(tmp_path):
    async def scenario():
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        try:
            service = SyncService(
                ServerConfig(port=port, persist_dir=str(tmp_path), dev_plaintext=True)
            )
            with pytest.raises(OSError):
                await service.start()
            await service.stop()
        finally:
            blocker.close()

    run(scenario())


def test_dirty_room_persisted_on_shutdown(tmp_path):
    async def scenario():
        # long debounce: shutdown must still flush
        async with running_service(tmp_path, persist_debounce_ms=60_000) as fx:
            a, _ = await WsClient.join(fx.ws_url, "hello-world")
            await a.create_entity("board", seq=1, persistent=True)
            await asyncio.sleep(0.1)
            await a.close()
            await asyncio.sleep(0.1)
        path = snapshot_path(tmp_path, "hello-world")
        assert path.exists()
        import json

        doc = json.loads(path.read_text())
        assert [e["id"] for e in doc["entities"]] == ["board", "hello-sphere"]

    run(scenario())


def test_outbound_overflow_disconnects_slow_session(tmp_path):
    """A slow consumer hits its bounded queue and is dropped, not buffered."""

    async def scenario():
        from openverse import protocol
        from openverse.server.room import RoomState, admit_session
        from openverse.server.service import RoomRuntime, SessionHandle
        from openverse.server.room import Delivery
        from support import make_world

        service = SyncService(
            ServerConfig(persist_dir=str(tmp_path), dev_plaintext=True, outbound_queue_limit=2)
        )
        state = RoomState(room_id="r1", world=make_world())
        admit_session(state, "slow", now_ms=0.0)
        rt = RoomRuntime(state)

        class DeadSocket:
            async def close(self):
                pass

            async def send_str(self, frame):
                await asyncio.sleep(3600)  # consumer never drains

        handle = SessionHandle("slow", DeadSocket(), "r1", limit=2)
        rt.handles["slow"] = handle
        ping = protocol.make_pong(protocol.WireMessage(kind="Ping", room="r1"))
        deliveries = [Delivery(ping, ("slow",)) for _ in range(5)]
        service._dispatch(rt, deliveries)
        assert handle.closed
        await asyncio.sleep(0)  # let the scheduled close task start

    run(scenario())
