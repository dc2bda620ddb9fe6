import pytest

from hybridsfe.apps.database import DatabaseApp, DatabaseConfig, database_plain
from hybridsfe.apps.millionaires import MillionairesApp
from hybridsfe.channel import ProtocolError
from hybridsfe.enclave import AuthError
from hybridsfe.partition import exec_reference
from hybridsfe.protocol import PiHyb, PiSgx, replay, run_protocol, view
from hybridsfe.protocol import engine

from helpers import bob_odd_round_frames_sealed, leaks, tamper_sends

SMALL_DB = DatabaseConfig(8, 6, sensitive_fraction=1 / 3)


def _db_run(mode="hybrid", seed=0, transport="inproc", store="tree"):
    app = DatabaseApp(SMALL_DB)
    db, qs = app.instance(seed, select_only=(mode == "gc"))
    a, b = app.inputs(db, qs)
    return app, a, b, run_protocol(app.protocol(mode, store), 128, a, b, seed=seed, transport=transport)


@pytest.mark.parametrize("mode", ["hybrid", "sgx", "naive", "gc"])
def test_database_modes_match_plain(mode):
    for seed in range(3):
        _, a, b, r = _db_run(mode, seed)
        assert (r.y0, r.y1) == database_plain(a, b)


def test_hybrid_matches_reference_execution():
    app, a, b, r = _db_run("hybrid", 4)
    ref = exec_reference(app.scheme(), 128, a, b, seed=4)
    assert (r.y0, r.y1) == ref.outputs


@pytest.mark.parametrize("mode", ["sgx", "gc"])
def test_millionaires(mode):
    app = MillionairesApp(16)
    for x, y in [(5, 3), (3, 5), (7, 7), (0, 65535), (65535, 0)]:
        a, b = app.inputs(x, y)
        r = run_protocol(app.protocol(mode), 128, a, b, seed=x)
        assert (r.y0, r.y1) == (bytes([int(x > y)]), b"")


def test_millionaires_has_no_hybrid():
    with pytest.raises(ValueError):
        MillionairesApp(8).protocol("hybrid")


def test_replay_reproduces_transcript():
    app, a, b, r = _db_run("hybrid", 1)
    again = replay(app.protocol("hybrid"), r.transcript)
    assert again.transcript.to_bytes() == r.transcript.to_bytes()


def test_tcp_matches_inproc():
    *_, r1 = _db_run("hybrid", 2, "inproc")
    *_, r2 = _db_run("hybrid", 2, "tcp")
    assert r1.transcript.to_bytes() == r2.transcript.to_bytes()


def test_views_partition_messages():
    *_, r = _db_run("hybrid", 3)
    va, vb = view(r.transcript, "alice"), view(r.transcript, "bob")
    assert len(va.sent) + len(vb.sent) == len(r.transcript.messages)
    assert [m.seq for m in va.sent] == [m.seq for m in vb.received]
    assert vb.oracle == [] and va.oracle


def test_alice_view_lacks_key_and_bob_input():
    app, a, b, r = _db_run("hybrid", 5)
    key = r.transcript.longterm["oracle"]
    blob = view(r.transcript, "alice").to_bytes()
    assert key not in blob
    assert b not in blob
    assert r.transcript.longterm["alice"] == b""


def test_channel_hygiene_database():
    app, a, b, r = _db_run("hybrid", 6)
    qs = app.instance(6)[1]
    secrets = [q.index.to_bytes(4, "big") for q in qs if q.sensitive]
    assert bob_odd_round_frames_sealed(r.transcript, r.transcript.longterm["bob"])
    assert not leaks(r.transcript, secrets + [b])


def test_tampered_oracle_reply_gives_bottom():
    app = DatabaseApp(SMALL_DB)
    db, qs = app.instance(0)
    a, b = app.inputs(db, qs)

    class Tampered(PiHyb):
        def alice(self, ctx, a):
            return tamper_sends(super().alice(ctx, a), "CTX", flip_at=20)

    with pytest.raises(ProtocolError):
        run_protocol(Tampered(app.scheme()), 128, a, b)


def test_tampered_bob_ciphertext_leaves_enclave_state(monkeypatch):
    made = []

    class Spy(engine.Enclave):
        def __init__(self, *args, **kw):
            super().__init__(*args, **kw)
            made.append(self)

    monkeypatch.setattr(engine, "Enclave", Spy)
    app = DatabaseApp(SMALL_DB)
    a, b = app.inputs(*app.instance(0))

    class Tampered(PiSgx):
        def bob(self, ctx, b):
            return tamper_sends(super().bob(ctx, b), "CTX", flip_at=30)

    base = app.protocol("sgx")
    with pytest.raises(AuthError):
        run_protocol(Tampered(base.fn_id, base.fn, dual=True), 128, a, b)
    assert len(made[0]._debug_state()) == 0


def test_sgx_dual_bottom_on_bad_reply():
    app = DatabaseApp(SMALL_DB)
    a, b = app.inputs(*app.instance(0))
    base = app.protocol("sgx")

    class Tampered(PiSgx):
        def alice(self, ctx, a):
            return tamper_sends(super().alice(ctx, a), "CTX", flip_at=13)

    r = run_protocol(Tampered(base.fn_id, base.fn, dual=True), 128, a, b)
    assert r.y1 is None


def test_unknown_transport():
    with pytest.raises(ValueError):
        _db_run("hybrid", 0, "carrier-pigeon")
