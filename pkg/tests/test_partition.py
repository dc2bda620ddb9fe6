import pytest
from hypothesis import given, strategies as st

from hybridsfe.apps.database import (DatabaseConfig, Query, SET, build_database_scheme, database_plain,
                                     decode_db, encode_db, encode_queries)
from hybridsfe.apps.millionaires import compare_plain, to_bytes
from hybridsfe.enclave import EMPTY_STATE
from hybridsfe.partition import (EvenRound, OddRound, PartitionScheme, RoundError, check_correct, decode_fields,
                                 encode_fields, exec_reference, make_identity)


@given(st.lists(st.binary(max_size=50), max_size=6))
def test_fields_roundtrip(parts):
    assert decode_fields(encode_fields(parts)) == parts


def test_fields_reject_garbage():
    with pytest.raises(ValueError):
        decode_fields(b"\x00\x00\x00\x09abc")


def test_round_kinds_must_alternate():
    odd = OddRound("f", lambda u, v, st: (b"", b"", st))
    even = EvenRound(lambda u, v: (b"", b""))
    PartitionScheme((odd, even, odd), lambda k, a, r: [a] * 3, lambda k, b, r: [b] * 3)
    with pytest.raises(TypeError):
        PartitionScheme((even,), lambda k, a, r: [a], lambda k, b, r: [b])
    with pytest.raises(TypeError):
        PartitionScheme((odd, odd), lambda k, a, r: [a] * 2, lambda k, b, r: [b] * 2)


def test_identity_scheme_is_correct():
    f = compare_plain(8)
    P = make_identity(f, "cmp")

    def sample(c):
        return to_bytes(c.randbelow(256), 8), to_bytes(c.randbelow(256), 8)

    assert check_correct(P, f, sample, trials=50)


def test_check_correct_finds_a_broken_scheme():
    f = compare_plain(8)
    P = make_identity(lambda a, b: (bytes([a[0] >= b[0]]), b""), "wrong")
    rep = check_correct(P, f, lambda c: (to_bytes(c.randbelow(4), 8), to_bytes(c.randbelow(4), 8)), trials=200)
    assert not rep and rep.counterexample is not None


def test_round_outputs_feed_forward():
    def r1(u, v, st):
        return u + b"|1", v + b"|1", st.set("seen", True)

    def r2(u, v):
        return u + v, b""

    P = PartitionScheme((OddRound("r1", r1, dual=True), EvenRound(r2)),
                        lambda k, a, r: [a, b"A2"], lambda k, b, r: [b, b"B2"])
    res = exec_reference(P, 128, b"a", b"b")
    assert res.y0 == [b"a|1", b"A2a|1B2b|1"]
    assert res.y1 == [b"b|1", b""]
    assert res.state["seen"] is True


def test_failing_round_reports_index():
    P = PartitionScheme((OddRound("x", lambda u, v, st: 1 / 0),), lambda k, a, r: [a], lambda k, b, r: [b])
    with pytest.raises(RoundError) as ei:
        exec_reference(P, 128, b"", b"")
    assert ei.value.round_no == 1


def test_database_toy_split():
    # two plain selects and one sensitive select
    cfg = DatabaseConfig(4, 3, sensitive_fraction=1 / 3)
    a = encode_db([10, 20, 30, 40])
    b = encode_queries([Query(0), Query(3), Query(2, sensitive=True)])
    res = exec_reference(build_database_scheme(cfg), 128, a, b)
    assert decode_db(res.outputs[1]) == [10, 40, 30]
    assert res.outputs == database_plain(a, b)


def test_database_sets_are_seen_by_sensitive_selects():
    cfg = DatabaseConfig(4, 3, sensitive_fraction=1 / 3)
    a = encode_db([10, 20, 30, 40])
    b = encode_queries([Query(2, SET, 99), Query(3), Query(2, sensitive=True)])
    res = exec_reference(build_database_scheme(cfg), 128, a, b, state=EMPTY_STATE)
    assert decode_db(res.outputs[1]) == [30, 40, 99]
    assert decode_db(res.y0[0])[2] == 99
