import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridsfe.circuits import AND, OR, eval_plain, gen_millionaires, int_to_bits
from hybridsfe.coins import Coins
from hybridsfe.garbling import (DecodingInfo, GarbleError, bytes_to_labels, decode, deserialize_garbled,
                                encode, evaluate, garble, labels_to_bytes, serialize_garbled, token_bytes)

from helpers import random_circuit


def _run(c, a, b, k=128, seed=0):
    F, e, d = garble(c, k, Coins(seed, "garble"))
    return decode(d, evaluate(F, encode(e, np.concatenate([a, b]).astype(np.uint8))))


@pytest.mark.parametrize("k", [80, 128])
@given(seed=st.integers(0, 2**32 - 1), la=st.integers(0, 5), lb=st.integers(0, 5), gates=st.integers(1, 80))
@settings(max_examples=30)
def test_garbled_equals_plain(k, seed, la, lb, gates):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, la, lb, gates)
    a = rng.integers(0, 2, la).astype(np.uint8)
    b = rng.integers(0, 2, lb).astype(np.uint8)
    assert _run(c, a, b, k, seed).tolist() == eval_plain(c, a, b).tolist()


def test_unsupported_k():
    with pytest.raises(GarbleError):
        garble(gen_millionaires(2), 64)


def test_table_rows_and_global_offset():
    rng = np.random.default_rng(5)
    c = random_circuit(rng, 4, 4, 200)
    F, e, d, zero = garble(c, 128, Coins(1, "g"), return_labels=True)
    assert F.tables.shape[0] == c.count(AND) + c.count(OR)
    assert F.table_rows == 3 * (c.count(AND) + c.count(OR))
    delta = e.delta
    assert int(delta[0]) & 1 == 1
    for x in range(256):
        bits = int_to_bits(x, 8)
        tok = evaluate(F, encode(e, bits), return_wires=True)
        # every wire's token is its zero label, or the zero label xor the one global offset
        vals = _wire_values(c, bits[:4], bits[4:])
        want = zero ^ (vals.astype(np.uint64)[:, None] * delta)
        assert np.array_equal(tok, want)


def _wire_values(c, a, b):
    from hybridsfe.circuits.core import CONST, NOT, XOR
    val = np.zeros(c.wire_count, np.uint8)
    val[:c.input_count] = np.concatenate([a, b])
    for g, (k, x, y, o) in enumerate(zip(c.kinds, c.in1, c.in2, c.outs)):
        if k == CONST:
            val[o] = x
        elif k == NOT:
            val[o] = val[x] ^ 1
        elif k == XOR:
            val[o] = val[x] ^ val[y]
        elif k == AND:
            val[o] = val[x] & val[y]
        else:
            val[o] = val[x] | val[y]
    return val


def test_foreign_output_token_decodes_to_bottom():
    c = gen_millionaires(8)
    F, e, d = garble(c, 128, Coins(2, "g"))
    y = evaluate(F, encode(e, np.zeros(16, np.uint8)))
    y = y.copy()
    y[0, 1] ^= np.uint64(1 << 40)
    assert decode(d, y) is None


def test_tampered_rows_are_caught():
    c = gen_millionaires(16)
    F, e, d = garble(c, 128, Coins(3, "g"))
    raw = bytearray(serialize_garbled(F))
    tb = token_bytes(128)
    # flip the check byte of every row
    for off in range(50 + tb - 1, 50 + F.tables.size, tb):
        raw[off] ^= 1
    F2 = deserialize_garbled(bytes(raw), c)
    x = encode(e, np.concatenate([int_to_bits(40000, 16), int_to_bits(1234, 16)]))
    with pytest.raises(GarbleError):
        evaluate(F2, x)


def test_serialize_binds_circuit():
    c1, c2 = gen_millionaires(4), gen_millionaires(5)
    F, _, _ = garble(c1, 80, Coins(4, "g"))
    blob = serialize_garbled(F)
    assert deserialize_garbled(blob, c1).tables.tobytes() == F.tables.tobytes()
    with pytest.raises(GarbleError):
        deserialize_garbled(blob, c2)
    with pytest.raises(GarbleError):
        deserialize_garbled(blob[:-1], c1)


@pytest.mark.parametrize("k", [80, 128])
def test_label_bytes_roundtrip(k):
    lab = Coins(9, "lab")
    F, e, d = garble(gen_millionaires(3), k, lab)
    pairs = e.pair_labels().reshape(-1, 2)
    assert np.array_equal(bytes_to_labels(labels_to_bytes(pairs, k), k), pairs)
    assert DecodingInfo.from_bytes(d.to_bytes()).hashes.tolist() == d.hashes.tolist()


def test_garbling_is_seeded():
    c = gen_millionaires(8)
    a = serialize_garbled(garble(c, 128, Coins(1, "g"))[0])
    b = serialize_garbled(garble(c, 128, Coins(1, "g"))[0])
    assert a == b
    assert a != serialize_garbled(garble(c, 128, Coins(2, "g"))[0])
