"""Shared test utilities: random circuits and tamper hooks."""

import numpy as np

from hybridsfe.channel import Send
from hybridsfe.circuits import Gate, circuit_from_gates

KINDS = ("XOR", "AND", "OR", "NOT", "CONST")


def random_circuit(rng: np.random.Generator, alice_bits: int, bob_bits: int, gates: int,
                   outputs: int | None = None):
    """Topologically ordered random gate list over the input wires."""
    n_in = alice_bits + bob_bits
    wires = n_in
    glist = []
    for _ in range(gates):
        kind = KINDS[rng.choice(5, p=[0.3, 0.3, 0.2, 0.12, 0.08])]
        if wires == 0 and kind != "CONST":
            kind = "CONST"
        if kind == "CONST":
            glist.append(Gate(kind, (), wires, int(rng.integers(2))))
        elif kind == "NOT":
            glist.append(Gate(kind, (int(rng.integers(wires)),), wires))
        else:
            glist.append(Gate(kind, (int(rng.integers(wires)), int(rng.integers(wires))), wires))
        wires += 1
    outputs = outputs or min(8, max(1, gates))
    if gates:
        outs = [int(w) for w in rng.integers(n_in, wires, outputs)]
    else:
        outs = list(range(min(outputs, n_in)))
    return circuit_from_gates(wires, alice_bits, bob_bits, outs, glist)


def tamper_sends(gen, kind, flip_at=0, rounds=None, mask=1):
    """Wrap a party coroutine; flip one byte of every outgoing frame of ``kind``."""
    value = None
    try:
        op = gen.send(None)
        while True:
            if isinstance(op, Send) and op.kind == kind and (rounds is None or op.round in rounds):
                body = bytearray(op.body)
                body[flip_at % len(body)] ^= mask
                op = Send(op.kind, bytes(body), op.round)
            value = yield op
            op = gen.send(value)
    except StopIteration as stop:
        return stop.value


OPAQUE_KINDS = {"CTX", "OT1", "OT2", "OT3"}
# frames made of garbled tokens or tables: pseudorandom, so short byte
# patterns show up in them by chance; they are covered by frames_independent
TOKEN_KINDS = {"GCF", "GCA", "GCD", "GCY"}
BOB_KINDS = {"CTX", "OT2", "GCY"}


def leaks(transcript, secrets):
    """Frames outside ciphertext/OT/token frames whose body contains a secret,
    plus any Bob frame of a kind Bob should never send."""
    hits = []
    for m in transcript.messages:
        if m.sender == "bob" and m.kind not in BOB_KINDS:
            hits.append((m.seq, m.kind, "unexpected kind"))
        if m.kind in OPAQUE_KINDS or m.kind in TOKEN_KINDS:
            continue
        for s in secrets:
            if s and s in m.body:
                hits.append((m.seq, m.kind, s))
    return hits


def frames_independent(pi_a, pi_b, outputs_equal=True):
    """Two runs that differ only in Bob's sensitive data: every frame that is
    not OT or ciphertext must match byte for byte (Bob's GCY only if the
    outputs agree, since it encodes the output)."""
    if len(pi_a.messages) != len(pi_b.messages):
        return False
    for x, y in zip(pi_a.messages, pi_b.messages):
        if (x.sender, x.kind, x.round) != (y.sender, y.kind, y.round):
            return False
        if x.kind in OPAQUE_KINDS or (x.kind == "GCY" and not outputs_equal):
            continue
        if x.body != y.body:
            return False
    return True


def bob_odd_round_frames_sealed(transcript, key):
    """Every frame Bob sends in an enclave round is an AEAD frame under the key."""
    from hybridsfe.symenc import Ciphertext, SymKey, dec, round_ad
    k = SymKey(key)
    for m in transcript.messages:
        if m.sender != "bob" or m.round % 2 == 0:
            continue
        if m.kind != "CTX":
            return False
        try:
            ct = Ciphertext.from_bytes(m.body)
        except ValueError:
            return False
        if dec(k, ct, round_ad(m.round, "b2o")) is None:
            return False
    return True
