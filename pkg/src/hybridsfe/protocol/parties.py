"""Party coroutines for the enclave round, the garbled-circuit round and the
composed hybrid protocol.

Frame kinds:
  CTX  AES-GCM ciphertext (Bob -> Alice for the oracle, Alice -> Bob relay)
  GCF  garbled circuit       GCA  Alice's input tokens
  GCD  decoding info (dual)  GCY  Bob's output tokens (standard)
  OT1, OT2, OT3              oblivious transfer of Bob's input tokens
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..channel import ProtocolError, Recv, Send
from ..coins import Coins
from ..enclave import OracleQuery
from ..garbling import (DecodingInfo, GarbleError, bytes_to_labels, decode, deserialize_garbled,
                        encode_a, evaluate, garble, labels_to_bytes, serialize_garbled, token_bytes)
from ..ot import OtSenderInput, ot_receiver, ot_sender
from ..partition import CircuitRealization, EvenRound, OddRound, PartitionScheme
from ..symenc import Ciphertext, SymKey, dec, enc, keygen, round_ad


@dataclass
class PartyContext:
    role: str
    k: int
    coins: Coins
    longterm: object = None  # Bob: the SymKey; Alice: None
    oracle: Callable | None = None  # Alice only: (query, dual) -> OracleResponse
    notes: dict = field(default_factory=dict)


# -- enclave round -----------------------------------------------------------

def sgx_alice(ctx: PartyContext, fn_id: str, a: bytes, round_no: int, dual: bool):
    raw = yield Recv("CTX", round_no)
    try:
        c = Ciphertext.from_bytes(raw)
    except ValueError as exc:
        raise ProtocolError(f"round {round_no}: {exc}") from None
    resp = ctx.oracle(OracleQuery(fn_id, bytes(a), c, round_no), dual)
    if dual:
        yield Send("CTX", resp.y_bob.to_bytes(), round_no)
    return resp.y_alice


def sgx_bob(ctx: PartyContext, b: bytes, round_no: int, dual: bool):
    key: SymKey = ctx.longterm
    c = enc(key, b, ctx.coins.fork(f"enc{round_no}"), round_ad(round_no, "b2o"))
    yield Send("CTX", c.to_bytes(), round_no)
    if not dual:
        return b""
    raw = yield Recv("CTX", round_no)
    try:
        y = dec(key, Ciphertext.from_bytes(raw), round_ad(round_no, "o2b"))
    except ValueError:
        y = None
    return y  # None is the failure symbol


# -- garbled-circuit round ---------------------------------------------------

def gc_alice(ctx: PartyContext, real: CircuitRealization, u: bytes, round_no: int, dual: bool):
    c = real.circuit
    F, e, d = garble(c, ctx.k, ctx.coins.fork(f"garble{round_no}"))
    xa = encode_a(e, real.encode_a(u))
    yield Send("GCF", serialize_garbled(F), round_no)
    yield Send("GCA", labels_to_bytes(xa, ctx.k), round_no)
    if dual:
        yield Send("GCD", d.to_bytes(), round_no)
    pairs = e.pair_labels()[c.alice_input_bits:]
    ot_in = OtSenderInput(tuple((labels_to_bytes(p[0], ctx.k), labels_to_bytes(p[1], ctx.k)) for p in pairs))
    del F
    yield from ot_sender(ot_in, ctx.coins.fork(f"ot{round_no}"), round_no)
    if dual:
        return b""
    y_tok = bytes_to_labels((yield Recv("GCY", round_no)), ctx.k)
    bits = decode(d, y_tok)
    if bits is None:
        raise ProtocolError(f"round {round_no}: output tokens do not decode")
    return real.decode(u, bits)


def gc_bob(ctx: PartyContext, real: CircuitRealization, v: bytes, round_no: int, dual: bool):
    c = real.circuit
    try:
        F = deserialize_garbled((yield Recv("GCF", round_no)), c)
        xa = bytes_to_labels((yield Recv("GCA", round_no)), ctx.k)
        d = DecodingInfo.from_bytes((yield Recv("GCD", round_no))) if dual else None
    except GarbleError as exc:
        raise ProtocolError(f"round {round_no}: {exc}") from None
    if F.k != ctx.k or xa.shape[0] != c.alice_input_bits:
        raise ProtocolError(f"round {round_no}: garbled input does not match the circuit")
    bits_b = real.encode_b(v)
    if len(bits_b) != c.bob_input_bits:
        raise ProtocolError(f"round {round_no}: Bob's encoding has the wrong width")
    toks = yield from ot_receiver(bits_b, token_bytes(ctx.k), ctx.coins.fork(f"ot{round_no}"), round_no)
    xb = bytes_to_labels(b"".join(toks), ctx.k) if toks else np.zeros((0, 2), np.uint64)
    try:
        y_tok = evaluate(F, np.concatenate([xa, xb]))
    except GarbleError as exc:
        raise ProtocolError(f"round {round_no}: {exc}") from None
    if not dual:
        yield Send("GCY", labels_to_bytes(y_tok, ctx.k), round_no)
        return b""
    bits = decode(d, y_tok)
    if bits is None:
        return None
    return real.decode(v, bits)


# -- protocol objects ----------------------------------------------------------

class Protocol:
    """Init plus the two party programs."""
    needs_key = False
    name = "protocol"

    def init(self, coins: Coins):
        """Long-term inputs (Alice, Bob, oracle)."""
        if self.needs_key:
            key = keygen(coins)
            return None, key, key
        return None, None, None

    def oracle_fns(self) -> dict:
        return {}

    def final_check(self, y0, y1):
        pass


class PiSgx(Protocol):
    """One enclave round; ``dual`` sends y_bob to Bob encrypted."""
    needs_key = True

    def __init__(self, fn_id: str, fn, dual: bool = False):
        self.fn_id, self.fn, self.dual = fn_id, fn, dual
        self.name = "sgx-dual" if dual else "sgx"

    def oracle_fns(self):
        return {self.fn_id: self.fn}

    def alice(self, ctx, a):
        return sgx_alice(ctx, self.fn_id, a, 1, self.dual)

    def bob(self, ctx, b):
        return sgx_bob(ctx, b, 1, self.dual)


class PiGc(Protocol):
    """One garbled-circuit round; ``dual`` delivers the output to Bob."""

    def __init__(self, realization: CircuitRealization, dual: bool = False):
        self.realization, self.dual = realization, dual
        self.name = "gc-dual" if dual else "gc"

    def alice(self, ctx, a):
        return gc_alice(ctx, self.realization, a, 1, self.dual)

    def bob(self, ctx, b):
        return gc_bob(ctx, self.realization, b, 1, self.dual)


class PiHyb(Protocol):
    """Alternate enclave rounds and garbled-circuit rounds per the scheme.

    The enclave state carries over between odd rounds through the single
    enclave the run provisions; even rounds never touch it.
    """
    needs_key = True

    def __init__(self, scheme: PartitionScheme):
        self.scheme = scheme
        self.name = f"hybrid[{scheme.name}]"

    def oracle_fns(self):
        fns = {}
        for r in self.scheme.odd_rounds():
            if r.fn_id in fns and fns[r.fn_id] is not r.fn:
                raise ValueError(f"two odd rounds share the id {r.fn_id!r}")
            fns[r.fn_id] = r.fn
        return fns

    def alice(self, ctx, a):
        P = self.scheme
        vec = list(P.split_a(ctx.k, a, ctx.coins.fork("split")))
        if len(vec) != P.ell:
            raise ProtocolError("SpA returned a vector of the wrong length")
        prev = b""
        for j, rnd in enumerate(P.rounds, start=1):
            u = bytes(vec[j - 1]) + prev
            if isinstance(rnd, OddRound):
                prev = yield from sgx_alice(ctx, rnd.fn_id, u, j, rnd.dual)
            else:
                prev = yield from gc_alice(ctx, _real(rnd, j), u, j, rnd.dual)
        return prev

    def bob(self, ctx, b):
        P = self.scheme
        vec = list(P.split_b(ctx.k, b, ctx.coins.fork("split")))
        if len(vec) != P.ell:
            raise ProtocolError("SpB returned a vector of the wrong length")
        prev = b""
        for j, rnd in enumerate(P.rounds, start=1):
            v = bytes(vec[j - 1]) + prev
            if isinstance(rnd, OddRound):
                prev = yield from sgx_bob(ctx, v, j, rnd.dual)
            else:
                prev = yield from gc_bob(ctx, _real(rnd, j), v, j, rnd.dual)
            if prev is None:
                raise ProtocolError(f"round {j}: Bob's output failed to authenticate or decode")
        return prev

    def final_check(self, y0, y1):
        if y0 and y1:
            raise ProtocolError("both parties received final output; mixed-output schemes are not supported")


def _real(rnd: EvenRound, j: int) -> CircuitRealization:
    if rnd.realization is None:
        raise ProtocolError(f"round {j} has no circuit realization")
    return rnd.realization
