"""Running a protocol: Init, the two parties, the oracle, the transcript.

``run_protocol`` returns ``(y0, y1, transcript, oracle_state)``.  The
transcript records inputs, every frame in a canonical order, every oracle
interaction and the root of each party's coin stream, which is enough to
replay the run.  ``view`` projects it onto one party.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

from ..channel import Message, ProtocolError
from ..coins import Coins
from ..enclave import DEFAULT_BUDGET, EMPTY_STATE, Enclave, EnclaveState
from ..symenc import SymKey
from .parties import PartyContext, Protocol
from . import transport as _transport

PARTIES = ("alice", "bob")


class ProtocolRunError(RuntimeError):
    pass


def _blob(out: io.BytesIO, data: bytes):
    out.write(struct.pack(">Q", len(data)))
    out.write(data)


def _lt_bytes(x) -> bytes:
    if x is None:
        return b""
    if isinstance(x, SymKey):
        return x.key
    return bytes(x)


@dataclass
class OracleRecord:
    round: int
    query: bytes
    response: bytes


@dataclass
class Transcript:
    protocol: str
    k: int
    inputs: dict  # party -> input bytes
    longterm: dict  # alice / bob / oracle -> bytes
    messages: list[Message]
    oracle_log: list[OracleRecord]
    coins: dict  # party -> (root, label)

    def to_bytes(self) -> bytes:
        out = io.BytesIO()
        out.write(self.protocol.encode() + b"\x00")
        out.write(struct.pack(">H", self.k))
        for p in PARTIES:
            _blob(out, self.inputs[p])
        for p in ("alice", "bob", "oracle"):
            _blob(out, self.longterm[p])
        out.write(struct.pack(">Q", len(self.messages)))
        for m in self.messages:
            out.write(struct.pack(">QI", m.seq, m.round) + m.sender[0].encode() + m.kind.encode().ljust(4))
            _blob(out, m.body)
        out.write(struct.pack(">Q", len(self.oracle_log)))
        for r in self.oracle_log:
            out.write(struct.pack(">I", r.round))
            _blob(out, r.query)
            _blob(out, r.response)
        for p in sorted(self.coins):
            root, label = self.coins[p]
            _blob(out, p.encode())
            _blob(out, root)
            _blob(out, label.encode())
        return out.getvalue()

    def total_bytes(self) -> int:
        return sum(m.wire_bytes for m in self.messages)

    def bytes_by(self, sender: str) -> int:
        return sum(m.wire_bytes for m in self.messages if m.sender == sender)


@dataclass
class View:
    """What one party saw: its initial state, coins and the frames it touched."""
    party: str
    input: bytes
    longterm: bytes
    coins_root: bytes
    sent: list[Message]
    received: list[Message]
    oracle: list[OracleRecord] = field(default_factory=list)

    def to_bytes(self) -> bytes:
        out = io.BytesIO()
        out.write(self.party.encode() + b"\x00")
        _blob(out, self.input)
        _blob(out, self.longterm)
        _blob(out, self.coins_root)
        for group in (self.sent, self.received):
            out.write(struct.pack(">Q", len(group)))
            for m in group:
                out.write(struct.pack(">QI", m.seq, m.round) + m.kind.encode().ljust(4))
                _blob(out, m.body)
        out.write(struct.pack(">Q", len(self.oracle)))
        for r in self.oracle:
            _blob(out, r.query)
            _blob(out, r.response)
        return out.getvalue()


def view(pi: Transcript, party: str) -> View:
    if party not in PARTIES:
        raise ValueError(f"unknown party {party!r}")
    sent = [m for m in pi.messages if m.sender == party]
    received = [m for m in pi.messages if m.sender != party]
    oracle = list(pi.oracle_log) if party == "alice" else []
    return View(party, pi.inputs[party], pi.longterm[party], pi.coins[party][0], sent, received, oracle)


@dataclass
class RunResult:
    y0: bytes | None
    y1: bytes | None
    transcript: Transcript
    state: EnclaveState

    def __iter__(self):
        return iter((self.y0, self.y1, self.transcript, self.state))


def _coins(seed):
    return {p: Coins(seed, p) for p in ("alice", "bob", "oracle", "init")}


def run_protocol(proto: Protocol, k: int, a: bytes, b: bytes, longterm=None, transport: str = "inproc",
                 seed=0, state: EnclaveState = EMPTY_STATE, budget: int = DEFAULT_BUDGET,
                 coins: dict | None = None) -> RunResult:
    coins = coins or _coins(seed)
    if longterm is None:
        longterm = proto.init(coins["init"])
    l_alice, l_bob, l_oracle = longterm
    if isinstance(l_alice, SymKey):
        raise ProtocolRunError("Alice's long-term input must not be the enclave key")
    oracle_log: list[OracleRecord] = []
    enclave = None
    if proto.needs_key:
        enclave = Enclave(budget=budget, state=state, coins=coins["oracle"])
        enclave.provision(l_oracle)
        for fid, fn in proto.oracle_fns().items():
            enclave.register_round_fn(fid, fn)

    def oracle(q, dual):
        if enclave is None:
            raise ProtocolError("this protocol has no oracle")
        resp = enclave.query(q, dual)
        oracle_log.append(OracleRecord(q.round, q.to_bytes(), resp.to_bytes()))
        return resp

    actx = PartyContext("alice", k, coins["alice"], l_alice, oracle)
    bctx = PartyContext("bob", k, coins["bob"], l_bob, None)
    y0, y1, messages = _transport.run(transport, proto.alice(actx, bytes(a)), proto.bob(bctx, bytes(b)))
    proto.final_check(y0, y1)
    pi = Transcript(
        protocol=proto.name, k=k,
        inputs={"alice": bytes(a), "bob": bytes(b)},
        longterm={"alice": _lt_bytes(l_alice), "bob": _lt_bytes(l_bob), "oracle": _lt_bytes(l_oracle)},
        messages=messages, oracle_log=oracle_log,
        coins={p: (c.root, c.label) for p, c in coins.items()},
    )
    st = enclave._debug_state() if enclave is not None else state
    return RunResult(y0, y1, pi, st)


def replay(proto: Protocol, pi: Transcript, state: EnclaveState = EMPTY_STATE) -> RunResult:
    """Re-run from the transcript's inputs and coin roots."""
    coins = {p: Coins.from_root(root, label) for p, (root, label) in pi.coins.items()}
    lt = (None,
          SymKey(pi.longterm["bob"]) if pi.longterm["bob"] else None,
          SymKey(pi.longterm["oracle"]) if pi.longterm["oracle"] else None)
    return run_protocol(proto, pi.k, pi.inputs["alice"], pi.inputs["bob"], longterm=lt, state=state,
                        coins=coins)


def run_role(proto: Protocol, role: str, k: int, x: bytes, host: str, port: int, seed=0,
             key: SymKey | None = None, budget: int = DEFAULT_BUDGET):
    """Run one party in this process over TCP.  Alice listens and hosts the
    enclave; Bob connects.  Returns (output, messages seen as events)."""
    coins = _coins(seed)
    _, l_bob, l_oracle = (None, key, key) if key is not None else proto.init(coins["init"])
    if role == "alice":
        enclave = None
        if proto.needs_key:
            enclave = Enclave(budget=budget, coins=coins["oracle"])
            enclave.provision(l_oracle)
            for fid, fn in proto.oracle_fns().items():
                enclave.register_round_fn(fid, fn)
        ctx = PartyContext("alice", k, coins["alice"], None,
                           (lambda q, dual: enclave.query(q, dual)) if enclave else None)
        return _transport.serve_alice(proto.alice(ctx, bytes(x)), port, host)
    if role == "bob":
        ctx = PartyContext("bob", k, coins["bob"], l_bob, None)
        return _transport.connect_bob(proto.bob(ctx, bytes(x)), port, host)
    raise ValueError(f"role must be alice or bob, not {role!r}")
