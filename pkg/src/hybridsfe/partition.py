"""Even-odd partitioning schemes and their reference executor.

A scheme splits each party's input into an l-vector and evaluates round
functions f_1..f_l.  Odd rounds run in the enclave and see its state; even
rounds are stateless and carry a circuit realization for garbling.  Round j
gets ``u = a[j] + y0[j-1]`` and ``v = b[j] + y1[j-1]`` (plain byte
concatenation; apps use the field codec below so concatenation means
appending fields).  Rounds are 1-indexed in names and messages.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .circuits.core import Circuit, eval_plain
from .coins import Coins
from .enclave import EMPTY_STATE, EnclaveState

_LEN = struct.Struct(">I")


def encode_fields(fields) -> bytes:
    out = bytearray()
    for f in fields:
        f = bytes(f)
        out += _LEN.pack(len(f)) + f
    return bytes(out)


def decode_fields(data: bytes) -> list[bytes]:
    data = bytes(data)
    out, pos = [], 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ValueError("truncated field header")
        (n,) = _LEN.unpack_from(data, pos)
        pos += 4
        if pos + n > len(data):
            raise ValueError("truncated field body")
        out.append(data[pos:pos + n])
        pos += n
    return out


class RoundError(RuntimeError):
    def __init__(self, round_no: int, cause: BaseException):
        super().__init__(f"round {round_no} failed: {cause!r}")
        self.round_no = round_no
        self.cause = cause


@dataclass(frozen=True)
class CircuitRealization:
    """How an even round is computed by a garbled circuit.

    ``encode_a(u)``/``encode_b(v)`` give the circuit's input bits; the party
    that receives the circuit output turns it into its round output with
    ``decode(own_input, bits)``.
    """
    circuit: Circuit
    encode_a: Callable[[bytes], np.ndarray]
    encode_b: Callable[[bytes], np.ndarray]
    decode: Callable[[bytes, np.ndarray], bytes]

    def evaluate_plain(self, u: bytes, v: bytes, to_bob: bool):
        bits = eval_plain(self.circuit, self.encode_a(u), self.encode_b(v))
        own = v if to_bob else u
        y = self.decode(own, bits)
        return (b"", y) if to_bob else (y, b"")


@dataclass(frozen=True)
class OddRound:
    fn_id: str
    fn: Callable[[bytes, bytes, EnclaveState], tuple[bytes, bytes, EnclaveState]]
    dual: bool = False  # Bob receives (encrypted) output


@dataclass(frozen=True)
class EvenRound:
    fn: Callable[[bytes, bytes], tuple[bytes, bytes]]
    realization: CircuitRealization | None = None
    dual: bool = False  # output decoded by Bob instead of Alice


@dataclass(frozen=True)
class PartitionScheme:
    rounds: tuple
    split_a: Callable[[int, bytes, Coins], list]
    split_b: Callable[[int, bytes, Coins], list]
    name: str = "scheme"
    in_domain: Callable[[bytes, bytes], bool] | None = None

    def __post_init__(self):
        if not self.rounds:
            raise ValueError("a scheme needs at least one round")
        for j, r in enumerate(self.rounds, start=1):
            want = OddRound if j % 2 else EvenRound
            if not isinstance(r, want):
                raise TypeError(f"round {j} must be an {want.__name__}")

    @property
    def ell(self) -> int:
        return len(self.rounds)

    def odd_rounds(self):
        return [r for j, r in enumerate(self.rounds, start=1) if j % 2]

    def final_receiver(self) -> str:
        last = self.rounds[-1]
        return "bob" if last.dual else "alice"


@dataclass
class ExecResult:
    a: list
    b: list
    y0: list
    y1: list
    state: EnclaveState = field(default=EMPTY_STATE)

    @property
    def outputs(self) -> tuple[bytes, bytes]:
        return self.y0[-1], self.y1[-1]


def split_coins(seed) -> tuple[Coins, Coins]:
    """The splitter streams used by both the reference and the live protocol."""
    return Coins(seed, "alice").fork("split"), Coins(seed, "bob").fork("split")


def oracle_coins(seed) -> Coins:
    return Coins(seed, "oracle")


def round_inputs(a_vec, b_vec, y0, y1, j):
    """Round j inputs (1-based): own share for j, then own output of round j-1."""
    u = bytes(a_vec[j - 1]) + (y0[j - 2] if j > 1 else b"")
    v = bytes(b_vec[j - 1]) + (y1[j - 2] if j > 1 else b"")
    return u, v


def split_inputs(P: PartitionScheme, k: int, a: bytes, b: bytes, seed):
    ca, cb = split_coins(seed)
    a_vec = list(P.split_a(k, a, ca))
    b_vec = list(P.split_b(k, b, cb))
    if len(a_vec) != P.ell or len(b_vec) != P.ell:
        raise ValueError(f"splitters must return {P.ell}-vectors")
    return a_vec, b_vec


def exec_reference(P: PartitionScheme, k: int, a: bytes, b: bytes, seed=0,
                   state: EnclaveState = EMPTY_STATE) -> ExecResult:
    """Plain execution of the scheme: the oracle for the live protocol."""
    if P.in_domain is not None and not P.in_domain(a, b):
        raise ValueError("input outside the scheme's domain")
    a_vec, b_vec = split_inputs(P, k, a, b, seed)
    oc = oracle_coins(seed)
    y0, y1 = [], []
    st = state
    for j, rnd in enumerate(P.rounds, start=1):
        u, v = round_inputs(a_vec, b_vec, y0, y1, j)
        try:
            if j % 2:
                o0, o1, st = rnd.fn(u, v, st.with_coins(oc.fork(f"round{j}")))
                st = st.with_coins(None)
            else:
                o0, o1 = rnd.fn(u, v)
        except Exception as exc:
            raise RoundError(j, exc) from exc
        y0.append(bytes(o0))
        y1.append(bytes(o1))
    return ExecResult(a_vec, b_vec, y0, y1, st)


@dataclass
class CorrectnessReport:
    passed: bool
    trials: int
    counterexample: dict | None = None

    def __bool__(self):
        return self.passed


def check_correct(P: PartitionScheme, f_plain, sampler, trials: int = 100, seed=0, k: int = 128):
    """Run exec_reference on sampled inputs; stop at the first mismatch.

    ``sampler(coins)`` returns (a, b); ``f_plain(a, b)`` returns (y0, y1).
    """
    rng = Coins(seed, "check")
    for t in range(trials):
        a, b = sampler(rng)
        try:
            got = exec_reference(P, k, a, b, seed=f"{seed}/{t}").outputs
        except Exception as exc:  # a crashing round is a failure, not a test error
            return CorrectnessReport(False, t + 1, {"a": a, "b": b, "error": repr(exc)})
        want = tuple(f_plain(a, b))
        if got != want:
            return CorrectnessReport(False, t + 1, {"a": a, "b": b, "got": got, "want": want})
    return CorrectnessReport(True, trials)


def make_identity(f_plain, fn_id: str = "f", dual: bool = False) -> PartitionScheme:
    """The 1-round scheme whose only round is f itself (state passed through)."""

    def round_fn(u, v, st):
        y0, y1 = f_plain(u, v)
        return y0, y1, st

    return PartitionScheme(
        rounds=(OddRound(fn_id, round_fn, dual),),
        split_a=lambda k, a, rng: [a],
        split_b=lambda k, b, rng: [b],
        name=f"identity[{fn_id}]",
    )
