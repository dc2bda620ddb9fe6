"""Simulated enclave: a stateful oracle behind AES-GCM.

The enclave holds the long-term key and a persistent state.  A query carries
a round-function id, Alice's plaintext input and Bob's ciphertext; the enclave
decrypts, runs ``fn(a, b, st) -> (y_alice, y_bob, st')`` and commits ``st'``
only if everything succeeded.  There is no accessor for the key, and the state
is reachable only through ``_debug_state`` (test harness use).
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import ProtocolError
from .coins import Coins
from .symenc import Ciphertext, SymKey, dec, enc, round_ad

DEFAULT_BUDGET = 128 * 1024 * 1024


class EnclaveError(Exception):
    """Query rejected by the enclave (state unchanged)."""


class AuthError(EnclaveError):
    """Bob's ciphertext failed authentication."""


def _size_of(v) -> int:
    if isinstance(v, (bytes, bytearray)):
        return len(v)
    if isinstance(v, np.ndarray):
        return int(v.nbytes)
    nb = getattr(v, "nbytes", None)
    if nb is not None:
        return int(nb() if callable(nb) else nb)
    if isinstance(v, (int, float, bool)) or v is None:
        return 8
    if isinstance(v, str):
        return len(v.encode())
    if isinstance(v, (list, tuple)):
        return sum(_size_of(x) for x in v) + 8 * len(v)
    raise TypeError(f"cannot account memory for {type(v).__name__}")


class EnclaveState(Mapping):
    """Immutable key -> value store with a byte counter.

    ``coins`` is the oracle's randomness for the current query; it is not part
    of the stored content.
    """

    def __init__(self, items: dict | None = None, coins: Coins | None = None):
        self._items = dict(items or {})
        self._sizes = {k: _size_of(v) for k, v in self._items.items()}
        self.coins = coins

    def __getitem__(self, key):
        return self._items[key]

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    @property
    def nbytes(self) -> int:
        return sum(self._sizes.values())

    def set(self, key, value) -> "EnclaveState":
        items = dict(self._items)
        items[key] = value
        return EnclaveState(items, self.coins)

    def drop(self, key) -> "EnclaveState":
        items = dict(self._items)
        items.pop(key, None)
        return EnclaveState(items, self.coins)

    def with_coins(self, coins) -> "EnclaveState":
        st = EnclaveState.__new__(EnclaveState)
        st._items = self._items
        st._sizes = self._sizes
        st.coins = coins
        return st

    def __eq__(self, other):
        if not isinstance(other, EnclaveState):
            return NotImplemented
        if self._items.keys() != other._items.keys():
            return False
        for k, v in self._items.items():
            w = other._items[k]
            if isinstance(v, np.ndarray) or isinstance(w, np.ndarray):
                if not np.array_equal(v, w):
                    return False
            elif v != w:
                return False
        return True

    def __repr__(self):
        return f"EnclaveState(keys={sorted(map(str, self._items))}, nbytes={self.nbytes})"


EMPTY_STATE = EnclaveState()

RoundFn = Callable[[bytes, bytes, EnclaveState], tuple[bytes, bytes, EnclaveState]]


@dataclass(frozen=True)
class OracleQuery:
    fn_id: str
    alice_input: bytes
    bob_ciphertext: Ciphertext
    round: int = 1

    def to_bytes(self) -> bytes:
        fid = self.fn_id.encode()
        c = self.bob_ciphertext.to_bytes()
        return (len(fid).to_bytes(2, "big") + fid + self.round.to_bytes(4, "big")
                + len(self.alice_input).to_bytes(4, "big") + self.alice_input + c)

    @classmethod
    def from_bytes(cls, data: bytes) -> "OracleQuery":
        n = int.from_bytes(data[:2], "big")
        fid = data[2:2 + n].decode()
        pos = 2 + n
        rnd = int.from_bytes(data[pos:pos + 4], "big")
        la = int.from_bytes(data[pos + 4:pos + 8], "big")
        a = bytes(data[pos + 8:pos + 8 + la])
        return cls(fid, a, Ciphertext.from_bytes(data[pos + 8 + la:]), rnd)


@dataclass(frozen=True)
class OracleResponse:
    y_alice: bytes
    y_bob: Ciphertext | None  # set in dual mode

    def to_bytes(self) -> bytes:
        tail = self.y_bob.to_bytes() if self.y_bob is not None else b""
        return len(self.y_alice).to_bytes(4, "big") + self.y_alice + tail


class Enclave:
    def __init__(self, budget: int = DEFAULT_BUDGET, state: EnclaveState | None = None,
                 coins: Coins | None = None):
        self._key: SymKey | None = None
        self._fns: dict[str, RoundFn] = {}
        self._state = state if state is not None else EMPTY_STATE
        self.budget = budget
        self._coins = coins or Coins(None, "oracle")
        if self._state.nbytes > budget:
            raise EnclaveError("initial state exceeds the memory budget")

    def __repr__(self):
        return f"Enclave(provisioned={self._key is not None}, fns={sorted(self._fns)})"

    @property
    def provisioned(self) -> bool:
        return self._key is not None

    def provision(self, key: SymKey) -> "Enclave":
        if self._key is not None:
            raise EnclaveError("enclave already provisioned")
        if not isinstance(key, SymKey):
            raise TypeError("provision expects a SymKey")
        self._key = key
        return self

    def register_round_fn(self, fn_id: str, fn: RoundFn):
        if fn_id in self._fns:
            raise EnclaveError(f"round function {fn_id!r} already registered")
        self._fns[fn_id] = fn

    def has_fn(self, fn_id: str) -> bool:
        return fn_id in self._fns

    def query(self, q: OracleQuery, dual: bool = False) -> OracleResponse:
        if self._key is None:
            raise EnclaveError("enclave not provisioned")
        fn = self._fns.get(q.fn_id)
        if fn is None:
            raise EnclaveError(f"unknown round function {q.fn_id!r}")
        b = dec(self._key, q.bob_ciphertext, round_ad(q.round, "b2o"))
        if b is None:
            raise AuthError("Bob's ciphertext failed authentication")
        st = self._state.with_coins(self._coins.fork(f"round{q.round}"))
        y_a, y_b, st_new = fn(bytes(q.alice_input), b, st)
        if not isinstance(st_new, EnclaveState):
            raise EnclaveError("round function must return an EnclaveState")
        if st_new.nbytes > self.budget:
            raise EnclaveError(f"state of {st_new.nbytes} bytes exceeds the {self.budget}-byte budget")
        if not dual and y_b:
            raise ProtocolError("round function produced output for Bob outside dual mode")
        yb_ct = enc(self._key, y_b, self._coins, round_ad(q.round, "o2b")) if dual else None
        self._state = st_new.with_coins(None)
        return OracleResponse(bytes(y_a), yb_ct)

    def _debug_state(self) -> EnclaveState:
        """Test harness only: the committed state."""
        return self._state
