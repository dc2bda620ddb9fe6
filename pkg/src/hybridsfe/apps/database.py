"""Key-value lookups where a few of Bob's queries are too sensitive for the enclave.

Alice owns an array of 64-bit entries.  Bob sends a list of queries; each is a
select or a set on an index and carries a sensitivity flag.

Round 1 (enclave, output to Bob): Alice's array is loaded into a hardened
store, Bob's ordinary queries run in order (a set answers the previous
value), the updated array goes back to Alice.  Round 2 (garbled circuit,
output to Bob): Alice's updated array against Bob's sensitive indices.  Bob
merges both answer lists into query order.  Sensitive queries are selects and
see the array after every ordinary query.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..circuits.generators import gen_select, index_bits, pack_words, unpack_words
from ..coins import Coins
from ..enclave import EnclaveState
from ..oram import MASK, make_store
from ..partition import CircuitRealization, EvenRound, OddRound, PartitionScheme, decode_fields, encode_fields
from ..protocol.parties import PiGc, PiHyb, PiSgx

SELECT, SET = 0, 1
ORDINARY, SENSITIVE = 0x4E, 0x53  # record tags, "N" and "S"
_QUERY = struct.Struct(">BBIQ")  # tag, kind, index, value
_ORD = struct.Struct(">IBIQ")  # position, kind, index, value
_SENS = struct.Struct(">II")  # position, index
_ANS = struct.Struct(">IQ")  # position, value


@dataclass(frozen=True)
class Query:
    index: int
    kind: int = SELECT
    value: int = 0
    sensitive: bool = False


@dataclass(frozen=True)
class DatabaseConfig:
    entries: int
    queries: int
    sensitive_fraction: float = 0.05
    set_fraction: float = 0.2  # among ordinary queries
    store: str = "tree"  # tree | linear | unblinded

    @property
    def sensitive_count(self) -> int:
        return int(round(self.queries * self.sensitive_fraction))

    @property
    def label(self) -> str:
        return f"Database{self.entries}x{self.queries}"


def encode_db(values) -> bytes:
    return b"".join(struct.pack(">Q", int(v) & MASK) for v in values)


def decode_db(data: bytes) -> list[int]:
    if len(data) % 8:
        raise ValueError("database length is not a multiple of 8 bytes")
    return [x[0] for x in struct.iter_unpack(">Q", data)]


def encode_queries(qs) -> bytes:
    return b"".join(_QUERY.pack(SENSITIVE if q.sensitive else ORDINARY, q.kind, q.index, q.value & MASK)
                    for q in qs)


def decode_queries(data: bytes) -> list[Query]:
    if len(data) % _QUERY.size:
        raise ValueError("query list has a ragged tail")
    out = []
    for tag, kind, idx, val in _QUERY.iter_unpack(data):
        if tag not in (ORDINARY, SENSITIVE) or kind not in (SELECT, SET):
            raise ValueError(f"bad query record (tag {tag:#x}, kind {kind})")
        out.append(Query(idx, kind, val, tag == SENSITIVE))
    return out


def decode_answers(data: bytes) -> list[int]:
    return decode_db(data)


def random_database(n: int, coins: Coins) -> list[int]:
    return [int(x) for x in np.frombuffer(coins.bytes(8 * n), dtype=">u8")]


def random_queries(cfg: DatabaseConfig, coins: Coins) -> list[Query]:
    q = cfg.queries
    order = np.argsort(np.frombuffer(coins.bytes(8 * q), dtype=np.uint64), kind="stable")
    hot = set(order[:cfg.sensitive_count].tolist())
    out = []
    for i in range(q):
        idx = coins.randbelow(cfg.entries)
        if i in hot:
            out.append(Query(idx, SELECT, 0, True))
        elif coins.randbelow(1000) < int(cfg.set_fraction * 1000):
            out.append(Query(idx, SET, int.from_bytes(coins.bytes(8), "big")))
        else:
            out.append(Query(idx))
    return out


def lookup_plain(db, queries) -> list[int]:
    """Array oracle with the scheme's ordering rule: ordinary queries in
    order, then sensitive selects on the resulting array."""
    arr = [int(v) for v in db]
    ans = [0] * len(queries)
    for i, q in enumerate(queries):
        if q.sensitive:
            continue
        ans[i] = arr[q.index]
        if q.kind == SET:
            arr[q.index] = q.value & MASK
    for i, q in enumerate(queries):
        if q.sensitive:
            ans[i] = arr[q.index]
    return ans


def database_plain(a: bytes, b: bytes) -> tuple[bytes, bytes]:
    return b"", encode_db(lookup_plain(decode_db(a), decode_queries(b)))


def _check(cfg: DatabaseConfig, qs: list[Query]):
    for i, q in enumerate(qs):
        if not 0 <= q.index < cfg.entries:
            raise ValueError(f"query {i}: index {q.index} outside [0, {cfg.entries})")
        if q.sensitive and q.kind != SELECT:
            raise ValueError(f"query {i}: sensitive queries must be selects")
    n_s = sum(q.sensitive for q in qs)
    if n_s != cfg.sensitive_count:
        raise ValueError(f"scheme is built for {cfg.sensitive_count} sensitive queries, got {n_s}")


def _merge(ordinary: bytes, sens_positions, sens_values, total: int) -> bytes:
    ans = [None] * total
    for pos, val in _ANS.iter_unpack(ordinary):
        ans[pos] = val
    for pos, val in zip(sens_positions, sens_values):
        ans[pos] = val
    if any(x is None for x in ans):
        raise ValueError("some queries were never answered")
    return encode_db(ans)


def enclave_round(cfg: DatabaseConfig, store_kind: str | None = None):
    kind = store_kind or cfg.store

    def fn(u: bytes, v: bytes, st: EnclaveState):
        db = decode_db(u)
        if len(db) != cfg.entries:
            raise ValueError(f"expected {cfg.entries} entries")
        store = make_store(kind, cfg.entries, st.coins.fork("store"), values=db)
        out = bytearray()
        for pos, k, idx, val in _ORD.iter_unpack(decode_fields(v)[0]):
            old = store.put(idx, val) if k == SET else store.get(idx)
            out += _ANS.pack(pos, old)
        snap = store.snapshot()
        return encode_db(snap), encode_fields([bytes(out)]), st.set("db", store)

    return fn


def _round2_parts(cfg, u, v):
    db = decode_db(u)
    sens, answered = decode_fields(v)
    pairs = list(_SENS.iter_unpack(sens))
    return db, [p for p, _ in pairs], [i for _, i in pairs], answered


def select_realization(cfg: DatabaseConfig) -> CircuitRealization:
    circuit = gen_select(cfg.entries, 64, cfg.sensitive_count)
    ib = index_bits(cfg.entries)

    def enc_a(u):
        return pack_words(decode_db(u), 64)

    def enc_b(v):
        _, _, idx, _ = _round2_parts(cfg, b"", v)
        return pack_words(idx, ib)

    def dec(v, bits):
        _, pos, _, answered = _round2_parts(cfg, b"", v)
        return _merge(answered, pos, unpack_words(bits, 64), cfg.queries)

    return CircuitRealization(circuit, enc_a, enc_b, dec)


def select_round_plain(cfg: DatabaseConfig):
    def fn(u, v):
        db, pos, idx, answered = _round2_parts(cfg, u, v)
        return b"", _merge(answered, pos, [db[i] for i in idx], cfg.queries)
    return fn


def build_database_scheme(cfg: DatabaseConfig, store_kind: str | None = None,
                          with_circuit: bool = True) -> PartitionScheme:
    def split_a(k, a, rng):
        if len(a) != 8 * cfg.entries:
            raise ValueError(f"Alice's database must hold {cfg.entries} entries")
        return [bytes(a), b""]

    def split_b(k, b, rng):
        qs = decode_queries(b)
        if len(qs) != cfg.queries:
            raise ValueError(f"expected {cfg.queries} queries, got {len(qs)}")
        _check(cfg, qs)
        ordinary = b"".join(_ORD.pack(i, q.kind, q.index, q.value) for i, q in enumerate(qs) if not q.sensitive)
        sens = b"".join(_SENS.pack(i, q.index) for i, q in enumerate(qs) if q.sensitive)
        return [encode_fields([ordinary]), encode_fields([sens])]

    real = select_realization(cfg) if with_circuit else None
    return PartitionScheme(
        rounds=(OddRound("database/ordinary", enclave_round(cfg, store_kind), dual=True),
                EvenRound(select_round_plain(cfg), real, dual=True)),
        split_a=split_a, split_b=split_b, name=cfg.label,
    )


def whole_enclave_fn(cfg: DatabaseConfig, store_kind: str):
    """All queries in the enclave (the enclave-only baselines)."""

    def fn(u, v, st):
        db = decode_db(u)
        qs = decode_queries(v)
        store = make_store(store_kind, cfg.entries, st.coins.fork("store"), values=db)
        ans = [0] * len(qs)
        for i, q in enumerate(qs):
            if not q.sensitive:
                ans[i] = store.put(q.index, q.value) if q.kind == SET else store.get(q.index)
        for i, q in enumerate(qs):
            if q.sensitive:
                ans[i] = store.get(q.index)
        return b"", encode_db(ans), st.set("db", store)

    return fn


def all_gc_realization(cfg: DatabaseConfig) -> CircuitRealization:
    """Every query as a garbled select (select-only query lists)."""
    circuit = gen_select(cfg.entries, 64, cfg.queries)
    ib = index_bits(cfg.entries)

    def enc_b(b):
        qs = decode_queries(b)
        if any(q.kind != SELECT for q in qs):
            raise ValueError("the all-garbled baseline only answers selects")
        return pack_words([q.index for q in qs], ib)

    return CircuitRealization(circuit, lambda a: pack_words(decode_db(a), 64), enc_b,
                              lambda b, bits: encode_db(unpack_words(bits, 64)))


@dataclass
class DatabaseApp:
    cfg: DatabaseConfig
    _schemes: dict = field(default_factory=dict)

    def scheme(self, store_kind: str | None = None) -> PartitionScheme:
        kind = store_kind or self.cfg.store
        if kind not in self._schemes:
            self._schemes[kind] = build_database_scheme(self.cfg, kind)
        return self._schemes[kind]

    def protocol(self, mode: str, store_kind: str | None = None):
        kind = store_kind or self.cfg.store
        if mode == "hybrid":
            return PiHyb(self.scheme(kind))
        if mode == "sgx":
            return PiSgx("database/all", whole_enclave_fn(self.cfg, kind), dual=True)
        if mode == "naive":
            return PiSgx("database/naive", whole_enclave_fn(self.cfg, "unblinded"), dual=True)
        if mode == "gc":
            return PiGc(all_gc_realization(self.cfg), dual=True)
        raise ValueError(f"unknown mode {mode!r}")

    def instance(self, seed, select_only: bool = False):
        c = Coins(seed, "database/instance")
        db = random_database(self.cfg.entries, c)
        cfg = self.cfg
        if select_only:
            cfg = DatabaseConfig(cfg.entries, cfg.queries, cfg.sensitive_fraction, 0.0, cfg.store)
        return db, random_queries(cfg, c)

    def inputs(self, db, queries) -> tuple[bytes, bytes]:
        return encode_db(db), encode_queries(queries)
