"""Projective garbling: point-and-permute, free-XOR, 3-row reduction.

Labels live in ``(wires, 2)`` uint64 arrays (low word, high word), truncated
to k bits.  The permute bit of a token is the LSB of its low word and the
global offset has that bit set, so the two tokens of a wire always carry
opposite permute bits.

Row hashing uses a fixed-key AES permutation,
``H(A, B, T) = pi(K) ^ K`` with ``K = 2A ^ 4B ^ T`` (doubling in GF(2^128)),
and a second block under a domain constant when more than 128 bits are
needed.  Each AND/OR gate stores three rows of ``k/8 + 1`` bytes: the output
label plus a check byte equal to its permute bit.  The row for permute index
(0, 0) is implicit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .circuits.core import AND, CONST, NOT, OR, XOR, Circuit, as_bits
from .coins import Coins

SUPPORTED_K = (80, 128)
_FIXED_KEY = hashlib.sha256(b"hybridsfe fixed-key permutation").digest()[:16]
_ROW_CONST = np.uint64(0x5A5A5A5A5A5A5A5A)
_DEC_DOMAIN = np.uint64(0xDEC0DE0000000000)
_U1 = np.uint64(1)
_U63 = np.uint64(63)
_RED = np.uint64(0x87)


class GarbleError(ValueError):
    """Bad parameters or a garbled table that fails its integrity check."""


@lru_cache(maxsize=1)
def _aes():
    return Cipher(algorithms.AES(_FIXED_KEY), modes.ECB()).encryptor()


def _perm(blocks: np.ndarray) -> np.ndarray:
    raw = _aes().update(np.ascontiguousarray(blocks).tobytes())
    return np.frombuffer(raw, dtype=np.uint64).reshape(-1, 2)


def _dbl(x: np.ndarray) -> np.ndarray:
    lo, hi = x[:, 0], x[:, 1]
    out = np.empty_like(x)
    out[:, 1] = (hi << _U1) | (lo >> _U63)
    out[:, 0] = (lo << _U1) ^ ((hi >> _U63) * _RED)
    return out


def _mask(k):
    return np.uint64(0xFFFFFFFFFFFFFFFF) if k == 128 else np.uint64((1 << (k - 64)) - 1)


def _row_hash(a, b, tweak, k):
    """Returns (labels (m,2) truncated to k bits, check byte (m,))."""
    key = _dbl(a) ^ _dbl(_dbl(b))
    key[:, 0] ^= tweak
    m = key.shape[0]
    if k == 128:
        key2 = key.copy()
        key2[:, 1] ^= _ROW_CONST
        both = np.concatenate([key, key2])
        h = _perm(both) ^ both
        lab = h[:m].copy()
        extra = (h[m:, 0] & np.uint64(0xFF)).astype(np.uint8)
    else:
        h = _perm(key) ^ key
        lab = h.copy()
        extra = ((h[:, 1] >> np.uint64(k - 64)) & np.uint64(0xFF)).astype(np.uint8)
        lab[:, 1] &= _mask(k)
    return lab, extra


def _dec_hash(tokens, positions):
    key = _dbl(tokens)
    key[:, 0] ^= positions.astype(np.uint64)
    key[:, 1] ^= _DEC_DOMAIN
    return (_perm(key) ^ key)[:, 0].copy()


def _random_labels(coins: Coins, n: int, k: int) -> np.ndarray:
    lab = np.frombuffer(coins.bytes(16 * n), dtype=np.uint64).reshape(n, 2).copy()
    lab[:, 1] &= _mask(k)
    return lab


def token_bytes(k: int) -> int:
    return k // 8 + 1


def labels_to_bytes(labels: np.ndarray, k: int) -> bytes:
    """Serialize tokens as label (k/8 bytes, little-endian) + permute byte."""
    labels = np.ascontiguousarray(labels, dtype=np.uint64).reshape(-1, 2)
    n = labels.shape[0]
    raw = labels.astype("<u8").view(np.uint8).reshape(n, 16)
    out = np.empty((n, token_bytes(k)), dtype=np.uint8)
    out[:, :k // 8] = raw[:, :k // 8]
    out[:, -1] = raw[:, 0] & 1
    return out.tobytes()


def bytes_to_labels(data: bytes, k: int) -> np.ndarray:
    tb = token_bytes(k)
    if len(data) % tb:
        raise GarbleError(f"token data length {len(data)} is not a multiple of {tb}")
    n = len(data) // tb
    raw = np.frombuffer(data, dtype=np.uint8).reshape(n, tb)
    full = np.zeros((n, 16), dtype=np.uint8)
    full[:, :k // 8] = raw[:, :k // 8]
    lab = full.view("<u8").astype(np.uint64).reshape(n, 2)
    if n and np.any((lab[:, 0] & _U1).astype(np.uint8) != raw[:, -1]):
        raise GarbleError("token permute byte disagrees with its label")
    return lab


@dataclass(frozen=True)
class WireToken:
    label: bytes
    permute_bit: int

    @classmethod
    def from_words(cls, words, k):
        data = labels_to_bytes(np.asarray(words).reshape(1, 2), k)
        return cls(data[:-1], data[-1])

    def to_bytes(self) -> bytes:
        return self.label + bytes([self.permute_bit])


@dataclass(frozen=True)
class EncodingInfo:
    """Both tokens of every input wire; ``split`` is Alice's bit count."""
    k: int
    zero: np.ndarray   # (n, 2) labels for bit 0
    delta: np.ndarray  # (2,)
    split: int

    @property
    def n_inputs(self) -> int:
        return self.zero.shape[0]

    def pair_labels(self) -> np.ndarray:
        """(n, 2, 2): [wire, bit] -> label words."""
        return np.stack([self.zero, self.zero ^ self.delta], axis=1)

    @property
    def token_pairs(self) -> list[tuple[WireToken, WireToken]]:
        p = self.pair_labels()
        return [(WireToken.from_words(p[i, 0], self.k), WireToken.from_words(p[i, 1], self.k))
                for i in range(p.shape[0])]


@dataclass(frozen=True)
class DecodingInfo:
    hashes: np.ndarray  # (n_out, 2) uint64: decode hash of the 0 token and the 1 token

    def to_bytes(self) -> bytes:
        return np.ascontiguousarray(self.hashes).astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DecodingInfo":
        if len(data) % 16:
            raise GarbleError("decoding info length is not a multiple of 16")
        return cls(np.frombuffer(data, dtype="<u8").astype(np.uint64).reshape(-1, 2))


class GarbledCircuit:
    """Garbled tables of one circuit.  ``tables`` is (gates, 3, k/8+1) bytes."""

    def __init__(self, circuit: Circuit, k: int, tables: np.ndarray, const_tokens: np.ndarray):
        self.circuit = circuit
        self.k = k
        self.tables = tables
        self.const_tokens = const_tokens

    @property
    def table_rows(self) -> int:
        return 3 * self.tables.shape[0]

    def nbytes(self) -> int:
        return self.tables.nbytes + self.const_tokens.shape[0] * token_bytes(self.k)


def circuit_digest(c: Circuit) -> bytes:
    cached = getattr(c, "_digest", None)
    if cached is None:
        h = hashlib.sha256()
        h.update(np.array([c.wire_count, c.alice_input_bits, c.bob_input_bits], dtype="<i8").tobytes())
        for arr in (c.output_wires, c.kinds, c.in1, c.in2, c.outs):
            h.update(np.ascontiguousarray(arr).tobytes())
        cached = h.digest()
        c._digest = cached
    return cached


def _table_offsets(c: Circuit) -> np.ndarray:
    cached = getattr(c, "_tbl_off", None)
    if cached is None:
        garbled = (c.kinds == AND) | (c.kinds == OR)
        cached = np.concatenate([[0], np.cumsum(garbled)]).astype(np.int64)
        c._tbl_off = cached
    return cached


def _truth(kind, va, vb):
    return va & vb if kind == AND else va | vb


def garble(c: Circuit, k: int = 128, rng: Coins | None = None, return_labels: bool = False):
    """Returns (F, e, d); with return_labels also the zero label of every wire."""
    if k not in SUPPORTED_K:
        raise GarbleError(f"unsupported security parameter k={k}; use one of {SUPPORTED_K}")
    if rng is None:
        rng = Coins(None, "garble")
    n_in = c.input_count
    delta = _random_labels(rng, 1, k)[0]
    delta[0] |= _U1
    labels = np.empty((c.wire_count, 2), dtype=np.uint64)
    labels[:n_in] = _random_labels(rng, n_in, k)
    tbl_off = _table_offsets(c)
    n_tables = int(tbl_off[-1])
    tb = token_bytes(k)
    tables = np.empty((n_tables, 3, tb), dtype=np.uint8)
    const_tokens = []
    kinds, in1, in2, outs = c.kinds, c.in1, c.in2, c.outs
    lw = k // 8

    for kind, s, e in c.schedule:
        o = outs[s:e]
        if kind == XOR:
            labels[o] = labels[in1[s:e]] ^ labels[in2[s:e]]
        elif kind == NOT:
            labels[o] = labels[in1[s:e]] ^ delta
        elif kind == CONST:
            z = _random_labels(rng, e - s, k)
            labels[o] = z
            vals = in1[s:e].astype(np.uint64)
            const_tokens.append(z ^ (vals[:, None] * delta))
        else:
            m = e - s
            a0 = labels[in1[s:e]]
            b0 = labels[in2[s:e]]
            pa = a0[:, 0] & _U1
            pb = b0[:, 0] & _U1
            a_p0 = a0 ^ (pa[:, None] * delta)  # token whose permute bit is 0
            b_p0 = b0 ^ (pb[:, None] * delta)
            a_p1 = a_p0 ^ delta
            b_p1 = b_p0 ^ delta
            tweak = np.arange(s, e, dtype=np.uint64)
            A = np.concatenate([a_p0, a_p0, a_p1, a_p1])
            B = np.concatenate([b_p0, b_p1, b_p0, b_p1])
            T = np.concatenate([tweak, tweak, tweak, tweak])
            h, extra = _row_hash(A, B, T, k)
            h = h.reshape(4, m, 2)
            extra = extra.reshape(4, m)
            va0 = pa.astype(np.uint8)
            vb0 = pb.astype(np.uint8)
            v00 = _truth(kind, va0, vb0)
            c0 = h[0] ^ (v00.astype(np.uint64)[:, None] * delta)
            labels[o] = c0
            rows = np.empty((m, 3, tb), dtype=np.uint8)
            for r, (i, j) in enumerate(((0, 1), (1, 0), (1, 1)), start=1):
                v = _truth(kind, va0 ^ i, vb0 ^ j)
                cr = c0 ^ (v.astype(np.uint64)[:, None] * delta)
                enc = h[r] ^ cr
                rows[:, r - 1, :lw] = enc.astype("<u8").view(np.uint8).reshape(m, 16)[:, :lw]
                rows[:, r - 1, lw] = extra[r] ^ (cr[:, 0] & _U1).astype(np.uint8)
            lo, hi = tbl_off[s], tbl_off[s] + m
            tables[lo:hi] = rows

    const_arr = np.concatenate(const_tokens) if const_tokens else np.zeros((0, 2), np.uint64)
    F = GarbledCircuit(c, k, tables, const_arr)
    e = EncodingInfo(k, labels[:n_in].copy(), delta.copy(), c.alice_input_bits)
    outw = c.output_wires
    pos = np.arange(outw.size, dtype=np.uint64)
    z = labels[outw]
    d = DecodingInfo(np.stack([_dec_hash(z, pos), _dec_hash(z ^ delta, pos)], axis=1))
    if return_labels:
        return F, e, d, labels
    return F, e, d


def encode(e: EncodingInfo, x) -> np.ndarray:
    x = as_bits(x, e.n_inputs)
    return e.zero ^ (x.astype(np.uint64)[:, None] * e.delta)


def encode_a(e: EncodingInfo, a) -> np.ndarray:
    a = as_bits(a, e.split)
    return e.zero[:e.split] ^ (a.astype(np.uint64)[:, None] * e.delta)


def encode_b(e: EncodingInfo, b) -> np.ndarray:
    b = as_bits(b, e.n_inputs - e.split)
    return e.zero[e.split:] ^ (b.astype(np.uint64)[:, None] * e.delta)


def evaluate(F: GarbledCircuit, X, return_wires: bool = False) -> np.ndarray:
    c, k = F.circuit, F.k
    X = np.asarray(X, dtype=np.uint64).reshape(-1, 2)
    if X.shape[0] != c.input_count:
        raise GarbleError(f"expected {c.input_count} input tokens, got {X.shape[0]}")
    tok = np.empty((c.wire_count, 2), dtype=np.uint64)
    tok[:c.input_count] = X
    tbl_off = _table_offsets(c)
    kinds, in1, in2, outs = c.kinds, c.in1, c.in2, c.outs
    lw = k // 8
    tb = token_bytes(k)
    cpos = 0
    # the table rows as words, padded so the check byte can be read alongside
    for kind, s, e in c.schedule:
        o = outs[s:e]
        if kind == XOR:
            tok[o] = tok[in1[s:e]] ^ tok[in2[s:e]]
        elif kind == NOT:
            tok[o] = tok[in1[s:e]]
        elif kind == CONST:
            m = e - s
            if cpos + m > F.const_tokens.shape[0]:
                raise GarbleError("garbled circuit is missing constant tokens")
            tok[o] = F.const_tokens[cpos:cpos + m]
            cpos += m
        else:
            m = e - s
            A = tok[in1[s:e]]
            B = tok[in2[s:e]]
            r = ((A[:, 0] & _U1) << _U1 | (B[:, 0] & _U1)).astype(np.int64)
            h, extra = _row_hash(A, B, np.arange(s, e, dtype=np.uint64), k)
            nz = r != 0
            if nz.any():
                rows = F.tables[tbl_off[s]:tbl_off[s] + m]
                sel = rows[np.flatnonzero(nz), r[nz] - 1]  # (z, tb)
                full = np.zeros((sel.shape[0], 16), dtype=np.uint8)
                full[:, :lw] = sel[:, :lw]
                words = full.view("<u8").astype(np.uint64).reshape(-1, 2)
                cz = h[nz] ^ words
                check = extra[nz] ^ sel[:, lw]
                if np.any(check != (cz[:, 0] & _U1).astype(np.uint8)):
                    raise GarbleError(f"garbled row failed its check in gates {s}..{e}")
                h[nz] = cz
            tok[o] = h
    if return_wires:
        return tok
    return tok[c.output_wires].copy()


def decode(d: DecodingInfo, Y) -> np.ndarray | None:
    Y = np.asarray(Y, dtype=np.uint64).reshape(-1, 2)
    if Y.shape[0] != d.hashes.shape[0]:
        raise GarbleError(f"expected {d.hashes.shape[0]} output tokens, got {Y.shape[0]}")
    if Y.shape[0] == 0:
        return np.zeros(0, np.uint8)
    h = _dec_hash(Y, np.arange(Y.shape[0], dtype=np.uint64))
    is0 = h == d.hashes[:, 0]
    is1 = h == d.hashes[:, 1]
    if not np.all(is0 ^ is1):
        return None
    return is1.astype(np.uint8)


# --- wire serialization ----------------------------------------------------

def serialize_garbled(F: GarbledCircuit) -> bytes:
    """digest(32) | k(2) | n_tables(8) | n_const(8) | tables | const tokens."""
    head = circuit_digest(F.circuit) + F.k.to_bytes(2, "big")
    head += F.tables.shape[0].to_bytes(8, "big") + F.const_tokens.shape[0].to_bytes(8, "big")
    return head + F.tables.tobytes() + labels_to_bytes(F.const_tokens, F.k)


def deserialize_garbled(data, c: Circuit) -> GarbledCircuit:
    data = memoryview(data)
    if len(data) < 50:
        raise GarbleError("garbled circuit record too short")
    if bytes(data[:32]) != circuit_digest(c):
        raise GarbleError("garbled circuit was built for a different circuit")
    k = int.from_bytes(data[32:34], "big")
    if k not in SUPPORTED_K:
        raise GarbleError(f"unsupported k={k} in garbled circuit")
    nt = int.from_bytes(data[34:42], "big")
    nc = int.from_bytes(data[42:50], "big")
    tb = token_bytes(k)
    need = 50 + nt * 3 * tb + nc * tb
    if len(data) != need or nt != int(_table_offsets(c)[-1]):
        raise GarbleError("garbled circuit record has the wrong length")
    tables = np.frombuffer(data, dtype=np.uint8, count=nt * 3 * tb, offset=50).reshape(nt, 3, tb)
    consts = bytes_to_labels(bytes(data[50 + nt * 3 * tb:]), k)
    return GarbledCircuit(c, k, tables, consts)
