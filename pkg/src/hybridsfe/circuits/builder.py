"""Vectorized circuit construction.

Wire handles are numpy integer arrays; every call emits one batch of same-kind
gates, one per element.  Multi-bit words are arrays whose last axis holds the
bits LSB first (``word[..., 0]`` is the least significant bit).  The batch
structure is recorded and becomes the circuit's evaluation schedule.
"""

from __future__ import annotations

import numpy as np

from .core import AND, CONST, NOT, OR, XOR, Circuit, CircuitBudgetError

DEFAULT_MAX_GATES = 60_000_000


class CircuitBuilder:
    def __init__(self, alice_bits: int, bob_bits: int, max_gates: int = DEFAULT_MAX_GATES):
        self.alice_bits = alice_bits
        self.bob_bits = bob_bits
        self.max_gates = max_gates
        self.alice = np.arange(alice_bits, dtype=np.int64)
        self.bob = np.arange(alice_bits, alice_bits + bob_bits, dtype=np.int64)
        self._next = alice_bits + bob_bits
        self._ngates = 0
        self._chunks: list[tuple[int, np.ndarray, np.ndarray]] = []
        self._schedule: list[tuple[int, int, int]] = []
        self._zero = None
        self._one = None

    @property
    def gate_count(self) -> int:
        return self._ngates

    def _emit(self, kind, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        a, b = np.broadcast_arrays(a, b)
        shape = a.shape
        m = a.size
        if m == 0:
            return np.zeros(shape, dtype=np.int64)
        if self._ngates + m > self.max_gates:
            raise CircuitBudgetError(f"circuit would exceed {self.max_gates} gates")
        out = np.arange(self._next, self._next + m, dtype=np.int64)
        self._chunks.append((kind, a.ravel().astype(np.int32), b.ravel().astype(np.int32)))
        self._schedule.append((kind, self._ngates, self._ngates + m))
        self._next += m
        self._ngates += m
        return out.reshape(shape)

    # single-gate-kind batches
    def xor(self, a, b):
        return self._emit(XOR, a, b)

    def and_(self, a, b):
        return self._emit(AND, a, b)

    def or_(self, a, b):
        return self._emit(OR, a, b)

    def not_(self, a):
        return self._emit(NOT, a, 0)

    def const(self, bit: int, shape=()):
        if bit:
            if self._one is None:
                self._one = int(self._emit(CONST, 1, 0))
            w = self._one
        else:
            if self._zero is None:
                self._zero = int(self._emit(CONST, 0, 0))
            w = self._zero
        return np.full(shape, w, dtype=np.int64)

    def const_word(self, value, width: int):
        """Constant word(s); ``value`` may be an int or an array of ints."""
        vals = np.asarray(value, dtype=np.uint64)
        shifts = np.arange(width, dtype=np.uint64)
        bits = (vals[..., None] >> shifts) & np.uint64(1)
        one, zero = self.const(1), self.const(0)
        return np.where(bits == 1, one, zero).astype(np.int64)

    # word-level operations, all batched over the leading axes
    def add(self, x, y):
        """x + y mod 2^w."""
        x, y = np.broadcast_arrays(np.asarray(x), np.asarray(y))
        w = x.shape[-1]
        p = self.xor(x, y)
        s = np.empty_like(p)
        s[..., 0] = p[..., 0]
        if w == 1:
            return s
        c = self.and_(x[..., 0], y[..., 0])
        for i in range(1, w):
            if i == w - 1:
                s[..., i] = self.xor(p[..., i], c)
                break
            t = self.xor(np.stack([x[..., i], y[..., i], p[..., i]]), np.stack([c, c, c]))
            s[..., i] = t[2]
            c = self.xor(c, self.and_(t[0], t[1]))
        return s

    def lt(self, x, y):
        """Unsigned x < y, via the borrow chain of x - y."""
        x, y = np.broadcast_arrays(np.asarray(x), np.asarray(y))
        w = x.shape[-1]
        nx = self.not_(x)
        b = self.and_(nx[..., 0], y[..., 0])
        for i in range(1, w):
            t = self.xor(np.stack([nx[..., i], y[..., i]]), np.stack([b, b]))
            b = self.xor(b, self.and_(t[0], t[1]))
        return b

    def gt(self, x, y):
        return self.lt(y, x)

    def mux(self, s, x, y):
        """x where s is 1, else y; s broadcasts over the bit axis."""
        s = np.asarray(s)
        x, y = np.broadcast_arrays(np.asarray(x), np.asarray(y))
        d = self.xor(x, y)
        return self.xor(y, self.and_(s[..., None], d))

    def mux_bit(self, s, x, y):
        x, y = np.broadcast_arrays(np.asarray(x), np.asarray(y))
        return self.xor(y, self.and_(s, self.xor(x, y)))

    def reduce(self, op, bits):
        """Balanced tree reduction of ``op`` over the last axis."""
        bits = np.asarray(bits)
        while bits.shape[-1] > 1:
            n = bits.shape[-1]
            half = n // 2
            merged = op(bits[..., 0:2 * half:2], bits[..., 1:2 * half:2])
            if n % 2:
                merged = np.concatenate([merged, bits[..., -1:]], axis=-1)
            bits = merged
        return bits[..., 0]

    def eq(self, x, y):
        diff = self.xor(x, y)
        return self.not_(self.reduce(self.or_, diff))

    def eq_const(self, x, value: int):
        """x == value for a public constant (batched over leading axes of x)."""
        x = np.asarray(x)
        w = x.shape[-1]
        flip = np.array([((value >> i) & 1) ^ 1 for i in range(w)], dtype=bool)
        lits = x.copy()
        if flip.any():
            lits[..., flip] = self.not_(x[..., flip])
        return self.reduce(self.and_, lits)

    def build(self, outputs, validate: bool = False) -> Circuit:
        outputs = np.asarray(outputs, dtype=np.int64).ravel()
        if self._chunks:
            kinds = np.concatenate([np.full(a.size, k, dtype=np.int8) for k, a, _ in self._chunks])
            in1 = np.concatenate([a for _, a, _ in self._chunks])
            in2 = np.concatenate([b for _, _, b in self._chunks])
        else:
            kinds = np.zeros(0, np.int8)
            in1 = in2 = np.zeros(0, np.int32)
        n_in = self.alice_bits + self.bob_bits
        outs = np.arange(n_in, self._next, dtype=np.int32)
        return Circuit(self._next, self.alice_bits, self.bob_bits, outputs, kinds, in1, in2, outs,
                       schedule=self._schedule, validate=validate)
