"""Hardened memory for enclave round functions.

Branch-free word primitives (``bf_*``) work on Python ints and on numpy
uint64 arrays alike.  Three stores sit behind one small interface:

* ``LinearStore``: every access scans all n slots with bf_select.
* ``UnblindedStore``: plain indexing, the leaky baseline.
* ``OramForest``: two treaps in one slot array.  Each query walks both trees
  to a leaf for the real key plus ceil(log2 n) random keys per tree, then
  pulls every node on the real paths out into a contiguous buffer, mixes the
  buffer with an O(M^2) select-only shuffle and reinserts each node into a
  random tree at a fresh slot.

Every phase is padded with random dummy accesses to a fixed budget so a
query always touches the same number of slots.  A tree deeper than the cap
raises ``OramOverflow`` instead of leaking through a longer trace.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .coins import Coins

WORD_BITS = 64
MASK = (1 << WORD_BITS) - 1
_TOP = WORD_BITS - 1


# -- branch-free primitives ----------------------------------------------------

def _is_arr(*xs):
    return any(isinstance(x, np.ndarray) for x in xs)


def _u64(x):
    return np.asarray(x, dtype=np.uint64) if _is_arr(x) else int(x) & MASK


def make_mask(t):
    """All ones if bit 0 of t is set, else all zeros."""
    if _is_arr(t):
        return np.uint64(0) - (np.asarray(t, dtype=np.uint64) & np.uint64(1))
    return (-(int(t) & 1)) & MASK


make_same_as_bit0 = make_mask


def bf_select(t, x, y):
    """x if t else y, as y ^ (mask(t) & (x ^ y))."""
    if _is_arr(t, x, y):
        x, y = _u64(x), _u64(y)
        return y ^ (make_mask(t) & (x ^ y))
    x, y = _u64(x), _u64(y)
    return y ^ (make_mask(t) & (x ^ y))


def bf_eq(a, b):
    if _is_arr(a, b):
        d = _u64(a) ^ _u64(b)
        return (np.uint64(1) ^ (((d | (np.uint64(0) - d)) >> np.uint64(_TOP)) & np.uint64(1))).astype(np.uint8)
    d = _u64(a) ^ _u64(b)
    return 1 ^ ((((d | (-d & MASK)) & MASK) >> _TOP) & 1)


def bf_lt(a, b):
    """Unsigned a < b from the borrow out of a - b."""
    if _is_arr(a, b):
        a, b = _u64(a), _u64(b)
        borrow = (~a & b) | (~(a ^ b) & (a - b))
        return ((borrow >> np.uint64(_TOP)) & np.uint64(1)).astype(np.uint8)
    a, b = _u64(a), _u64(b)
    borrow = ((~a & b) | (~(a ^ b) & ((a - b) & MASK))) & MASK
    return (borrow >> _TOP) & 1


def bf_min_update(cur, cand):
    return bf_select(bf_lt(cand, cur), cand, cur)


# -- access traces ---------------------------------------------------------------

class OramOverflow(RuntimeError):
    """A tree grew past the padded depth; the query is refused rather than leaked."""


@dataclass
class TraceRecorder:
    """Per-query slot accesses.  With ``keep=False`` only counts are kept."""
    keep: bool = True
    counts: list = field(default_factory=list)
    _slots: list = field(default_factory=list)
    _ops: list = field(default_factory=list)
    _steps: list = field(default_factory=list)
    _cur: int = 0

    def begin(self):
        self._cur = 0

    def end(self):
        self.counts.append(self._cur)
        self._cur = 0

    def add(self, slots, op: str):
        n = len(slots)
        self._cur += n
        if self.keep and n:
            self._slots.append(np.asarray(slots, dtype=np.int64))
            self._ops.append(np.full(n, ord(op[0]), dtype=np.uint8))
            self._steps.append(np.full(n, len(self.counts), dtype=np.int64))

    def add_count(self, n: int):
        self._cur += n

    def arrays(self):
        if not self._slots:
            z = np.zeros(0, np.int64)
            return z, z, np.zeros(0, np.uint8)
        return np.concatenate(self._steps), np.concatenate(self._slots), np.concatenate(self._ops)

    def write_csv(self, path_or_file):
        steps, slots, ops = self.arrays()
        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(["step", "slot", "op"])
            for s, sl, o in zip(steps.tolist(), slots.tolist(), ops.tolist()):
                w.writerow([s, sl, chr(o)])
        finally:
            if own:
                fh.close()


# -- stores ---------------------------------------------------------------------

class Store:
    kind = "store"
    n: int
    trace: TraceRecorder

    def get(self, key: int) -> int:
        return self.access(key, 0, write=False)

    def put(self, key: int, value: int) -> int:
        """Write and return the previous value."""
        return self.access(key, value, write=True)

    def access(self, key, value, write):
        raise NotImplementedError

    def snapshot(self) -> list[int]:
        """Every value in index order, read with one full pass."""
        raise NotImplementedError

    @property
    def nbytes(self) -> int:
        raise NotImplementedError

    def _check_key(self, key):
        # the bound n is public
        if not 0 <= int(key) < self.n:
            raise IndexError(f"key {key} outside [0, {self.n})")


class UnblindedStore(Store):
    kind = "unblinded"

    def __init__(self, n: int, coins: Coins | None = None, keep_trace: bool = True, values=None):
        self.n = n
        self.values = [int(v) & MASK for v in values] if values is not None else [0] * n
        if len(self.values) != n:
            raise ValueError("initial values do not match n")
        self.trace = TraceRecorder(keep_trace)

    @property
    def nbytes(self) -> int:
        return 8 * self.n

    def snapshot(self):
        return list(self.values)

    def access(self, key, value, write):
        self._check_key(key)
        self.trace.begin()
        self.trace.add([key], "w" if write else "r")
        old = self.values[key]
        if write:
            self.values[key] = int(value) & MASK
        self.trace.end()
        return old


class LinearStore(Store):
    kind = "linear"

    def __init__(self, n: int, coins: Coins | None = None, keep_trace: bool = True, values=None):
        self.n = n
        self.values = np.zeros(n, dtype=np.uint64)
        if values is not None:
            self.values[:] = [int(v) & MASK for v in values]
        self._idx = np.arange(n, dtype=np.uint64)
        self._all = np.arange(n, dtype=np.int64)
        self.trace = TraceRecorder(keep_trace)

    def access(self, key, value, write):
        self._check_key(key)
        self.trace.begin()
        hit = bf_eq(self._idx, np.uint64(key))
        old = int(np.bitwise_or.reduce(bf_select(hit, self.values, np.uint64(0))))
        wr = hit & np.uint8(1 if write else 0)
        self.values = bf_select(wr, np.uint64(int(value) & MASK), self.values)
        # one read-modify-write pass: every slot is rewritten, reads and writes look alike
        self.trace.add(self._all, "u")
        self.trace.end()
        return old

    @property
    def nbytes(self) -> int:
        return int(self.values.nbytes)

    def snapshot(self):
        return [int(v) for v in self.values]


NIL = -1


class OramForest(Store):
    """Two treaps over keys 0..n-1 sharing one physical slot array."""
    kind = "tree"

    def __init__(self, n: int, coins: Coins | None = None, keep_trace: bool = True,
                 values=None, depth_cap: int | None = None):
        if n < 1:
            raise ValueError("need at least one entry")
        self.n = n
        self.coins = coins or Coins(None, "oram")
        self.log_n = max(1, math.ceil(math.log2(n))) if n > 1 else 1
        self.dummies = self.log_n  # per tree per real query
        # random-BST height concentrates near 4.3 ln n; 4 log2(n+1) leaves a wide margin
        self.h_cap = depth_cap or 4 * max(1, math.ceil(math.log2(n + 1)))
        self.buf_size = 2 * self.h_cap
        self.del_budget = 3 * self.h_cap
        self.ins_budget = 2 * self.h_cap
        self.slots = 2 * n + self.buf_size  # a wide free pool spreads relocations
        S = self.slots
        self.key = [NIL] * S
        self.val = [0] * S
        self.prio = [0] * S
        self.left = [NIL] * S
        self.right = [NIL] * S
        self.roots = [NIL, NIL]
        self.sizes = [0, 0]
        self.free = list(range(S))
        self.trace = TraceRecorder(keep_trace)
        self._touch: list = []
        init = [int(v) & MASK for v in values] if values is not None else [0] * n
        if len(init) != n:
            raise ValueError("initial values do not match n")
        order = self._perm(n)
        sides = self.coins.bits(n)
        for k, side in zip(order, sides):
            s = self._alloc()
            self.key[s], self.val[s], self.prio[s] = int(k), init[k], self._fresh_prio()
            self.left[s] = self.right[s] = NIL
            self.roots[side] = self._insert(self.roots[side], s)
            self.sizes[side] += 1
        self._touch = []

    # -- slot pool and randomness
    def _perm(self, n):
        keys = np.frombuffer(self.coins.bytes(8 * n), dtype=np.uint64)
        return np.argsort(keys, kind="stable")

    def _fresh_prio(self) -> int:
        return int.from_bytes(self.coins.bytes(8), "big")

    def _alloc(self) -> int:
        j = self.coins.randbelow(len(self.free))
        self.free[j], self.free[-1] = self.free[-1], self.free[j]
        return self.free.pop()

    def _pad(self, used: int, budget: int, op: str):
        if used > budget:
            raise OramOverflow(f"{used} accesses exceed the padded budget of {budget}")
        extra = budget - used
        if self.trace.keep:
            real = self._touch
            dummy = self.coins.integers(0, self.slots, extra) if extra else []
            self.trace.add(list(real) + list(dummy), op)
        else:
            self.trace.add_count(budget)
        self._touch = []

    # -- treap internals; every slot read is logged in _touch
    def _descend(self, root, key):
        path = []
        s = root
        while s != NIL:
            path.append(s)
            k = self.key[s]
            s = self.left[s] if key < k else self.right[s]
        return path

    def _merge(self, a, b):
        if a == NIL:
            return b
        if b == NIL:
            return a
        self._touch.append(a)
        self._touch.append(b)
        if self.prio[a] > self.prio[b]:
            self.right[a] = self._merge(self.right[a], b)
            return a
        self.left[b] = self._merge(a, self.left[b])
        return b

    def _split(self, t, key):
        if t == NIL:
            return NIL, NIL
        self._touch.append(t)
        if self.key[t] < key:
            l, r = self._split(self.right[t], key)
            self.right[t] = l
            return t, r
        l, r = self._split(self.left[t], key)
        self.left[t] = r
        return l, t

    def _insert(self, t, node):
        if t == NIL:
            self._touch.append(node)
            return node
        self._touch.append(t)
        if self.prio[node] > self.prio[t]:
            self.left[node], self.right[node] = self._split(t, self.key[node])
            self._touch.append(node)
            return node
        if self.key[node] < self.key[t]:
            self.left[t] = self._insert(self.left[t], node)
        else:
            self.right[t] = self._insert(self.right[t], node)
        return t

    def _delete(self, t, key):
        if t == NIL:
            return NIL
        self._touch.append(t)
        k = self.key[t]
        if key < k:
            self.left[t] = self._delete(self.left[t], key)
            return t
        if key > k:
            self.right[t] = self._delete(self.right[t], key)
            return t
        return self._merge(self.left[t], self.right[t])

    # -- the query
    def access(self, key, value, write):
        self._check_key(key)
        key = int(key)
        tr = self.trace
        tr.begin()
        h = self.h_cap
        found = 0
        paths = []
        for side in (0, 1):
            real_at = self.coins.randbelow(self.dummies + 1)
            for q in range(self.dummies + 1):
                qk = key if q == real_at else self.coins.randbelow(self.n)
                p = self._descend(self.roots[side], qk)
                if len(p) > h:
                    raise OramOverflow(f"tree {side} is deeper than {h}")
                if q == real_at:
                    paths.append(p)
                    for s in p:
                        found = bf_select(bf_eq(self.key[s], key), self.val[s], found)
                self._touch = p
                self._pad(len(p), h, "r")
        # pull every node on the two real paths out into the buffer
        M = self.buf_size
        bkeys = np.zeros(M, dtype=np.uint64)
        bvals = np.zeros(M, dtype=np.uint64)
        live = np.zeros(M, dtype=np.uint8)
        pos = 0
        for side in (0, 1):
            for s in reversed(paths[side]):
                bkeys[pos], bvals[pos], live[pos] = self.key[s], self.val[s], 1
                pos += 1
                self.roots[side] = self._delete(self.roots[side], self.key[s])
                self.sizes[side] -= 1
                self._pad(len(self._touch), self.del_budget, "w")
            for _ in range(h - len(paths[side])):
                self._pad(0, self.del_budget, "w")
        released = [s for p in paths for s in p]
        for s in released:
            self.key[s], self.left[s], self.right[s] = NIL, NIL, NIL
        # the new value lands in the buffer, never at a slot picked by the key
        hit = bf_eq(bkeys, np.uint64(key)) & live & np.uint8(1 if write else 0)
        bvals = bf_select(hit, np.uint64(int(value) & MASK), bvals)
        bkeys, bvals, live = oblivious_shuffle([bkeys, bvals, live.astype(np.uint64)], self.coins, tr, self.slots)
        sides = self.coins.bits(M)
        for i in range(M):
            if live[i]:
                s = self._alloc()
                self.key[s], self.val[s] = int(bkeys[i]), int(bvals[i])
                self.prio[s], self.left[s], self.right[s] = self._fresh_prio(), NIL, NIL
                side = int(sides[i])
                self.roots[side] = self._insert(self.roots[side], s)
                self.sizes[side] += 1
                self._pad(len(self._touch), self.ins_budget, "w")
            else:
                self._pad(0, self.ins_budget, "w")
        self.free.extend(released)
        tr.end()
        return int(found)

    @property
    def nbytes(self) -> int:
        return 5 * 8 * self.slots + 8 * self.buf_size

    def snapshot(self):
        out = [0] * self.n
        self.trace.begin()
        self.trace.add(range(self.slots), "r")
        for s in range(self.slots):
            k = self.key[s]
            if k != NIL:
                out[k] = self.val[s]
        self.trace.end()
        return out

    # -- checks
    def tree_keys(self, side: int) -> list[int]:
        out, stack, s = [], [], self.roots[side]
        while stack or s != NIL:
            while s != NIL:
                stack.append(s)
                s = self.left[s]
            s = stack.pop()
            out.append(self.key[s])
            s = self.right[s]
        return out

    def height(self, side: int) -> int:
        def h(s):
            return 0 if s == NIL else 1 + max(h(self.left[s]), h(self.right[s]))
        return h(self.roots[side])

    def check_invariants(self):
        k0, k1 = self.tree_keys(0), self.tree_keys(1)
        assert k0 == sorted(k0) and k1 == sorted(k1), "in-order walk is not sorted"
        assert not set(k0) & set(k1), "a key sits in both trees"
        assert sorted(k0 + k1) == list(range(self.n)), "trees do not cover the key set"
        assert [len(k0), len(k1)] == self.sizes, "size counters drifted"
        live = [s for s in range(self.slots) if self.key[s] != NIL]
        assert len(live) == self.n and not set(live) & set(self.free), "slot pool inconsistent"
        for s in live:
            for c in (self.left[s], self.right[s]):
                assert c == NIL or self.prio[c] <= self.prio[s], "heap order broken"

    def per_query_budget(self) -> int:
        return (2 * (self.dummies + 1) * self.h_cap + 2 * self.h_cap * self.del_budget
                + self.buf_size * self.buf_size + self.buf_size * self.ins_budget)


def oblivious_shuffle(columns, coins: Coins, trace: TraceRecorder | None = None, base_slot: int = 0):
    """Fisher-Yates where each swap scans the whole prefix with bf_select.

    O(M^2) selects; the scan pattern depends only on M.  Buffer slots are
    logged as ``base_slot + i`` so they sit after the tree slots.
    """
    cols = np.array([np.asarray(c, dtype=np.uint64) for c in columns])
    M = cols.shape[1]
    idx = np.arange(M, dtype=np.uint64)
    for i in range(M - 1, 0, -1):
        r = coins.randbelow(i + 1)
        mask = make_mask(bf_eq(idx[:i + 1], np.uint64(r)))  # one-hot over the prefix
        head = cols[:, :i + 1]
        pick = np.bitwise_or.reduce(head & mask, axis=1)
        mine = cols[:, i].copy()
        head ^= mask & (head ^ mine[:, None])
        cols[:, i] = pick
        if trace is not None:
            if trace.keep:
                trace.add(np.arange(base_slot, base_slot + i + 1), "w")
            else:
                trace.add_count(i + 1)
    if trace is not None:
        # pad the triangular scan to a full M x M block
        rest = M * M - (M * (M + 1) // 2 - 1)
        if trace.keep:
            trace.add(np.full(rest, base_slot, dtype=np.int64) + (np.arange(rest) % M), "w")
        else:
            trace.add_count(rest)
    return list(cols)


STORES = {"tree": OramForest, "linear": LinearStore, "unblinded": UnblindedStore}


def make_store(kind: str, n: int, coins: Coins | None = None, keep_trace: bool = False, values=None) -> Store:
    try:
        cls = STORES[kind]
    except KeyError:
        raise ValueError(f"unknown store {kind!r}; pick one of {sorted(STORES)}") from None
    return cls(n, coins, keep_trace=keep_trace, values=values)


def oram_init(n: int, rng: Coins | None = None, keep_trace: bool = True) -> OramForest:
    return OramForest(n, rng, keep_trace)


def oram_get(forest: Store, key: int) -> int:
    return forest.get(key)


def oram_put(forest: Store, key: int, value: int) -> int:
    return forest.put(key, value)


def sequential_schedule(n: int, queries: int) -> list[int]:
    """0, 1, ..., n-1, 0, ... as in the in-order sweep experiment."""
    return [i % n for i in range(queries)]


def repeated_schedule(index: int, queries: int) -> list[int]:
    return [index] * queries


def run_trace(kind: str, n: int, schedule, seed=0) -> TraceRecorder:
    store = make_store(kind, n, Coins(seed, f"trace/{kind}"), keep_trace=True)
    store.trace = TraceRecorder(True)
    for key in schedule:
        store.get(key)
    return store.trace
