"""Circuit generators for the three applications, each with a plain twin.

Integers cross the circuit boundary MSB first (so the bitstring ``0110`` is 6);
inside the builder words are flipped to LSB-first arrays.

The shortest-path circuits use a fixed number of Jacobi Bellman-Ford rounds.
Each round computes every candidate ``d_old[src] + w`` in one adder batch and
then folds a node's in-edges in a fixed slot order with strict ``<``, so ties
keep the earlier value.  The ``*_plain`` functions do exactly the same thing on
integers; they are the reference the circuits are tested against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .builder import CircuitBuilder
from .core import Circuit, bits_to_int, int_to_bits

DIST_BITS = 32
WEIGHT_BITS = 32
INF = 1 << 30
WEIGHT_LIMIT = 1 << 27  # weights must stay below this so INF + w never wraps


def index_bits(n: int) -> int:
    return max(1, (n - 1).bit_length())


def node_bits(n: int) -> int:
    """Width of node ids such that the all-ones sentinel is not a real node."""
    return max(1, n.bit_length())


def _words_lsb(wires, width):
    return np.asarray(wires).reshape(-1, width)[:, ::-1]


def _lsb_to_msb(words):
    return np.asarray(words)[..., ::-1]


def pack_words(values, width: int) -> np.ndarray:
    if len(values) == 0:
        return np.zeros(0, np.uint8)
    return np.concatenate([int_to_bits(int(v), width) for v in values])


def unpack_words(bits, width: int) -> list[int]:
    bits = np.asarray(bits, dtype=np.uint8)
    return [bits_to_int(bits[i:i + width]) for i in range(0, bits.size, width)]


def _lookup(cb: CircuitBuilder, table, idx):
    """Mux-tree lookup ``table[idx]`` for a secret LSB-first index word."""
    cur = np.asarray(table)
    for j in range(idx.shape[-1]):
        s = idx[..., j]
        if cur.ndim == 2:
            cur = cb.mux(s[..., None], cur[1::2], cur[0::2])
        else:
            cur = cb.mux(s[..., None], cur[..., 1::2, :], cur[..., 0::2, :])
    return cur[..., 0, :] if cur.ndim == 3 else cur[0]


# ---------------------------------------------------------------- millionaires

def gen_millionaires(n: int) -> Circuit:
    """Output 1 iff Alice's n-bit integer is strictly larger than Bob's."""
    if n <= 0:
        raise ValueError("bit width must be positive")
    cb = CircuitBuilder(n, n)
    a = cb.alice[::-1]
    b = cb.bob[::-1]
    return cb.build([cb.gt(a, b)])


# ---------------------------------------------------------------- table select

def gen_select(db_entries: int, entry_bits: int = 64, queries: int = 1) -> Circuit:
    """Alice holds the table, Bob holds ``queries`` indices; outputs the entries.

    Indices past the end of the table select 0.
    """
    if db_entries <= 0 or entry_bits <= 0 or queries < 0:
        raise ValueError("parameters must be positive")
    ib = index_bits(db_entries)
    cb = CircuitBuilder(db_entries * entry_bits, queries * ib)
    if queries == 0:
        return cb.build([])
    table = _words_lsb(cb.alice, entry_bits)
    size = 1 << ib
    if size > db_entries:
        pad = np.broadcast_to(cb.const_word(0, entry_bits), (size - db_entries, entry_bits))
        table = np.concatenate([table, pad])
    idx = _words_lsb(cb.bob, ib)
    table = np.broadcast_to(table, (queries,) + table.shape)
    out = _lookup(cb, table, idx)
    return cb.build(_lsb_to_msb(out))


def select_plain(db, indices):
    return [int(db[i]) if i < len(db) else 0 for i in indices]


# ---------------------------------------------------------------- shortest paths

@dataclass(frozen=True)
class SensitiveGraphConfig:
    """Topology of the sensitive region as seen by the circuit.

    Circuit nodes: sensitive nodes 0..n_sensitive-1, then one entry copy and
    one exit copy of every gateway.  Each sensitive edge and each gateway link
    carries one Bob weight, in list order (edges first, then links).
    """
    n_sensitive: int
    n_gateways: int
    sensitive_edges: tuple[tuple[int, int], ...]
    gateway_links: tuple[tuple[int, int], ...]  # (gateway, sensitive node)
    rounds: int | None = None

    @property
    def n_weights(self) -> int:
        return len(self.sensitive_edges) + len(self.gateway_links)

    @property
    def n_nodes(self) -> int:
        return self.n_sensitive + 2 * self.n_gateways

    @property
    def bf_rounds(self) -> int:
        # gateway entries have no in-edges and exits no out-edges, so a simple
        # path crosses at most n_sensitive + 1 edges
        return self.rounds if self.rounds is not None else self.n_sensitive + 1

    @property
    def walk_len(self) -> int:
        return self.n_sensitive + 1

    @property
    def gw_bits(self) -> int:
        return index_bits(max(self.n_gateways, 1))

    @property
    def id_bits(self) -> int:
        return node_bits(self.n_nodes)

    @property
    def sentinel(self) -> int:
        return (1 << self.id_bits) - 1

    @property
    def output_bits(self) -> int:
        return 1 + DIST_BITS + self.gw_bits + self.walk_len * self.id_bits

    def directed_edges(self):
        """(src, dst, weight index) in circuit node ids."""
        ns, g = self.n_sensitive, self.n_gateways
        out = []
        for e, (u, v) in enumerate(self.sensitive_edges):
            out.append((u, v, e))
            out.append((v, u, e))
        base = len(self.sensitive_edges)
        for j, (gw, s) in enumerate(self.gateway_links):
            out.append((ns + gw, s, base + j))
            out.append((s, ns + g + gw, base + j))
        return out


def _slots(n_nodes, edges):
    """Group directed edges by destination; slot j holds each node's j-th in-edge."""
    incoming = [[] for _ in range(n_nodes)]
    for k, (_, dst, _) in enumerate(edges):
        incoming[dst].append(k)
    depth = max((len(x) for x in incoming), default=0)
    slots = []
    for j in range(depth):
        pairs = [(v, incoming[v][j]) for v in range(n_nodes) if len(incoming[v]) > j]
        slots.append((np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])))
    return slots


def _bf_circuit(cb, n_nodes, edges, weights, dist, pred, rounds, id_bits):
    """Jacobi Bellman-Ford on wire words; returns (dist, pred) word arrays."""
    if not edges:
        return dist, pred
    src = np.array([e[0] for e in edges])
    widx = np.array([e[2] for e in edges])
    slots = _slots(n_nodes, edges)
    src_ids = cb.const_word(src, id_bits)
    w = weights[widx]
    for _ in range(rounds):
        cand = cb.add(dist[src], w)
        cur = dist.copy()
        pcur = pred.copy()
        for nodes, eidx in slots:
            upd = cb.lt(cand[eidx], cur[nodes])
            cur[nodes] = cb.mux(upd, cand[eidx], cur[nodes])
            pcur[nodes] = cb.mux(upd, src_ids[eidx], pcur[nodes])
        dist, pred = cur, pcur
    return dist, pred


def _bf_plain(n_nodes, edges, weights, dist, pred, rounds):
    dist = list(dist)
    pred = list(pred)
    if not edges:
        return dist, pred
    slots = _slots(n_nodes, edges)
    for _ in range(rounds):
        cand = [(dist[s] + weights[e]) % (1 << DIST_BITS) for s, _, e in edges]
        cur = dist[:]
        pcur = pred[:]
        for nodes, eidx in slots:
            for v, k in zip(nodes.tolist(), eidx.tolist()):
                if cand[k] < cur[v]:
                    cur[v] = cand[k]
                    pcur[v] = edges[k][0]
        dist, pred = cur, pcur
    return dist, pred


def gen_dijkstra_sensitive(cfg: SensitiveGraphConfig) -> Circuit:
    """Best single detour through the sensitive region.

    Alice bits: din[0..G), dout[0..G), direct (each DIST_BITS).
    Bob bits: one WEIGHT_BITS word per sensitive edge / gateway link.
    Outputs: use bit, route cost (detour or direct, whichever is cheaper),
    exit gateway index, then the predecessor walk from the exit (walk_len
    node ids, padded with the all-ones sentinel).  When the detour does not
    beat ``direct`` the gateway and walk bits are all 1.
    """
    g, ns = cfg.n_gateways, cfg.n_sensitive
    if ns < 0 or g < 0:
        raise ValueError("negative sizes")
    idb = cfg.id_bits
    cb = CircuitBuilder((2 * g + 1) * DIST_BITS, cfg.n_weights * WEIGHT_BITS)
    alice = _words_lsb(cb.alice, DIST_BITS)
    din, dout, direct = alice[:g], alice[g:2 * g], alice[2 * g]
    weights = _words_lsb(cb.bob, WEIGHT_BITS) if cfg.n_weights else np.zeros((0, WEIGHT_BITS), np.int64)
    n = cfg.n_nodes
    inf = cb.const_word(INF, DIST_BITS)
    dist = np.broadcast_to(inf, (n, DIST_BITS)).copy()
    dist[ns:ns + g] = din
    pred = np.broadcast_to(cb.const_word(cfg.sentinel, idb), (n, idb)).copy()
    dist, pred = _bf_circuit(cb, n, cfg.directed_edges(), weights, dist, pred, cfg.bf_rounds, idb)

    ones_out = np.full(cfg.output_bits - 1 - DIST_BITS, int(cb.const(1)), dtype=np.int64)
    if g == 0:
        return cb.build(np.concatenate([[int(cb.const(0))], _lsb_to_msb(direct), ones_out]))
    exits = dist[ns + g:ns + 2 * g]
    tot = cb.add(exits, dout)
    best = tot[0]
    best_idx = cb.const_word(0, cfg.gw_bits)
    best_pred = pred[ns + g]
    gw_ids = cb.const_word(np.arange(g), cfg.gw_bits)
    for j in range(1, g):
        upd = cb.lt(tot[j], best)
        best = cb.mux(upd, tot[j], best)
        best_idx = cb.mux(upd, gw_ids[j], best_idx)
        best_pred = cb.mux(upd, pred[ns + g + j], best_pred)
    use = cb.lt(best, direct)

    size = 1 << idb
    table = np.concatenate([pred, np.broadcast_to(cb.const_word(cfg.sentinel, idb), (size - n, idb))])
    walk = [best_pred]
    for _ in range(cfg.walk_len - 1):
        walk.append(_lookup(cb, table, walk[-1]))
    body = np.concatenate([_lsb_to_msb(best_idx)] + [_lsb_to_msb(v) for v in walk])
    body = cb.or_(body, cb.not_(use))
    cost = cb.mux(use, best, direct)
    return cb.build(np.concatenate([[use], _lsb_to_msb(cost), body]))


def dijkstra_sensitive_plain(cfg: SensitiveGraphConfig, din, dout, direct, weights):
    """Integer twin of gen_dijkstra_sensitive; returns (use, cost, exit_gateway, walk)."""
    g, ns, n = cfg.n_gateways, cfg.n_sensitive, cfg.n_nodes
    dist = [INF] * n
    dist[ns:ns + g] = list(din)
    pred = [cfg.sentinel] * n
    dist, pred = _bf_plain(n, cfg.directed_edges(), list(weights), dist, pred, cfg.bf_rounds)
    none = (0, direct, (1 << cfg.gw_bits) - 1, [cfg.sentinel] * cfg.walk_len)
    if g == 0:
        return none
    tot = [dist[ns + g + j] + dout[j] for j in range(g)]
    best, best_idx = tot[0], 0
    for j in range(1, g):
        if tot[j] < best:
            best, best_idx = tot[j], j
    if not best < direct:
        return none
    walk = [pred[ns + g + best_idx]]
    for _ in range(cfg.walk_len - 1):
        v = walk[-1]
        walk.append(pred[v] if v < n else cfg.sentinel)
    return 1, best, best_idx, walk


def sensitive_inputs(cfg: SensitiveGraphConfig, din, dout, direct, weights):
    a = pack_words(list(din) + list(dout) + [direct], DIST_BITS)
    b = pack_words(list(weights), WEIGHT_BITS)
    return a, b


def decode_sensitive_output(cfg: SensitiveGraphConfig, bits):
    bits = np.asarray(bits, dtype=np.uint8)
    use = int(bits[0])
    cost = bits_to_int(bits[1:1 + DIST_BITS])
    off = 1 + DIST_BITS
    gw = bits_to_int(bits[off:off + cfg.gw_bits])
    walk = unpack_words(bits[off + cfg.gw_bits:], cfg.id_bits)
    return use, cost, gw, walk


@dataclass(frozen=True)
class FullGraphConfig:
    """Whole weighted graph for the all-garbled baseline.

    Alice inputs start and end ids; Bob inputs one weight per undirected edge.
    Outputs the distance to ``end`` and the predecessor walk back from it.
    """
    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    rounds: int | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def bf_rounds(self) -> int:
        return self.rounds if self.rounds is not None else max(self.n_nodes - 1, 0)

    @property
    def id_bits(self) -> int:
        return node_bits(self.n_nodes)

    @property
    def sentinel(self) -> int:
        return (1 << self.id_bits) - 1

    @property
    def walk_len(self) -> int:
        return max(self.n_nodes - 1, 1)

    def directed_edges(self):
        out = []
        for e, (u, v) in enumerate(self.edges):
            out.append((u, v, e))
            out.append((v, u, e))
        return out


def gen_dijkstra_full(cfg: FullGraphConfig) -> Circuit:
    n, idb = cfg.n_nodes, cfg.id_bits
    cb = CircuitBuilder(2 * idb, len(cfg.edges) * WEIGHT_BITS)
    s = cb.alice[:idb][::-1]
    t = cb.alice[idb:][::-1]
    weights = _words_lsb(cb.bob, WEIGHT_BITS) if cfg.edges else np.zeros((0, WEIGHT_BITS), np.int64)
    # d[v] = 0 if v == start else INF; INF has a single set bit
    ids = np.arange(n)
    mask = ((ids[:, None] >> np.arange(idb)) & 1).astype(bool)
    ns_ = cb.not_(s)
    lits = np.where(mask, s[None, :], ns_[None, :])
    is_start = cb.reduce(cb.and_, lits)
    zero = cb.const(0)
    dist = np.full((n, DIST_BITS), int(zero), dtype=np.int64)
    dist[:, INF.bit_length() - 1] = cb.not_(is_start)
    pred = np.broadcast_to(cb.const_word(cfg.sentinel, idb), (n, idb)).copy()
    dist, pred = _bf_circuit(cb, n, cfg.directed_edges(), weights, dist, pred, cfg.bf_rounds, idb)
    size = 1 << idb
    dpad = np.concatenate([dist, np.broadcast_to(cb.const_word(INF, DIST_BITS), (size - n, DIST_BITS))])
    ppad = np.concatenate([pred, np.broadcast_to(cb.const_word(cfg.sentinel, idb), (size - n, idb))])
    cost = _lookup(cb, dpad, t)
    walk = [_lookup(cb, ppad, t)]
    for _ in range(cfg.walk_len - 1):
        walk.append(_lookup(cb, ppad, walk[-1]))
    return cb.build(np.concatenate([_lsb_to_msb(cost)] + [_lsb_to_msb(v) for v in walk]))


def dijkstra_full_plain(cfg: FullGraphConfig, start: int, end: int, weights):
    n = cfg.n_nodes
    dist = [INF] * n
    dist[start] = 0
    pred = [cfg.sentinel] * n
    dist, pred = _bf_plain(n, cfg.directed_edges(), list(weights), dist, pred, cfg.bf_rounds)
    walk = [pred[end] if end < n else cfg.sentinel]
    for _ in range(cfg.walk_len - 1):
        v = walk[-1]
        walk.append(pred[v] if v < n else cfg.sentinel)
    cost = dist[end] if end < n else INF
    return cost, walk


def full_inputs(cfg: FullGraphConfig, start: int, end: int, weights):
    a = np.concatenate([int_to_bits(start, cfg.id_bits), int_to_bits(end, cfg.id_bits)])
    return a, pack_words(list(weights), WEIGHT_BITS)


def decode_full_output(cfg: FullGraphConfig, bits):
    bits = np.asarray(bits, dtype=np.uint8)
    cost = bits_to_int(bits[:DIST_BITS])
    walk = unpack_words(bits[DIST_BITS:], cfg.id_bits)
    return cost, walk
