"""Shortest paths where part of the map is sensitive.

The public topology is a bridge: a west and an east half of ordinary nodes,
joined only through a sensitive region.  Gateways are ordinary nodes with one
link into the region.  Link weights carry a toll of 2^26 so that staying out
of the region always wins when possible and a route never enters it twice.

Round 1 (enclave): distances from start and end to every gateway over the
ordinary part, plus the direct distance.  Round 2 (garbled circuit): Bob's
region weights, Bellman-Ford inside the region, the best entry/exit pair.
Alice stitches the route.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np

from ..circuits.generators import (DIST_BITS, INF, WEIGHT_LIMIT, FullGraphConfig, SensitiveGraphConfig,
                                   decode_full_output, decode_sensitive_output, dijkstra_full_plain,
                                   dijkstra_sensitive_plain, full_inputs, gen_dijkstra_full,
                                   gen_dijkstra_sensitive, pack_words)
from ..coins import Coins
from ..enclave import EnclaveState
from ..oram import bf_eq, bf_lt, bf_select
from ..partition import (CircuitRealization, EvenRound, OddRound, PartitionScheme, decode_fields,
                         encode_fields, make_identity)
from ..protocol.parties import PiGc, PiHyb, PiSgx

TOLL = 1 << 26
MAX_WEIGHT = 1 << 12  # ordinary weights are drawn from [1, MAX_WEIGHT)
_U32 = struct.Struct(">I")

# (ordinary nodes, gateways, sensitive nodes)
CONFIGS = {
    "20": (20, 12, 20),
    "50": (50, 12, 20),
    "100": (100, 22, 25),
    "200": (200, 32, 50),
    "250": (250, 42, 100),
    "1000": (1000, 52, 150),
    "10000": (10000, 62, 250),
}


class DisconnectedError(ValueError):
    pass


def _u32s(values) -> bytes:
    return b"".join(_U32.pack(int(v)) for v in values)


def _from_u32s(data: bytes) -> list[int]:
    if len(data) % 4:
        raise ValueError("length is not a multiple of 4")
    return [x[0] for x in struct.iter_unpack(">I", data)]


def _regular(n: int, degree: int, seed: int):
    """Connected random regular-ish graph on n nodes (edge list)."""
    if n <= 1:
        return []
    d = min(degree, n - 1)
    if (n * d) % 2:
        d -= 1
    if d <= 1:
        return [(i, i + 1) for i in range(n - 1)]
    for attempt in range(100):
        g = nx.random_regular_graph(d, n, seed=seed * 1009 + attempt)
        if nx.is_connected(g):
            return sorted(tuple(sorted(e)) for e in g.edges())
    raise RuntimeError(f"no connected {d}-regular graph on {n} nodes after 100 tries")


@dataclass(frozen=True)
class DijkstraConfig:
    n_ordinary: int
    n_gateways: int
    n_sensitive: int
    degree: int = 4
    seed: int = 42  # topology seed

    @classmethod
    def named(cls, name: str, seed: int = 42) -> "DijkstraConfig":
        n, g, s = CONFIGS[str(name)]
        return cls(n, g, s, seed=seed)

    def __post_init__(self):
        if self.n_ordinary < 2:
            raise ValueError("need at least two ordinary nodes")
        west = self.n_ordinary // 2
        if self.n_gateways < 2 or (self.n_gateways + 1) // 2 > west or self.n_gateways // 2 > self.n_ordinary - west:
            raise ValueError("gateways must split between both halves")
        if self.n_sensitive < self.n_gateways:
            raise ValueError("each gateway needs its own sensitive neighbour")

    @property
    def label(self) -> str:
        return f"{self.n_ordinary} ({self.n_gateways}, {self.n_sensitive})"

    @property
    def n_total(self) -> int:
        return self.n_ordinary + self.n_sensitive


@dataclass(frozen=True)
class GraphShape:
    """Sizes of a map that came from an edge list rather than the generator."""
    n_ordinary: int
    n_gateways: int
    n_sensitive: int
    name: str = "file"

    @property
    def label(self) -> str:
        return f"{self.name} {self.n_ordinary} ({self.n_gateways}, {self.n_sensitive})"

    @property
    def n_total(self) -> int:
        return self.n_ordinary + self.n_sensitive


class Topology:
    """Public map.  Global ids: ordinary 0..N-1 (west half first), then sensitive."""

    def __init__(self, cfg: DijkstraConfig):
        self.cfg = cfg
        N, G, S = cfg.n_ordinary, cfg.n_gateways, cfg.n_sensitive
        rng = Coins(cfg.seed, "topology")
        west = N // 2
        self.west = list(range(west))
        self.east = list(range(west, N))
        we = _regular(west, cfg.degree, cfg.seed)
        ee = [(u + west, v + west) for u, v in _regular(N - west, cfg.degree, cfg.seed + 1)]
        self.ordinary_edges = tuple(we + ee)
        se = _regular(S, cfg.degree, cfg.seed + 2)
        self.sensitive_edges = tuple((u + N, v + N) for u, v in se)
        g_west = (G + 1) // 2
        pick_w = [self.west[i] for i in _sample(rng, west, g_west)]
        pick_e = [self.east[i] for i in _sample(rng, N - west, G - g_west)]
        self.gateways = tuple(pick_w + pick_e)
        targets = _sample(rng, S, G)
        self.links = tuple((gw, N + s) for gw, s in zip(self.gateways, targets))

    @classmethod
    def from_edges(cls, n_ordinary: int, n_sensitive: int, ordinary_edges, sensitive_edges, links,
                   name: str = "file") -> "Topology":
        """Any map in global ids.  links are (ordinary gateway, sensitive node)
        pairs; a node with several links shows up once per link."""
        N, S = n_ordinary, n_sensitive
        if N < 1 or S < 1 or not links:
            raise ValueError("need ordinary nodes, sensitive nodes and at least one link between them")
        for u, v in ordinary_edges:
            if not (u < N and v < N):
                raise ValueError(f"ordinary edge {u}-{v} touches the sensitive region")
        for u, v in sensitive_edges:
            if not (N <= u < N + S and N <= v < N + S):
                raise ValueError(f"sensitive edge {u}-{v} leaves the region")
        for g, s in links:
            if not (g < N <= s < N + S):
                raise ValueError(f"link {g}-{s} must join an ordinary node to a sensitive one")
        topo = cls.__new__(cls)
        topo.cfg = GraphShape(N, len(links), S, name)
        topo.west, topo.east = None, None  # no bridge halves
        topo.ordinary_edges = tuple(map(tuple, ordinary_edges))
        topo.sensitive_edges = tuple(map(tuple, sensitive_edges))
        topo.links = tuple(map(tuple, links))
        topo.gateways = tuple(g for g, _ in topo.links)
        return topo

    @property
    def n_weights(self) -> int:
        return len(self.ordinary_edges) + len(self.sensitive_edges) + len(self.links)

    def all_edges(self):
        """Every undirected edge in Bob's weight order."""
        return list(self.ordinary_edges) + list(self.sensitive_edges) + list(self.links)

    def is_sensitive(self, v: int) -> bool:
        return v >= self.cfg.n_ordinary

    @cached_property
    def sensitive_config(self) -> SensitiveGraphConfig:
        N = self.cfg.n_ordinary
        edges = tuple((u - N, v - N) for u, v in self.sensitive_edges)
        links = tuple((j, s - N) for j, (_, s) in enumerate(self.links))
        return SensitiveGraphConfig(self.cfg.n_sensitive, len(self.gateways), edges, links)

    @cached_property
    def full_config(self) -> FullGraphConfig:
        return FullGraphConfig(self.cfg.n_total, tuple(self.all_edges()))

    @cached_property
    def ordinary_adj(self):
        """Per node: list of (neighbour, weight index)."""
        adj = [[] for _ in range(self.cfg.n_ordinary)]
        for e, (u, v) in enumerate(self.ordinary_edges):
            adj[u].append((v, e))
            adj[v].append((u, e))
        return adj

    @cached_property
    def edge_index(self) -> dict:
        return {frozenset(e): j for j, e in enumerate(self.all_edges())}


def _sample(rng: Coins, n: int, k: int) -> list[int]:
    """k distinct values from range(n)."""
    keys = np.frombuffer(rng.bytes(8 * n), dtype=np.uint64)
    return sorted(np.argsort(keys, kind="stable")[:k].tolist())


# -- instances ---------------------------------------------------------------------

@dataclass(frozen=True)
class Instance:
    start: int
    end: int
    weights: tuple[int, ...]  # Bob's, in Topology.all_edges order


def random_instance(topo: Topology, coins: Coins) -> Instance:
    N = topo.cfg.n_ordinary
    s, t = coins.randbelow(N), coins.randbelow(N)
    n_plain = len(topo.ordinary_edges) + len(topo.sensitive_edges)
    w = [1 + coins.randbelow(MAX_WEIGHT - 1) for _ in range(n_plain)]
    w += [TOLL + 1 + coins.randbelow(MAX_WEIGHT - 1) for _ in topo.links]
    return Instance(s, t, tuple(w))


def alice_input(inst: Instance) -> bytes:
    return _U32.pack(inst.start) + _U32.pack(inst.end)


def bob_input(inst: Instance) -> bytes:
    return _u32s(inst.weights)


def parse_alice(topo: Topology, a: bytes) -> tuple[int, int]:
    if len(a) != 8:
        raise ValueError("Alice's input is start and end as two 32-bit ids")
    s, t = _U32.unpack_from(a, 0)[0], _U32.unpack_from(a, 4)[0]
    N = topo.cfg.n_ordinary
    if not (s < N and t < N):
        raise ValueError("start and end must be ordinary (non-sensitive) nodes")
    return s, t


def parse_bob(topo: Topology, b: bytes) -> list[int]:
    w = _from_u32s(b)
    if len(w) != topo.n_weights:
        raise ValueError(f"expected {topo.n_weights} weights, got {len(w)}")
    n_plain = topo.n_weights - len(topo.links)
    # the toll only works if ordinary weights stay small and links carry it
    if any(not 0 < x < MAX_WEIGHT for x in w[:n_plain]):
        raise ValueError(f"ordinary and sensitive weights must lie in [1, {MAX_WEIGHT})")
    if any(not TOLL < x < TOLL + MAX_WEIGHT for x in w[n_plain:]):
        raise ValueError("gateway link weights must be TOLL plus a small weight")
    assert TOLL + MAX_WEIGHT < WEIGHT_LIMIT
    return w


# -- routes ------------------------------------------------------------------------

@dataclass(frozen=True)
class RouteResult:
    nodes: tuple[int, ...]
    cost: int

    @property
    def connected(self) -> bool:
        return bool(self.nodes)

    def to_bytes(self) -> bytes:
        return _U32.pack(self.cost) + _u32s(self.nodes)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RouteResult":
        vals = _from_u32s(data)
        if not vals:
            raise ValueError("empty route encoding")
        return cls(tuple(vals[1:]), vals[0])

    def require(self) -> "RouteResult":
        if not self.connected:
            raise DisconnectedError("start and end are not connected")
        return self


def check_route(topo: Topology, inst: Instance, r: RouteResult):
    """Legality: adjacent hops, cost = weight sum, one excursion at most."""
    if not r.connected:
        raise AssertionError("route is empty")
    assert r.nodes[0] == inst.start and r.nodes[-1] == inst.end, "route endpoints"
    total = 0
    for u, v in zip(r.nodes, r.nodes[1:]):
        j = topo.edge_index.get(frozenset((u, v)))
        assert j is not None, f"{u}-{v} is not an edge"
        total += inst.weights[j]
    assert total == r.cost, f"cost {r.cost} != weight sum {total}"
    flags = [topo.is_sensitive(v) for v in r.nodes]
    entries = sum(1 for a, b in zip(flags, flags[1:]) if b and not a)
    assert entries <= 1, "route enters the sensitive region more than once"


def reference_route(topo: Topology, inst: Instance) -> RouteResult:
    """networkx Dijkstra on the merged graph (the independent oracle)."""
    g = nx.Graph()
    g.add_nodes_from(range(topo.cfg.n_total))
    for (u, v), w in zip(topo.all_edges(), inst.weights):
        g.add_edge(u, v, weight=w)
    try:
        cost, path = nx.single_source_dijkstra(g, inst.start, inst.end)
    except nx.NetworkXNoPath:
        return RouteResult((), INF)
    return RouteResult(tuple(path), int(cost))


def unique_shortest(topo: Topology, inst: Instance) -> bool:
    g = nx.Graph()
    for (u, v), w in zip(topo.all_edges(), inst.weights):
        g.add_edge(u, v, weight=w)
    paths = nx.all_shortest_paths(g, inst.start, inst.end, weight="weight")
    return sum(1 for _, _ in zip(range(2), paths)) == 1


# -- enclave shortest paths --------------------------------------------------------

def _heap_dijkstra(n, adj, weights, src):
    """Plain textbook version; ties go to the lower node id."""
    dist = [INF] * n
    pred = [-1] * n
    dist[src] = 0
    heap = [(0, src)]
    done = [False] * n
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, e in adj[u]:
            nd = d + weights[e]
            if nd < dist[v]:
                dist[v], pred[v] = nd, u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def _slot_layout(n, adj):
    """Directed edges grouped so each group writes every node at most once."""
    src, dst, widx = [], [], []
    for u in range(n):
        for v, e in adj[u]:
            src.append(u)
            dst.append(v)
            widx.append(e)
    src, dst, widx = map(np.array, (src, dst, widx))
    order = np.argsort(dst, kind="stable")
    src, dst, widx = src[order], dst[order], widx[order]
    rank = np.zeros(len(dst), dtype=np.int64)
    for i in range(1, len(dst)):
        rank[i] = rank[i - 1] + 1 if dst[i] == dst[i - 1] else 0
    groups = [np.nonzero(rank == r)[0] for r in range(int(rank.max()) + 1)] if len(rank) else []
    return src, dst, widx, groups


def _hardened_dijkstra(n, adj, weights, src):
    """O(V^2) Dijkstra built from bf_* selects over every node and edge.

    Each step picks the unvisited node with the least (distance, id) by a full
    scan, then relaxes every directed edge with a select that only takes when
    the edge leaves the picked node.  Access pattern depends on n and the
    public adjacency only.
    """
    ids = np.arange(n, dtype=np.uint64)
    dist = bf_select(bf_eq(ids, np.uint64(src)), np.uint64(0), np.uint64(INF))
    pred = np.full(n, (1 << 32) - 1, dtype=np.uint64)
    done = np.zeros(n, dtype=np.uint8)
    es, ed, ew, groups = _slot_layout(n, adj)
    w = np.asarray(weights, dtype=np.uint64)[ew] if len(ew) else np.zeros(0, np.uint64)
    shift = np.uint64(32)
    big = np.uint64((1 << 64) - 1)
    for _ in range(n):
        key = bf_select(done, big, (dist << shift) | ids)
        best = np.minimum.reduce(key)  # reduction of bf_min_update over the scan
        u = best & np.uint64(0xFFFFFFFF)
        pick = bf_eq(ids, u)
        done = done | pick
        du = np.bitwise_or.reduce(bf_select(pick, dist, np.uint64(0)))
        if not len(es):
            continue
        from_u = bf_eq(es.astype(np.uint64), u)
        cand = du + w
        for grp in groups:
            tgt = ed[grp]
            take = from_u[grp] & bf_lt(cand[grp], dist[tgt]) & (np.uint8(1) ^ done[tgt])
            dist[tgt] = bf_select(take, cand[grp], dist[tgt])
            pred[tgt] = bf_select(take, u, pred[tgt])
    dist = [int(x) for x in dist]
    pred = [int(p) if p != (1 << 32) - 1 else -1 for p in pred]
    return dist, pred


def _walk_back(pred, src, v):
    path = [v]
    while path[-1] != src:
        p = pred[path[-1]]
        if p < 0:
            return None
        path.append(p)
    return path[::-1]


# -- round functions ---------------------------------------------------------------

def ordinary_round(topo: Topology, hardened: bool = True):
    """Odd round: Alice's (s, t), Bob's ordinary weights -> gateway distances and paths."""
    N = topo.cfg.n_ordinary
    adj = topo.ordinary_adj
    shortest = _hardened_dijkstra if hardened else _heap_dijkstra
    n_ord = len(topo.ordinary_edges)

    def fn(u: bytes, v: bytes, st: EnclaveState):
        s, t = parse_alice(topo, u)
        w = _from_u32s(decode_fields(v)[0])
        if len(w) != n_ord:
            raise ValueError("wrong number of ordinary weights")
        ds, ps = shortest(N, adj, w, s)
        dt, pt = shortest(N, adj, w, t)
        din = [ds[g] for g in topo.gateways]
        dout = [dt[g] for g in topo.gateways]
        direct = ds[t]
        paths_in = [_walk_back(ps, s, g) or [] for g in topo.gateways]
        paths_out = [(_walk_back(pt, t, g) or [])[::-1] for g in topo.gateways]
        direct_path = _walk_back(ps, s, t) or []
        fields = [_u32s(din), _u32s(dout), _U32.pack(direct), _u32s(direct_path)]
        fields += [_u32s(p) for p in paths_in] + [_u32s(p) for p in paths_out]
        return encode_fields(fields), b"", st

    return fn


def _parse_round1(topo: Topology, u: bytes):
    f = decode_fields(u)
    G = len(topo.gateways)
    if len(f) != 4 + 2 * G:
        raise ValueError("malformed round-1 output")
    din, dout = _from_u32s(f[0]), _from_u32s(f[1])
    direct = _U32.unpack(f[2])[0]
    return din, dout, direct, _from_u32s(f[3]), [_from_u32s(x) for x in f[4:4 + G]], \
        [_from_u32s(x) for x in f[4 + G:]]


def stitch(topo: Topology, u: bytes, use: int, cost: int, gw_out: int, walk) -> bytes:
    """Alice's local step: join the enclave's paths with the circuit's walk."""
    din, dout, direct, direct_path, paths_in, paths_out = _parse_round1(topo, u)
    scfg = topo.sensitive_config
    N, ns, G = topo.cfg.n_ordinary, scfg.n_sensitive, scfg.n_gateways
    if cost >= INF:
        return RouteResult((), INF).to_bytes()
    if not use:
        return RouteResult(tuple(direct_path), cost).to_bytes()
    inner = []
    gw_in = None
    for v in walk:
        if v < ns:
            inner.append(N + v)
        elif v < ns + G:
            gw_in = v - ns
            break
        else:
            raise ValueError("walk left the sensitive region")
    if gw_in is None:
        raise ValueError("walk never reached an entry gateway")
    nodes = paths_in[gw_in] + inner[::-1] + paths_out[gw_out]
    return RouteResult(tuple(nodes), cost).to_bytes()


def sensitive_realization(topo: Topology) -> CircuitRealization:
    scfg = topo.sensitive_config
    circuit = gen_dijkstra_sensitive(scfg)

    def enc_a(u):
        din, dout, direct, *_ = _parse_round1(topo, u)
        return pack_words(list(din) + list(dout) + [direct], DIST_BITS)

    def enc_b(v):
        return pack_words(_from_u32s(decode_fields(v)[0]), 32)

    def dec(u, bits):
        use, cost, gw, walk = decode_sensitive_output(scfg, bits)
        return stitch(topo, u, use, cost, gw, walk)

    return CircuitRealization(circuit, enc_a, enc_b, dec)


def sensitive_round_plain(topo: Topology):
    scfg = topo.sensitive_config

    def fn(u, v):
        din, dout, direct, *_ = _parse_round1(topo, u)
        w = _from_u32s(decode_fields(v)[0])
        use, cost, gw, walk = dijkstra_sensitive_plain(scfg, din, dout, direct, w)
        return stitch(topo, u, use, cost, gw, walk), b""

    return fn


def build_dijkstra_scheme(cfg: DijkstraConfig, hardened: bool = True, topo: Topology | None = None,
                          with_circuit: bool = True) -> PartitionScheme:
    topo = topo or Topology(cfg)
    n_ord = len(topo.ordinary_edges)

    def split_a(k, a, rng):
        parse_alice(topo, a)
        return [bytes(a), b""]

    def split_b(k, b, rng):
        w = parse_bob(topo, b)
        return [encode_fields([_u32s(w[:n_ord])]), encode_fields([_u32s(w[n_ord:])])]

    real = sensitive_realization(topo) if with_circuit else None
    return PartitionScheme(
        rounds=(OddRound("dijkstra/ordinary", ordinary_round(topo, hardened)),
                EvenRound(sensitive_round_plain(topo), real)),
        split_a=split_a, split_b=split_b, name=f"dijkstra[{cfg.label}]",
    )


# -- whole-graph variants (baselines) -----------------------------------------------

def whole_graph_fn(topo: Topology, hardened: bool = True):
    """Enclave computes the whole route (the all-enclave baseline)."""
    n = topo.cfg.n_total
    adj = [[] for _ in range(n)]
    for e, (u, v) in enumerate(topo.all_edges()):
        adj[u].append((v, e))
        adj[v].append((u, e))
    shortest = _hardened_dijkstra if hardened else _heap_dijkstra

    def f(a: bytes, b: bytes):
        s, t = parse_alice(topo, a)
        w = parse_bob(topo, b)
        dist, pred = shortest(n, adj, w, s)
        path = _walk_back(pred, s, t)
        if path is None:
            return RouteResult((), INF).to_bytes(), b""
        return RouteResult(tuple(path), dist[t]).to_bytes(), b""

    return f


def full_realization(topo: Topology) -> CircuitRealization:
    fcfg = topo.full_config
    circuit = gen_dijkstra_full(fcfg)

    def enc_a(a):
        s, t = parse_alice(topo, a)
        return full_inputs(fcfg, s, t, [])[0]

    def enc_b(b):
        return pack_words(parse_bob(topo, b), 32)

    def dec(a, bits):
        s, t = parse_alice(topo, a)
        cost, walk = decode_full_output(fcfg, bits)
        return _route_from_walk(fcfg, s, t, cost, walk)

    return CircuitRealization(circuit, enc_a, enc_b, dec)


def _route_from_walk(fcfg, s, t, cost, walk) -> bytes:
    if cost >= INF:
        return RouteResult((), INF).to_bytes()
    nodes = [t]
    for v in walk:
        if nodes[-1] == s:
            break
        if v == fcfg.sentinel:
            raise ValueError("walk ended before reaching the start")
        nodes.append(v)
    return RouteResult(tuple(nodes[::-1]), cost).to_bytes()


def full_plain(topo: Topology):
    fcfg = topo.full_config

    def f(a, b):
        s, t = parse_alice(topo, a)
        cost, walk = dijkstra_full_plain(fcfg, s, t, parse_bob(topo, b))
        return _route_from_walk(fcfg, s, t, cost, walk), b""

    return f


class DijkstraApp:
    """Everything the harness needs for one topology."""

    def __init__(self, cfg: DijkstraConfig | None = None, topo: Topology | None = None):
        self.topo = topo or Topology(cfg)
        self.cfg = self.topo.cfg
        self._schemes = {}
        self._full = None

    def scheme(self, hardened: bool = True) -> PartitionScheme:
        if hardened not in self._schemes:
            self._schemes[hardened] = build_dijkstra_scheme(self.cfg, hardened, self.topo)
        return self._schemes[hardened]

    def protocol(self, mode: str):
        if mode == "hybrid":
            return PiHyb(self.scheme(True))
        if mode in ("sgx", "naive"):
            f = whole_graph_fn(self.topo, hardened=(mode == "sgx"))
            return PiSgx(f"dijkstra/{mode}", lambda u, v, st: (*f(u, v), st))
        if mode == "gc":
            if self._full is None:
                self._full = full_realization(self.topo)
            return PiGc(self._full)
        raise ValueError(f"unknown mode {mode!r}")

    def instance(self, seed) -> Instance:
        return random_instance(self.topo, Coins(seed, "dijkstra/instance"))

    def inputs(self, inst: Instance) -> tuple[bytes, bytes]:
        return alice_input(inst), bob_input(inst)

    def oracle(self, inst: Instance) -> RouteResult:
        return reference_route(self.topo, inst)

    def identity_scheme(self, hardened: bool = True) -> PartitionScheme:
        return make_identity(whole_graph_fn(self.topo, hardened), "dijkstra/whole")

