"""Jobs read from plain key=value files.

A job file names the app and points at its data::

    app = database
    entry_count = 8
    values = 5 7 11 13 17 19 23 29     # optional, else random from seed
    query_file = queries.txt
    store = linear                     # optional

    app = dijkstra
    graph = city.edges
    start = 3
    end = 17

Query files hold one query per line: ``select <index>``, ``select <index>
sensitive`` or ``set <index> <value>``.  Edge lists hold ``u v w`` or ``u v w
sensitive?`` per line, where the flag is 0/1 (missing means 0).  Paths inside
a job file are relative to the job file.  ``#`` starts a comment everywhere.

A node is sensitive when every edge touching it is flagged.  A flagged edge
from an ordinary node into the region is a gateway link and gets the toll
added to its weight; costs reported back to the user have the toll taken off
again.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from ..coins import Coins
from .database import SELECT, SET, DatabaseApp, DatabaseConfig, Query, random_database
from .dijkstra import MAX_WEIGHT, TOLL, DijkstraApp, Instance, RouteResult, Topology

APPS = ("database", "dijkstra")


def _lines(path: str):
    with open(path) as fh:
        for no, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield no, line


def read_kv(path: str) -> dict[str, str]:
    out = {}
    for no, line in _lines(path):
        key, eq, val = line.partition("=")
        key = key.strip()
        if not eq or not key:
            raise ValueError(f"{path}:{no}: expected key = value")
        if key in out:
            raise ValueError(f"{path}:{no}: {key} given twice")
        out[key] = val.strip()
    return out


def _int(kv, key, path, default=None) -> int:
    if key not in kv:
        if default is None:
            raise ValueError(f"{path}: missing {key}")
        return default
    try:
        return int(kv[key], 0)
    except ValueError:
        raise ValueError(f"{path}: {key} must be an integer") from None


def _near(job_path: str, rel: str) -> str:
    return os.path.join(os.path.dirname(os.path.abspath(job_path)), rel)


# -- database -----------------------------------------------------------------------

def read_queries(path: str) -> list[Query]:
    qs = []
    for no, line in _lines(path):
        tok = line.split()
        try:
            if tok[0] == "select" and len(tok) in (2, 3):
                if len(tok) == 3 and tok[2] != "sensitive":
                    raise ValueError
                qs.append(Query(int(tok[1], 0), SELECT, 0, len(tok) == 3))
            elif tok[0] == "set" and len(tok) == 3:
                qs.append(Query(int(tok[1], 0), SET, int(tok[2], 0)))
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"{path}:{no}: expected 'select i [sensitive]' or 'set i value'") from None
    return qs


@dataclass
class DatabaseJob:
    app: DatabaseApp
    values: list[int]
    queries: list[Query]

    def inputs(self) -> tuple[bytes, bytes]:
        return self.app.inputs(self.values, self.queries)


def load_database_job(path: str, kv: dict | None = None) -> DatabaseJob:
    kv = kv if kv is not None else read_kv(path)
    n = _int(kv, "entry_count", path)
    if n < 1:
        raise ValueError(f"{path}: entry_count must be positive")
    if "query_file" not in kv:
        raise ValueError(f"{path}: missing query_file")
    qs = read_queries(_near(path, kv["query_file"]))
    if not qs:
        raise ValueError(f"{path}: the query file is empty")
    if "values" in kv:
        vals = [int(x, 0) for x in kv["values"].replace(",", " ").split()]
        if len(vals) != n or any(not 0 <= v < 1 << 64 for v in vals):
            raise ValueError(f"{path}: values must be {n} unsigned 64-bit integers")
    else:
        vals = random_database(n, Coins(_int(kv, "seed", path, 0), "database/file"))
    for i, q in enumerate(qs):
        if not 0 <= q.index < n:
            raise ValueError(f"{path}: query {i} index {q.index} outside [0, {n})")
    n_s = sum(q.sensitive for q in qs)
    cfg = DatabaseConfig(n, len(qs), n_s / len(qs), store=kv.get("store", "tree"))
    if cfg.store not in ("tree", "linear", "unblinded"):
        raise ValueError(f"{path}: unknown store {cfg.store!r}")
    return DatabaseJob(DatabaseApp(cfg), vals, qs)


# -- map -----------------------------------------------------------------------------

def read_edges(path: str) -> list[tuple[int, int, int, bool]]:
    out = []
    for no, line in _lines(path):
        tok = line.split()
        try:
            if len(tok) not in (3, 4) or (len(tok) == 4 and tok[3] not in ("0", "1")):
                raise ValueError
            u, v, w = (int(x, 0) for x in tok[:3])
        except ValueError:
            raise ValueError(f"{path}:{no}: expected 'u v w [0|1]'") from None
        if u == v:
            raise ValueError(f"{path}:{no}: self loop at {u}")
        if not 0 < w < MAX_WEIGHT:
            raise ValueError(f"{path}:{no}: weight must lie in [1, {MAX_WEIGHT})")
        out.append((u, v, w, len(tok) == 4 and tok[3] == "1"))
    return out


@dataclass
class MapJob:
    app: DijkstraApp
    instance: Instance
    names: tuple[int, ...]  # internal id -> id used in the file

    def inputs(self) -> tuple[bytes, bytes]:
        return self.app.inputs(self.instance)

    def readable(self, r: RouteResult) -> tuple[list[int], int]:
        """Route in file ids and its cost without tolls."""
        if not r.connected:
            return [], r.cost
        tolls = sum(1 for u, v in zip(r.nodes, r.nodes[1:])
                    if self.app.topo.is_sensitive(u) != self.app.topo.is_sensitive(v))
        return [self.names[v] for v in r.nodes], r.cost - tolls * TOLL


def map_from_edges(edges, start: int, end: int, name: str = "file") -> MapJob:
    """Split an edge list into ordinary part, region and links; relabel."""
    touched, plain = set(), set()
    seen = set()
    for u, v, _, flag in edges:
        if frozenset((u, v)) in seen:
            raise ValueError(f"edge {u}-{v} listed twice")
        seen.add(frozenset((u, v)))
        touched |= {u, v}
        if not flag:
            plain |= {u, v}
    ordinary = sorted(plain)
    sensitive = sorted(touched - plain)
    ids = {x: i for i, x in enumerate(ordinary + sensitive)}
    N = len(ordinary)
    for x in (start, end):
        if x not in plain:
            raise ValueError(f"start/end {x} must be an ordinary node of the graph")
    groups = {"ord": [], "sens": [], "link": []}
    for u, v, w, flag in edges:
        a, b = sorted((ids[u], ids[v]))
        if not flag:
            groups["ord"].append(((a, b), w))
        elif a >= N:
            groups["sens"].append(((a, b), w))
        elif b >= N:
            groups["link"].append(((a, b), w + TOLL))
        else:
            raise ValueError(f"flagged edge {u}-{v} joins two ordinary nodes")
    topo = Topology.from_edges(N, len(sensitive), [e for e, _ in groups["ord"]], [e for e, _ in groups["sens"]],
                               [e for e, _ in groups["link"]], name)
    weights = tuple(w for g in ("ord", "sens", "link") for _, w in groups[g])
    inst = Instance(ids[start], ids[end], weights)
    return MapJob(DijkstraApp(topo=topo), inst, tuple(ordinary + sensitive))


def load_map_job(path: str, kv: dict | None = None) -> MapJob:
    kv = kv if kv is not None else read_kv(path)
    if "graph" not in kv:
        raise ValueError(f"{path}: missing graph")
    edges = read_edges(_near(path, kv["graph"]))
    name = os.path.splitext(os.path.basename(kv["graph"]))[0]
    return map_from_edges(edges, _int(kv, "start", path), _int(kv, "end", path), name)


def load_job(path: str):
    kv = read_kv(path)
    app = kv.get("app")
    if app == "database":
        return load_database_job(path, kv)
    if app == "dijkstra":
        return load_map_job(path, kv)
    raise ValueError(f"{path}: app must be one of {', '.join(APPS)}")
