"""Timing harness: one app, one mode, many iterations, one CSV row.

Every iteration checks its output against the plain oracle before the time
is kept, so a wrong answer can never produce a timing row.  Times are taken
in-process around ``run_protocol``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import stats

from .apps.database import DatabaseApp, DatabaseConfig, database_plain
from .apps.dijkstra import CONFIGS, DijkstraApp, DijkstraConfig, RouteResult, check_route
from .apps.millionaires import MillionairesApp
from .circuits.core import AND, OR
from .protocol.engine import run_protocol
from .protocol.parties import PiGc, PiHyb

log = logging.getLogger(__name__)

DEFAULT_ITERS = {"naive": 100, "sgx": 100, "hybrid": 10, "gc": 10}
DESK_CAPS = {"dijkstra": 250, "database": (1000, 2500)}


class BenchMismatch(AssertionError):
    """A run produced an answer that disagrees with the oracle."""


@dataclass
class BenchResult:
    app: str
    config: str
    mode: str
    store: str
    k: int
    transport: str
    iters: int
    mean_ms: float
    ci_low_ms: float
    ci_high_ms: float
    rel_ci: float
    bytes_on_wire: int
    table_rows: int
    gates: int
    timing: str = "in-process around run_protocol"

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def mean_ci(samples, level: float = 0.95) -> tuple[float, float, float]:
    x = np.asarray(samples, dtype=float)
    m = float(x.mean())
    if len(x) < 2 or float(x.std()) == 0.0:
        return m, m, m
    lo, hi = stats.t.interval(level, len(x) - 1, loc=m, scale=stats.sem(x))
    return m, float(lo), float(hi)


def direction(fast, slow, level: float = 0.95) -> str:
    """'holds' if fast < slow on average; 'overlap' if reversed but the CIs
    overlap; 'reversed' if reversed outside overlapping CIs."""
    mf, lf, hf = mean_ci(fast, level)
    ms, ls, hs = mean_ci(slow, level)
    if mf < ms:
        return "holds"
    return "overlap" if lf <= hs else "reversed"


def _circuits(proto):
    if isinstance(proto, PiGc):
        return [proto.realization.circuit]
    if isinstance(proto, PiHyb):
        return [r.realization.circuit for r in proto.scheme.rounds if getattr(r, "realization", None)]
    return []


def garbled_rows(proto) -> tuple[int, int]:
    cs = _circuits(proto)
    return sum(3 * (c.count(AND) + c.count(OR)) for c in cs), sum(c.gate_count for c in cs)


class Workload:
    """An app, a mode and a way to draw and check instances."""

    def __init__(self, app: str, mode: str, store: str = "tree", bits: int = 1024, entries: int = 500,
                 queries: int = 2500, sensitive_fraction: float = 0.05, nodes: str = "20",
                 allow_large: bool = False):
        self.app_name, self.mode, self.store = app, mode, store
        if app == "millionaires":
            self.app = MillionairesApp(bits)
            self.config = f"Millionaires{bits}"
        elif app == "database":
            if not allow_large and (entries > DESK_CAPS["database"][0] or queries > DESK_CAPS["database"][1]):
                raise ValueError("database size beyond the desk-scale cap; pass --allow-large")
            self.app = DatabaseApp(DatabaseConfig(entries, queries, sensitive_fraction, store=store))
            self.config = self.app.cfg.label
        elif app == "dijkstra":
            if str(nodes) not in CONFIGS:
                raise ValueError(f"unknown dijkstra size {nodes}; pick one of {sorted(CONFIGS, key=int)}")
            if not allow_large and int(nodes) > DESK_CAPS["dijkstra"]:
                raise ValueError("dijkstra size beyond the desk-scale cap; pass --allow-large")
            self.app = DijkstraApp(DijkstraConfig.named(nodes))
            self.config = f"Dijkstra{nodes}"
        else:
            raise ValueError(f"unknown app {app!r}")
        if app == "database":
            self.proto = self.app.protocol(mode, store)
        else:
            self.proto = self.app.protocol(mode)

    def draw(self, seed):
        """(a, b, check) where check(y0, y1) raises BenchMismatch."""
        if self.app_name == "millionaires":
            x, y = self.app.instance(seed)
            a, b = self.app.inputs(x, y)
            want = bytes([self.app.oracle(x, y)])

            def check(y0, y1):
                if (y0, y1) != (want, b""):
                    raise BenchMismatch(f"millionaires: got {y0!r}, want {want!r}")
            return a, b, check
        if self.app_name == "database":
            db, qs = self.app.instance(seed, select_only=(self.mode == "gc"))
            a, b = self.app.inputs(db, qs)
            want = database_plain(a, b)

            def check(y0, y1):
                if (y0, y1) != want:
                    raise BenchMismatch("database answers differ from the array oracle")
            return a, b, check
        inst = self.app.instance(seed)
        a, b = self.app.inputs(inst)
        want = self.app.oracle(inst)

        def check(y0, y1):
            got = RouteResult.from_bytes(y0)
            if got.cost != want.cost or y1 != b"":
                raise BenchMismatch(f"route cost {got.cost} != oracle {want.cost}")
            if want.connected:
                check_route(self.app.topo, inst, got)
        return a, b, check


def run_bench(app: str, mode: str, iters: int | None = None, k: int = 128, seed: int = 0,
              transport: str = "inproc", store: str = "tree", **sizes) -> tuple[BenchResult, list[float]]:
    wl = Workload(app, mode, store, **sizes)
    iters = iters or DEFAULT_ITERS[mode]
    times, nbytes = [], 0
    for i in range(iters):
        a, b, check = wl.draw(seed + i)
        t0 = time.perf_counter()
        r = run_protocol(wl.proto, k, a, b, transport=transport, seed=seed + i)
        dt = time.perf_counter() - t0
        check(r.y0, r.y1)
        times.append(dt * 1000.0)
        nbytes = r.transcript.total_bytes()
        log.debug("%s %s iter %d: %.1f ms", wl.config, mode, i, dt * 1000)
    m, lo, hi = mean_ci(times)
    rows, gates = garbled_rows(wl.proto)
    rel = (hi - lo) / 2 / m if m else math.nan
    res = BenchResult(app, wl.config, mode, store if app == "database" else "-", k, transport, iters,
                      round(m, 3), round(lo, 3), round(hi, 3), round(rel, 4), nbytes, rows, gates)
    return res, times


def to_csv(rows, header: bool = True) -> str:
    out = io.StringIO()
    w = csv.DictWriter(out, fieldnames=BenchResult.columns())
    if header:
        w.writeheader()
    for r in rows:
        w.writerow(asdict(r))
    return out.getvalue()


def from_csv(text: str) -> list[BenchResult]:
    out = []
    types = {f.name: f.type for f in fields(BenchResult)}
    for row in csv.DictReader(io.StringIO(text)):
        conv = {}
        for key, val in row.items():
            t = types[key]
            conv[key] = int(val) if t in ("int", int) else float(val) if t in ("float", float) else val
        out.append(BenchResult(**conv))
    return out
