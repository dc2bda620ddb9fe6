"""Command line: ``hybridsfe bench|trace|run ...``.

CSV goes to stdout, logs to stderr.  Exit status 2 means an output failed its
correctness check.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .apps.config import DatabaseJob, load_job
from .apps.database import database_plain, decode_answers
from .apps.dijkstra import CONFIGS, RouteResult, check_route
from .bench import BenchMismatch, Workload, run_bench, to_csv
from .oram import sequential_schedule, run_trace
from .protocol.engine import run_protocol, run_role
from .symenc import SymKey

log = logging.getLogger("hybridsfe")


def _peer(text: str):
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError("peer must look like host:port")
    return host, int(port)


def _key_file(path: str) -> SymKey:
    with open(path) as fh:
        return SymKey.from_hex(fh.read().strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridsfe", description="hybrid enclave / garbled-circuit SFE harness")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("bench", help="time one app in one mode")
    b.add_argument("--app", choices=["millionaires", "database", "dijkstra"], required=True)
    b.add_argument("--mode", choices=["naive", "sgx", "hybrid", "gc"], required=True)
    b.add_argument("--store", choices=["tree", "linear", "unblinded"], default="tree")
    b.add_argument("--transport", choices=["inproc", "tcp"], default="inproc")
    b.add_argument("--role", choices=["both", "alice", "bob"], default="both")
    b.add_argument("--peer", type=_peer, default=("127.0.0.1", 47000))
    b.add_argument("--k", type=int, choices=[80, 128], default=128)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--iters", type=int, default=None, help="default: 100 for enclave modes, 10 otherwise")
    b.add_argument("--bits", type=int, default=1024, help="millionaires input width")
    b.add_argument("--entries", type=int, default=500)
    b.add_argument("--queries", type=int, default=2500)
    b.add_argument("--sensitive-fraction", type=float, default=0.05)
    b.add_argument("--nodes", choices=sorted(CONFIGS, key=int), default="20")
    b.add_argument("--allow-large", action="store_true", help="lift the desk-scale size caps")
    b.add_argument("--key-file", type=_key_file, default=None, help="hex enclave key (role runs)")
    b.add_argument("--no-header", action="store_true")

    t = sub.add_parser("trace", help="memory-access trace of the database store")
    t.add_argument("--store", choices=["tree", "linear", "unblinded"], default="tree")
    t.add_argument("--entries", type=int, default=100)
    t.add_argument("--queries", type=int, default=None, help="default: one sweep over every index")
    t.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("run", help="one evaluation of a job file (key=value)")
    r.add_argument("job")
    r.add_argument("--mode", choices=["naive", "sgx", "hybrid", "gc"], default="hybrid")
    r.add_argument("--transport", choices=["inproc", "tcp"], default="inproc")
    r.add_argument("--k", type=int, choices=[80, 128], default=128)
    r.add_argument("--seed", type=int, default=0)
    return p


def _sizes(args) -> dict:
    return dict(bits=args.bits, entries=args.entries, queries=args.queries,
                sensitive_fraction=args.sensitive_fraction, nodes=args.nodes, allow_large=args.allow_large)


def cmd_bench(args) -> int:
    if args.role != "both":
        return _cmd_role(args)
    try:
        res, _ = run_bench(args.app, args.mode, args.iters, args.k, args.seed, args.transport, args.store,
                           **_sizes(args))
    except BenchMismatch as exc:
        log.error("correctness check failed: %s", exc)
        return 2
    sys.stdout.write(to_csv([res], header=not args.no_header))
    return 0


def _cmd_role(args) -> int:
    if args.transport != "tcp":
        log.error("--role alice|bob needs --transport tcp")
        return 1
    wl = Workload(args.app, args.mode, args.store, **_sizes(args))
    a, b, _ = wl.draw(args.seed)
    host, port = args.peer
    t0 = time.perf_counter()
    out, events = run_role(wl.proto, args.role, args.k, a if args.role == "alice" else b, host, port,
                           seed=args.seed, key=args.key_file)
    ms = (time.perf_counter() - t0) * 1000
    sent = sum(len(e[3]) for e in events if e[0] == "send")
    if not args.no_header:
        print("role,app,mode,ms,frames,bytes_sent,output_hex")
    print(f"{args.role},{args.app},{args.mode},{ms:.3f},{len(events)},{sent},{(out or b'').hex()}")
    return 0


def cmd_trace(args) -> int:
    n = args.entries
    q = args.queries or n
    tr = run_trace(args.store, n, sequential_schedule(n, q), seed=args.seed)
    tr.write_csv(sys.stdout)
    log.info("%d queries, per-query slot counts %s", q, sorted(set(tr.counts)))
    return 0


def cmd_run(args) -> int:
    job = load_job(args.job)
    a, b = job.inputs()
    res = run_protocol(job.app.protocol(args.mode),args.k, a, b, transport=args.transport, seed=args.seed)
    if isinstance(job, DatabaseJob):
        if (res.y0, res.y1) != database_plain(a, b):
            log.error("answers differ from the array oracle")
            return 2
        print("query,answer")
        for i, v in enumerate(decode_answers(res.y1)):
            print(f"{i},{v}")
        return 0
    got, want = RouteResult.from_bytes(res.y0), job.app.oracle(job.instance)
    if got.cost != want.cost:
        log.error("route cost %d differs from the oracle's %d (does the best route need two trips "
                  "through the region?)", got.cost, want.cost)
        return 2
    if got.connected:
        check_route(job.app.topo, job.instance, got)
    nodes, cost = job.readable(got)
    print("cost,route")
    print(f"{cost if nodes else 'inf'},{' '.join(map(str, nodes))}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"bench": cmd_bench, "trace": cmd_trace, "run": cmd_run}[args.cmd](args)
    except ValueError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
