"""Desk-scale timing table: every app in every mode it supports.

    python3 scripts/bench_table.py --out results/bench_table.csv
    python3 scripts/bench_table.py --quick        # small sizes, few iterations

Each row is one hybridsfe.bench run; wrong answers abort the script.
"""

import argparse
import logging
import os
import sys

from hybridsfe.bench import run_bench, to_csv

# (app, sizes, modes); sizes go straight to Workload
LADDER = [
    ("millionaires", dict(bits=1024), ["sgx", "gc"]),
    ("millionaires", dict(bits=4096), ["sgx", "gc"]),
    ("database", dict(entries=100, queries=500), ["naive", "sgx", "hybrid"]),
    ("database", dict(entries=500, queries=2500), ["naive", "sgx", "hybrid"]),
    ("dijkstra", dict(nodes="20"), ["naive", "sgx", "hybrid", "gc"]),
    ("dijkstra", dict(nodes="50"), ["naive", "sgx", "hybrid", "gc"]),
    ("dijkstra", dict(nodes="100"), ["naive", "sgx", "hybrid", "gc"]),
]

QUICK = [
    ("millionaires", dict(bits=256), ["sgx", "gc"]),
    ("database", dict(entries=64, queries=40, sensitive_fraction=0.1), ["naive", "sgx", "hybrid"]),
    ("dijkstra", dict(nodes="20"), ["sgx", "hybrid"]),
]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results/bench_table.csv")
    p.add_argument("--iters", type=int, default=None, help="override the per-mode default")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--store", default="tree", choices=["tree", "linear", "unblinded"])
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)

    rows = []
    for app, sizes, modes in (QUICK if args.quick else LADDER):
        for mode in modes:
            iters = args.iters or (3 if args.quick else None)
            res, _ = run_bench(app, mode, iters=iters, store=args.store, **sizes)
            logging.info("%-22s %-7s %10.1f ms  (+-%.0f%%)", res.config, mode, res.mean_ms, 100 * res.rel_ci)
            rows.append(res)
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w") as fh:
        fh.write(to_csv(rows))
    print(args.out)


if __name__ == "__main__":
    main()
