"""Memory-access traces of the database store, one CSV per store kind.

Queries index 0, 1, ..., n-1 in order.  The unblinded store shows the
diagonal; linear touches every slot each time; the tree store scatters.
Also writes the single-index schedule for the tree store so the two can be
compared.

    python3 scripts/memory_traces.py --entries 100 --outdir results/traces
"""

import argparse
import os

import numpy as np

from hybridsfe.oram import repeated_schedule, run_trace, sequential_schedule


def main(argv=None):
    p = argparse.ArgumentParser(description="write store access traces as CSV")
    p.add_argument("--entries", type=int, default=100)
    p.add_argument("--queries", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", default="results/traces")
    args = p.parse_args(argv)
    n = args.entries
    q = args.queries or n
    os.makedirs(args.outdir, exist_ok=True)
    runs = [(kind, "sequential", sequential_schedule(n, q)) for kind in ("tree", "linear", "unblinded")]
    runs.append(("tree", "repeated", repeated_schedule(0, q)))
    for kind, name, sched in runs:
        tr = run_trace(kind, n, sched, seed=args.seed)
        path = os.path.join(args.outdir, f"{kind}_{name}_{n}.csv")
        tr.write_csv(path)
        counts = np.unique(tr.counts)
        print(f"{path}: {q} queries, slots per query {counts.tolist()}")


if __name__ == "__main__":
    main()
