"""Compare the compiled and pure-Python kernels on synthetic inputs.

    python3 benchmarks/bench_kernels.py [--assets N] [--roots R] [--repeat K]

Both backends run on the same inputs; the script checks that their outputs
match before reporting timings.
"""

from __future__ import annotations

import argparse
import random
import statistics
import sys
import time

from atm.kernels import available_backends
from atm.model import Edge
from atm.taxonomy import CAPABILITIES, EdgeMode

NCAPS = len(CAPABILITIES)


def synthetic_graph(n_assets: int, fanout: int, rng: random.Random):
    """Layered DAG plus a few relationship back-links, in the kernels' CSR form."""
    modes = list(EdgeMode)
    outgoing = [[] for _ in range(n_assets)]
    edge_dst, edge_table = [], []
    for src in range(n_assets):
        for _ in range(fanout):
            if rng.random() < 0.05:
                dst, mode = rng.randrange(n_assets), EdgeMode.RELATIONSHIP
            else:
                dst, mode = rng.randrange(src, n_assets), rng.choice(modes)
            if dst == src:
                continue
            edge = Edge(f"e{len(edge_dst)}", mode, f"a{src}", f"a{dst}")
            outgoing[src].append(len(edge_dst))
            edge_dst.append(dst)
            for cap in CAPABILITIES:
                out = edge.transfer(cap)
                edge_table.append(-1 if out is None else out.index)
    adj_ptr, adj_edge = [0], []
    for out in outgoing:
        adj_edge.extend(out)
        adj_ptr.append(len(adj_edge))
    return adj_ptr, adj_edge, edge_dst, edge_table


def synthetic_cut_problem(n_sources: int, rng: random.Random):
    contexts = []
    for _ in range(3):
        contexts.append([sorted(rng.sample(range(n_sources), rng.randint(1, 4))) for _ in range(4)])
    return contexts


def timed(fn, repeat: int) -> tuple[float, object]:
    samples, result = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples), result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--assets", type=int, default=3000)
    parser.add_argument("--fanout", type=int, default=3)
    parser.add_argument("--roots", type=int, default=300)
    parser.add_argument("--sources", type=int, default=40)
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the Python backend is available", file=sys.stderr)

    rng = random.Random(args.seed)
    graph = synthetic_graph(args.assets, args.fanout, rng)
    seeds = [[rng.randrange(args.assets) * NCAPS + rng.randrange(NCAPS)] for _ in range(args.roots)]
    cuts = synthetic_cut_problem(args.sources, rng)
    print(f"closure: {args.assets} assets, {len(graph[2])} edges, {args.roots} roots")
    print(f"cuts:    {args.sources} sources, k={args.k}, {len(cuts)} contexts")

    rows = []
    reference = {}
    for name in sorted(backends, key=lambda n: n != "python"):
        impl = backends[name]
        t_closure, closure = timed(lambda: impl.closure_many(*graph, seeds, 10_000), args.repeat)
        t_cuts, found = timed(lambda: impl.minimal_cuts(cuts, args.sources, args.k), args.repeat)
        if name == "python":
            reference = {"closure": closure, "cuts": found}
        elif closure != reference["closure"] or found != reference["cuts"]:
            print(f"{name}: results differ from the Python backend", file=sys.stderr)
            return 1
        states = sum(len(s) for s, _, _ in closure)
        rows.append((name, t_closure, t_cuts, states, len(found)))

    print(f"\n{'backend':<8} {'closure ms':>11} {'cuts ms':>9} {'states':>8} {'cut sets':>9}")
    for name, t_closure, t_cuts, states, n_cuts in rows:
        print(f"{name:<8} {t_closure * 1e3:>11.2f} {t_cuts * 1e3:>9.2f} {states:>8} {n_cuts:>9}")
    if len(rows) == 2:
        py, cy = rows
        print(f"\nspeedup: closure {py[1] / cy[1]:.1f}x, cuts {py[2] / cy[2]:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
