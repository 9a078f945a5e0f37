from __future__ import annotations

import random
import subprocess
import sys
from pathlib import Path

import pytest

from atm import _pykernels, kernels

BACKENDS = kernels.available_backends()


def random_graph(rng: random.Random):
    n = rng.randint(1, 8)
    outgoing = [[] for _ in range(n)]
    edge_dst, edge_table = [], []
    for e in range(rng.randint(0, 16)):
        outgoing[rng.randrange(n)].append(e)
        edge_dst.append(rng.randrange(n))
        edge_table.extend(rng.choice([-1, -1, 0, 1, 2, 3, 4, 5, 6, 7, 8]) for _ in range(9))
    adj_ptr, adj_edge = [0], []
    for out in outgoing:
        adj_edge.extend(out)
        adj_ptr.append(len(adj_edge))
    groups = [[rng.randrange(n * 9) for _ in range(rng.randint(0, 3))] for _ in range(rng.randint(1, 4))]
    return adj_ptr, adj_edge, edge_dst, edge_table, groups


def test_backend_flag_is_consistent():
    assert kernels.BACKEND in BACKENDS
    assert "python" in BACKENDS


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_closure_on_a_chain(name):
    impl = BACKENDS[name]
    # asset 0 -> asset 1 -> asset 2, capability 4 becomes 7 then stays 7
    table = [-1] * 18
    table[4] = 7
    table[9 + 7] = 7
    states, parents, via = impl.closure_many([0, 1, 2, 2], [0, 1], [1, 2], table, [[4]], 100)[0]
    assert states == [4, 16, 25]
    assert parents == [-1, 0, 1]
    assert via == [-1, 0, 1]


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_closure_round_cap(name):
    impl = BACKENDS[name]
    table = [-1] * 18
    table[0] = 0
    table[9] = 0
    with pytest.raises(RuntimeError):
        impl.closure_many([0, 1, 2], [0, 1], [1, 0], table, [[0]], 1)


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")
def test_backends_agree_on_random_closures():
    rng = random.Random(7)
    for _ in range(400):
        args = random_graph(rng)
        assert BACKENDS["cython"].closure_many(*args, 10_000) == _pykernels.closure_many(*args, 10_000)


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")
def test_backends_agree_on_random_cuts():
    rng = random.Random(11)
    for _ in range(300):
        n = rng.randint(1, 7)
        contexts = [[sorted(rng.sample(range(n), rng.randint(1, n))) for _ in range(rng.randint(1, 3))]
                    for _ in range(rng.randint(1, 3))]
        k = rng.randint(1, 4)
        assert BACKENDS["cython"].minimal_cuts(contexts, n, k) == _pykernels.minimal_cuts(contexts, n, k)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_minimal_cuts_examples(name):
    impl = BACKENDS[name]
    # one context, requirement A satisfied by {0,1}, requirement B by {2}
    assert impl.minimal_cuts([[[0, 1], [2]]], 3, 3) == [(2,), (0, 1)]
    assert impl.minimal_cuts([[[0, 1], [2]]], 3, 1) == [(2,)]
    # two contexts, each must break
    assert impl.minimal_cuts([[[0]], [[1]]], 2, 2) == [(0, 1)]
    assert impl.minimal_cuts([[[0]], [[1]]], 2, 1) == []


def test_benchmark_script_runs():
    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    proc = subprocess.run([sys.executable, str(script), "--assets", "60", "--roots", "10", "--sources", "8",
                           "--repeat", "1"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "python" in proc.stdout
