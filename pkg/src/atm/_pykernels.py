"""Pure-Python kernels. Reference behaviour for the compiled ``_ckernels``.

States are ``asset_index * 9 + capability_index``. Graphs arrive in flat
CSR form so both backends share one calling convention:

* ``adj_ptr[a] : adj_ptr[a + 1]`` slices ``adj_edge`` to the edges leaving
  asset ``a``, already in canonical (edge id) order;
* ``edge_dst[e]`` is the target asset of edge ``e``;
* ``edge_table[e * 9 + c]`` is the capability index crossing edge ``e`` when
  ``c`` is held over its source, or -1.
"""

from __future__ import annotations

from itertools import combinations

NCAPS = 9


def closure_many(adj_ptr, adj_edge, edge_dst, edge_table, seed_groups, max_rounds):
    """Breadth-first closure of each seed group.

    Returns one ``(states, parents, via)`` triple per group, in discovery
    order. ``parents[i]`` indexes into ``states`` (-1 for seeds) and
    ``via[i]`` is the edge that produced state ``i`` (-1 for seeds).
    """
    results = []
    for seeds in seed_groups:
        position: dict[int, int] = {}
        states: list[int] = []
        parents: list[int] = []
        via: list[int] = []
        for s in seeds:
            if s not in position:
                position[s] = len(states)
                states.append(s)
                parents.append(-1)
                via.append(-1)
        head = 0
        rounds = 0
        while head < len(states):
            rounds += 1
            if rounds > max_rounds:
                raise RuntimeError(f"propagation exceeded {max_rounds} rounds")
            tail = len(states)
            for i in range(head, tail):
                asset, cap = divmod(states[i], NCAPS)
                for k in range(adj_ptr[asset], adj_ptr[asset + 1]):
                    e = adj_edge[k]
                    out = edge_table[e * NCAPS + cap]
                    if out < 0:
                        continue
                    nxt = edge_dst[e] * NCAPS + out
                    if nxt not in position:
                        position[nxt] = len(states)
                        states.append(nxt)
                        parents.append(i)
                        via.append(e)
            head = tail
        results.append((states, parents, via))
    return results


def minimal_cuts(contexts, n_sources, k):
    """All inclusion-minimal source sets of size <= k that break every context.

    ``contexts[c][r]`` lists the sources able to satisfy requirement ``r``
    for adversary context ``c``. Removing set S breaks context c when some
    requirement has all of its sources in S. Results come smallest first,
    lexicographic within a size.
    """
    member_sets = [[frozenset(r) for r in ctx] for ctx in contexts]
    found: list[frozenset[int]] = []
    for size in range(1, k + 1):
        for combo in combinations(range(n_sources), size):
            chosen = frozenset(combo)
            if any(f <= chosen for f in found):
                continue
            if all(any(r <= chosen for r in ctx) for ctx in member_sets):
                found.append(chosen)
    return [tuple(sorted(f)) for f in found]
