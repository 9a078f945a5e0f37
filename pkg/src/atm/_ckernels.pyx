# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Same signatures and results as ``_pykernels``."""

from libc.stdlib cimport malloc, calloc, realloc, free

cdef enum:
    NCAPS = 9


cdef int[::1] _ints(object seq):
    import array
    if isinstance(seq, array.array) and seq.typecode == "i":
        return seq
    return array.array("i", seq)


def closure_many(adj_ptr, adj_edge, edge_dst, edge_table, seed_groups, int max_rounds):
    cdef int[::1] ptr = _ints(adj_ptr)
    cdef int[::1] aedge = _ints(adj_edge)
    cdef int[::1] dst = _ints(edge_dst)
    cdef int[::1] table = _ints(edge_table)
    cdef Py_ssize_t n_states = (ptr.shape[0] - 1) * NCAPS
    cdef int *stamp = <int *> calloc(n_states if n_states > 0 else 1, sizeof(int))
    cdef int *order = <int *> malloc((n_states if n_states > 0 else 1) * sizeof(int))
    cdef int *parent = <int *> malloc((n_states if n_states > 0 else 1) * sizeof(int))
    cdef int *through = <int *> malloc((n_states if n_states > 0 else 1) * sizeof(int))
    if stamp == NULL or order == NULL or parent == NULL or through == NULL:
        free(stamp); free(order); free(parent); free(through)
        raise MemoryError()
    cdef int generation = 0
    cdef int count, head, tail, i, kk, e, out, nxt, state, asset, cap, rounds
    results = []
    try:
        for seeds in seed_groups:
            generation += 1
            count = 0
            for s in seeds:
                state = s
                if state < 0 or state >= n_states:
                    raise ValueError(f"seed state {state} out of range")
                if stamp[state] != generation:
                    stamp[state] = generation
                    order[count] = state
                    parent[count] = -1
                    through[count] = -1
                    count += 1
            head = 0
            rounds = 0
            while head < count:
                rounds += 1
                if rounds > max_rounds:
                    raise RuntimeError(f"propagation exceeded {max_rounds} rounds")
                tail = count
                for i in range(head, tail):
                    asset = order[i] // NCAPS
                    cap = order[i] % NCAPS
                    for kk in range(ptr[asset], ptr[asset + 1]):
                        e = aedge[kk]
                        out = table[e * NCAPS + cap]
                        if out < 0:
                            continue
                        nxt = dst[e] * NCAPS + out
                        if stamp[nxt] != generation:
                            stamp[nxt] = generation
                            order[count] = nxt
                            parent[count] = i
                            through[count] = e
                            count += 1
                head = tail
            results.append((
                [order[i] for i in range(count)],
                [parent[i] for i in range(count)],
                [through[i] for i in range(count)],
            ))
    finally:
        free(stamp); free(order); free(parent); free(through)
    return results


cdef bint _is_cut(char *chosen, int n_ctx, int *ctx_ptr, int *req_ptr, int *members) nogil:
    cdef int c, r, m
    cdef bint broken, covered
    for c in range(n_ctx):
        broken = False
        for r in range(ctx_ptr[c], ctx_ptr[c + 1]):
            covered = True
            for m in range(req_ptr[r], req_ptr[r + 1]):
                if not chosen[members[m]]:
                    covered = False
                    break
            if covered:
                broken = True
                break
        if not broken:
            return False
    return True


def minimal_cuts(contexts, int n_sources, int k):
    cdef int n_ctx = len(contexts)
    cdef int n_req = sum(len(ctx) for ctx in contexts)
    cdef int n_mem = sum(len(r) for ctx in contexts for r in ctx)
    cdef int *ctx_ptr = <int *> malloc((n_ctx + 1) * sizeof(int))
    cdef int *req_ptr = <int *> malloc((n_req + 1) * sizeof(int))
    cdef int *members = <int *> malloc((n_mem + 1) * sizeof(int))
    cdef char *chosen = <char *> calloc(n_sources + 1, sizeof(char))
    cdef int *idx = <int *> malloc((k + 1) * sizeof(int))
    if ctx_ptr == NULL or req_ptr == NULL or members == NULL or chosen == NULL or idx == NULL:
        free(ctx_ptr); free(req_ptr); free(members); free(chosen); free(idx)
        raise MemoryError()
    cdef int ci = 0, ri = 0, mi = 0
    cdef int size, j, pos, f, fm
    cdef bint superset
    cdef int n_found = 0, found_cap = 64, found_len = 0, found_mem_cap = 256
    cdef int *found_ptr = <int *> malloc((found_cap + 1) * sizeof(int))
    cdef int *found_mem = <int *> malloc(found_mem_cap * sizeof(int))
    cdef void *grown
    if found_ptr == NULL or found_mem == NULL:
        free(ctx_ptr); free(req_ptr); free(members); free(chosen); free(idx)
        free(found_ptr); free(found_mem)
        raise MemoryError()
    found_ptr[0] = 0
    found = []
    try:
        for ctx in contexts:
            ctx_ptr[ci] = ri
            ci += 1
            for req in ctx:
                req_ptr[ri] = mi
                ri += 1
                for member in req:
                    members[mi] = member
                    mi += 1
        ctx_ptr[ci] = ri
        req_ptr[ri] = mi

        for size in range(1, k + 1):
            if size > n_sources:
                break
            for j in range(size):
                idx[j] = j
            while True:
                for j in range(size):
                    chosen[idx[j]] = 1
                superset = False
                for f in range(n_found):
                    superset = True
                    for fm in range(found_ptr[f], found_ptr[f + 1]):
                        if not chosen[found_mem[fm]]:
                            superset = False
                            break
                    if superset:
                        break
                if not superset and _is_cut(chosen, n_ctx, ctx_ptr, req_ptr, members):
                    found.append(tuple([idx[j] for j in range(size)]))
                    if n_found + 1 > found_cap:
                        found_cap *= 2
                        grown = realloc(found_ptr, (found_cap + 1) * sizeof(int))
                        if grown == NULL:
                            raise MemoryError()
                        found_ptr = <int *> grown
                    if found_len + size > found_mem_cap:
                        found_mem_cap = 2 * (found_mem_cap + size)
                        grown = realloc(found_mem, found_mem_cap * sizeof(int))
                        if grown == NULL:
                            raise MemoryError()
                        found_mem = <int *> grown
                    for j in range(size):
                        found_mem[found_len + j] = idx[j]
                    found_len += size
                    n_found += 1
                    found_ptr[n_found] = found_len
                for j in range(size):
                    chosen[idx[j]] = 0
                # next combination in lexicographic order
                pos = size - 1
                while pos >= 0 and idx[pos] == n_sources - size + pos:
                    pos -= 1
                if pos < 0:
                    break
                idx[pos] += 1
                for j in range(pos + 1, size):
                    idx[j] = idx[j - 1] + 1
    finally:
        free(ctx_ptr); free(req_ptr); free(members); free(chosen); free(idx)
        free(found_ptr); free(found_mem)
    return found
