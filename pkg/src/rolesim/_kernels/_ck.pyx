# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled exhaustive search; algorithmically identical to py_backend."""

from libc.stdlib cimport free, malloc

DEF MAX_SUB = 12
DEF MAX_NODE = 4
DEF MAX_SLOTS = 16

cdef long long INF = (1 << 62)


cdef long long _simulate(int n_sub, int n_node, long long* dur, long long* ctx,
                         int* edge_src, long long* xfer, int* slot_count,
                         int* assign, int* order_pos,
                         int* in_off, int* in_edge, int* out_off, int* out_succ) nogil:
    cdef long long slot_free[MAX_NODE][MAX_SLOTS]
    cdef long long finish[MAX_SUB]
    cdef long long ready[MAX_SUB]
    cdef int preds_left[MAX_SUB]
    cdef bint committed[MAX_SUB]
    cdef int s, t, n, i, e, p, best_s, idx, min_idx
    cdef long long est, best_est, end, makespan, node_free, dispatch, longest, cost

    for n in range(n_node):
        for i in range(slot_count[n]):
            slot_free[n][i] = 0
    for s in range(n_sub):
        committed[s] = 0
        finish[s] = 0
        preds_left[s] = in_off[s + 1] - in_off[s]
        if preds_left[s] == 0:
            ready[s] = ctx[s * n_node + assign[s]]
        else:
            ready[s] = 0

    makespan = 0
    for _ in range(n_sub):
        best_est = INF
        best_s = -1
        for s in range(n_sub):
            if committed[s] or preds_left[s] > 0:
                continue
            node_free = slot_free[assign[s]][0]
            for i in range(1, slot_count[assign[s]]):
                if slot_free[assign[s]][i] < node_free:
                    node_free = slot_free[assign[s]][i]
            est = ready[s] if ready[s] > node_free else node_free
            if best_s < 0 or est < best_est or (
                est == best_est and order_pos[s] < order_pos[best_s]
            ):
                best_est = est
                best_s = s
        s = best_s
        n = assign[s]
        min_idx = 0
        for i in range(1, slot_count[n]):
            if slot_free[n][i] < slot_free[n][min_idx]:
                min_idx = i
        end = best_est + dur[s * n_node + n]
        slot_free[n][min_idx] = end
        finish[s] = end
        committed[s] = 1
        if end > makespan:
            makespan = end
        for idx in range(out_off[s], out_off[s + 1]):
            t = out_succ[idx]
            preds_left[t] -= 1
            if preds_left[t] == 0:
                dispatch = 0
                longest = ctx[t * n_node + assign[t]]
                for i in range(in_off[t], in_off[t + 1]):
                    e = in_edge[i]
                    p = edge_src[e]
                    if finish[p] > dispatch:
                        dispatch = finish[p]
                    cost = xfer[(e * n_node + assign[p]) * n_node + assign[t]]
                    if cost > longest:
                        longest = cost
                ready[t] = dispatch + longest
    return makespan


def search(int n_sub, int n_node, dur_list, ctx_list, edge_src_list, edge_dst_list,
           xfer_list, slots_list, orders_list):
    """Same contract as py_backend.search."""
    if n_sub > MAX_SUB or n_node > MAX_NODE:
        raise ValueError("instance exceeds compiled kernel limits")
    cdef int n_edges = len(edge_src_list)
    cdef int n_orders = len(orders_list) // n_sub if n_sub else 0
    cdef int i, s, n, e, pos, oi

    cdef long long* dur = <long long*> malloc(max(1, n_sub * n_node) * sizeof(long long))
    cdef long long* ctx = <long long*> malloc(max(1, n_sub * n_node) * sizeof(long long))
    cdef long long* xfer = <long long*> malloc(
        max(1, n_edges * n_node * n_node) * sizeof(long long))
    cdef int* edge_src = <int*> malloc(max(1, n_edges) * sizeof(int))
    cdef int* edge_dst = <int*> malloc(max(1, n_edges) * sizeof(int))
    cdef int* orders = <int*> malloc(max(1, n_orders * n_sub) * sizeof(int))
    cdef int slot_count[MAX_NODE]
    cdef int assign[MAX_SUB]
    cdef int cursor[MAX_SUB]
    cdef int order_pos[MAX_SUB]
    cdef int feas_count[MAX_SUB]
    cdef int feas[MAX_SUB][MAX_NODE]
    cdef int in_off[MAX_SUB + 1]
    cdef int out_off[MAX_SUB + 1]
    cdef int* in_edge = <int*> malloc(max(1, n_edges) * sizeof(int))
    cdef int* out_succ = <int*> malloc(max(1, n_edges) * sizeof(int))
    cdef long long best = INF
    cdef long long span
    cdef int best_order = -1
    cdef int best_assign[MAX_SUB]
    cdef int in_fill[MAX_SUB]
    cdef int out_fill[MAX_SUB]
    cdef int cap

    try:
        for i in range(n_sub * n_node):
            dur[i] = dur_list[i]
            ctx[i] = ctx_list[i]
        for i in range(n_edges * n_node * n_node):
            xfer[i] = xfer_list[i]
        for i in range(n_edges):
            edge_src[i] = edge_src_list[i]
            edge_dst[i] = edge_dst_list[i]
        for i in range(n_orders * n_sub):
            orders[i] = orders_list[i]
        for n in range(n_node):
            cap = slots_list[n]
            if cap > MAX_SLOTS:
                cap = MAX_SLOTS
            slot_count[n] = cap

        for s in range(n_sub):
            feas_count[s] = 0
            for n in range(n_node):
                if dur[s * n_node + n] >= 0:
                    feas[s][feas_count[s]] = n
                    feas_count[s] += 1
            if feas_count[s] == 0:
                return (-1, (), -1)
            assign[s] = feas[s][0]
            cursor[s] = 0

        # CSR adjacency
        for s in range(n_sub + 1):
            in_off[s] = 0
            out_off[s] = 0
        for e in range(n_edges):
            in_off[edge_dst[e] + 1] += 1
            out_off[edge_src[e] + 1] += 1
        for s in range(n_sub):
            in_off[s + 1] += in_off[s]
            out_off[s + 1] += out_off[s]
        for s in range(n_sub):
            in_fill[s] = in_off[s]
            out_fill[s] = out_off[s]
        for e in range(n_edges):
            in_edge[in_fill[edge_dst[e]]] = e
            in_fill[edge_dst[e]] += 1
            out_succ[out_fill[edge_src[e]]] = edge_dst[e]
            out_fill[edge_src[e]] += 1

        while True:
            for oi in range(n_orders):
                for i in range(n_sub):
                    order_pos[orders[oi * n_sub + i]] = i
                span = _simulate(n_sub, n_node, dur, ctx, edge_src, xfer, slot_count,
                                 assign, order_pos, in_off, in_edge, out_off, out_succ)
                if span < best:
                    best = span
                    best_order = oi
                    for i in range(n_sub):
                        best_assign[i] = assign[i]
            pos = n_sub - 1
            while pos >= 0:
                cursor[pos] += 1
                if cursor[pos] < feas_count[pos]:
                    assign[pos] = feas[pos][cursor[pos]]
                    break
                cursor[pos] = 0
                assign[pos] = feas[pos][0]
                pos -= 1
            if pos < 0:
                break

        return (best, tuple(best_assign[i] for i in range(n_sub)), best_order)
    finally:
        free(dur)
        free(ctx)
        free(xfer)
        free(edge_src)
        free(edge_dst)
        free(orders)
        free(in_edge)
        free(out_succ)
