"""Pure-Python exhaustive search over assignment maps x topological orders.

Each combination is simulated as work-conserving priority list scheduling with
the same readiness/transfer/slot rules as the engine, so a witness replayed
through the engine reproduces the returned makespan exactly.
"""

INFINITY = float("inf")


def search(n_sub, n_node, dur, ctx, edge_src, edge_dst, xfer, slots, orders):
    """Minimal makespan over all feasible assignments and the given orders.

    dur:   n_sub*n_node flat int array, microseconds, -1 = infeasible
    ctx:   n_sub*n_node flat int array, source-context transfer per node
    xfer:  n_edges*n_node*n_node flat int array, per-edge transfer cost
    orders: flat n_orders*n_sub priority permutations (topological)
    Returns (best_makespan_us, best_assignment tuple, best_order_index).
    """
    feasible = []
    for s in range(n_sub):
        nodes = [n for n in range(n_node) if dur[s * n_node + n] >= 0]
        if not nodes:
            return (-1, (), -1)
        feasible.append(nodes)
    in_edges = [[] for _ in range(n_sub)]
    out_succ = [[] for _ in range(n_sub)]
    for e in range(len(edge_src)):
        in_edges[edge_dst[e]].append(e)
        out_succ[edge_src[e]].append(edge_dst[e])
    n_orders = len(orders) // n_sub

    best = INFINITY
    best_assign = None
    best_order = -1

    assign = [nodes[0] for nodes in feasible]
    cursor = [0] * n_sub
    while True:
        for oi in range(n_orders):
            span = _simulate(n_sub, n_node, dur, ctx, edge_src, xfer, slots,
                             assign, orders, oi * n_sub, in_edges, out_succ)
            if span < best:
                best = span
                best_assign = tuple(assign)
                best_order = oi
        pos = n_sub - 1
        while pos >= 0:
            cursor[pos] += 1
            if cursor[pos] < len(feasible[pos]):
                assign[pos] = feasible[pos][cursor[pos]]
                break
            cursor[pos] = 0
            assign[pos] = feasible[pos][0]
            pos -= 1
        if pos < 0:
            break
    return (int(best), best_assign, best_order)


def _simulate(n_sub, n_node, dur, ctx, edge_src, xfer, slots, assign, orders, base,
              in_edges, out_succ):
    nn = n_node
    order_pos = [0] * n_sub
    for i in range(n_sub):
        order_pos[orders[base + i]] = i

    slot_free = [[0] * slots[n] for n in range(n_node)]
    finish = [0] * n_sub
    committed = [False] * n_sub
    preds_left = [len(in_edges[s]) for s in range(n_sub)]
    ready = [0] * n_sub
    for s in range(n_sub):
        if preds_left[s] == 0:
            ready[s] = ctx[s * nn + assign[s]]

    makespan = 0
    for _ in range(n_sub):
        best_est = INFINITY
        best_s = -1
        for s in range(n_sub):
            if committed[s] or preds_left[s] > 0:
                continue
            node_free = min(slot_free[assign[s]])
            est = ready[s] if ready[s] > node_free else node_free
            if best_s < 0 or est < best_est or (
                est == best_est and order_pos[s] < order_pos[best_s]
            ):
                best_est = est
                best_s = s
        s = best_s
        frees = slot_free[assign[s]]
        idx = frees.index(min(frees))
        end = best_est + dur[s * nn + assign[s]]
        frees[idx] = end
        finish[s] = end
        committed[s] = True
        if end > makespan:
            makespan = end
        for t in out_succ[s]:
            preds_left[t] -= 1
            if preds_left[t] == 0:
                # all transfers start when the last predecessor finishes
                dispatch = 0
                longest = ctx[t * nn + assign[t]]
                for e in in_edges[t]:
                    p = edge_src[e]
                    if finish[p] > dispatch:
                        dispatch = finish[p]
                    cost = xfer[(e * nn + assign[p]) * nn + assign[t]]
                    if cost > longest:
                        longest = cost
                ready[t] = dispatch + longest
    return makespan
