"""Primal network simplex for the dense transportation problem.

Compiled with numba.  The network has ``n`` source nodes, ``m`` sink nodes
and an artificial root joined to every node by a high-cost arc, which gives
a strongly feasible starting tree.  The leaving arc is chosen by
Cunningham's rule (last blocking arc on the cycle, traversed from the apex
in the direction of the entering arc) so zero-flow tree arcs always point
away from the root and degenerate pivots cannot cycle.
"""

import numpy as np
from numba import njit

STATUS_OPTIMAL = 0
STATUS_MAX_ITER = 1
STATUS_INFEASIBLE = 2


@njit(cache=True)
def _arc_ends(e, n, m, art_tail, art_head):
    nm = n * m
    if e < nm:
        return e // m, n + e % m
    k = e - nm
    return art_tail[k], art_head[k]


@njit(cache=True)
def _arc_cost(e, n, m, C, art_cost):
    if e < n * m:
        return C[e // m, e % m]
    return art_cost


@njit(cache=True)
def _reduced_cost(e, n, m, C, art_cost, art_tail, art_head, pot):
    t, h = _arc_ends(e, n, m, art_tail, art_head)
    return _arc_cost(e, n, m, C, art_cost) + pot[t] - pot[h]


@njit(cache=True)
def network_simplex(a, b, C, bland, max_iter):
    n = a.shape[0]
    m = b.shape[0]
    nm = n * m
    root = n + m
    n_nodes = n + m + 1
    n_arcs = nm + n + m

    cmax = 0.0
    for i in range(n):
        for j in range(m):
            if abs(C[i, j]) > cmax:
                cmax = abs(C[i, j])
    art_cost = (cmax + 1.0) * n_nodes
    tol = 1e-12 * art_cost

    art_tail = np.empty(n + m, np.int64)
    art_head = np.empty(n + m, np.int64)
    flow = np.zeros(n_arcs)
    in_tree = np.zeros(n_arcs, np.bool_)

    parent = np.empty(n_nodes, np.int64)
    pred = np.empty(n_nodes, np.int64)
    up = np.zeros(n_nodes, np.bool_)
    depth = np.zeros(n_nodes, np.int64)
    pot = np.zeros(n_nodes)
    stamp = np.zeros(n_nodes, np.int64)
    buf = np.empty(n_nodes, np.int64)

    parent[root] = -1
    pred[root] = -1
    for k in range(n + m):
        e = nm + k
        if k < n and a[k] > 0.0:
            art_tail[k] = k
            art_head[k] = root
            flow[e] = a[k]
            up[k] = True
            pot[k] = -art_cost
        else:
            art_tail[k] = root
            art_head[k] = k
            flow[e] = b[k - n] if k >= n else 0.0
            up[k] = False
            pot[k] = art_cost
        in_tree[e] = True
        parent[k] = root
        pred[k] = e
        depth[k] = 1

    block = max(10, int(np.sqrt(nm)))
    next_arc = 0
    it = 0
    status = STATUS_OPTIMAL
    round_id = 0

    while True:
        # -- pricing (real arcs only; artificial arcs never re-enter) -------
        enter = -1
        if bland:
            for i in range(n):
                pi = pot[i]
                for j in range(m):
                    e = i * m + j
                    if not in_tree[e] and C[i, j] + pi - pot[n + j] < -tol:
                        enter = e
                        break
                if enter >= 0:
                    break
        else:
            best = -tol
            cnt = 0
            i = next_arc // m
            j = next_arc % m
            for _ in range(nm):
                e = i * m + j
                if not in_tree[e]:
                    d = C[i, j] + pot[i] - pot[n + j]
                    if d < best:
                        best = d
                        enter = e
                cnt += 1
                j += 1
                if j == m:
                    j = 0
                    i += 1
                    if i == n:
                        i = 0
                if cnt == block:
                    if enter >= 0:
                        break
                    cnt = 0
            next_arc = i * m + j
        if enter < 0:
            break
        if it >= max_iter:
            status = STATUS_MAX_ITER
            break
        it += 1

        u, v = _arc_ends(enter, n, m, art_tail, art_head)

        # -- apex of the cycle --------------------------------------------------
        x = u
        y = v
        while depth[x] > depth[y]:
            x = parent[x]
        while depth[y] > depth[x]:
            y = parent[y]
        while x != y:
            x = parent[x]
            y = parent[y]
        apex = x

        # -- leaving arc (last blocking arc from the apex) ---------------------
        nu = 0
        x = u
        while x != apex:
            buf[nu] = x
            nu += 1
            x = parent[x]
        delta = np.inf
        leave = -1
        leave_on_u = True
        for k in range(nu - 1, -1, -1):
            x = buf[k]
            if up[x]:
                r = flow[pred[x]]
                if r <= delta:
                    delta = r
                    leave = x
                    leave_on_u = True
        x = v
        while x != apex:
            if not up[x]:
                r = flow[pred[x]]
                if r <= delta:
                    delta = r
                    leave = x
                    leave_on_u = False
            x = parent[x]

        # -- push flow ----------------------------------------------------------
        flow[enter] += delta
        for k in range(nu):
            x = buf[k]
            if up[x]:
                flow[pred[x]] -= delta
            else:
                flow[pred[x]] += delta
        x = v
        while x != apex:
            if up[x]:
                flow[pred[x]] += delta
            else:
                flow[pred[x]] -= delta
            x = parent[x]

        # -- re-hang the detached subtree on the entering arc -----------------
        out_arc = pred[leave]
        in_tree[out_arc] = False
        in_tree[enter] = True
        if leave_on_u:
            s = u
            t = v
        else:
            s = v
            t = u
        new_par = t
        new_arc = enter
        new_up = art_or_real_tail_is(enter, s, n, m, art_tail, art_head)
        x = s
        while True:
            old_par = parent[x]
            old_arc = pred[x]
            old_up = up[x]
            parent[x] = new_par
            pred[x] = new_arc
            up[x] = new_up
            if x == leave:
                break
            new_par = x
            new_arc = old_arc
            new_up = not old_up
            x = old_par

        # -- refresh depth and potentials ---------------------------------------
        round_id += 1
        stamp[root] = round_id
        for z in range(n_nodes):
            if stamp[z] == round_id:
                continue
            ln = 0
            y = z
            while stamp[y] != round_id:
                buf[ln] = y
                ln += 1
                y = parent[y]
            for k in range(ln - 1, -1, -1):
                y = buf[k]
                p = parent[y]
                c = _arc_cost(pred[y], n, m, C, art_cost)
                depth[y] = depth[p] + 1
                if up[y]:
                    pot[y] = pot[p] - c
                else:
                    pot[y] = pot[p] + c
                stamp[y] = round_id

    plan = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            plan[i, j] = flow[i * m + j]
    art_flow = 0.0
    for k in range(n + m):
        art_flow += flow[nm + k]
    if status == STATUS_OPTIMAL and art_flow > 1e-9:
        status = STATUS_INFEASIBLE
    u_dual = np.empty(n)
    v_dual = np.empty(m)
    for i in range(n):
        u_dual[i] = -pot[i]
    for j in range(m):
        v_dual[j] = pot[n + j]
    return plan, u_dual, v_dual, it, status


@njit(cache=True)
def art_or_real_tail_is(e, node, n, m, art_tail, art_head):
    t, h = _arc_ends(e, n, m, art_tail, art_head)
    return t == node
