"""Hot numeric kernels: BFS distance fields, default preference construction,
and the PIBT one-step collision resolution.

Every function here is written in numba-compatible numpy/loop style and is
compiled or interpreted depending on :mod:`lagat.backend`.
"""

import numpy as np

from .backend import jit

# pibt_resolve status codes
PIBT_OK = 0
PIBT_FAIL = 1
PIBT_CONSTRAINT_INFEASIBLE = 2

_LCG_MASK = 0x7FFFFFFF


@jit
def bfs_fill(neigh, deg, goal, unreachable, dist, queue):
    """Exact BFS shortest-path lengths from `goal` over the passable subgraph.

    neigh: (V, 4) int32 neighbor table, -1 padded; deg: (V,) uint8.
    dist must be prefilled with `unreachable`; queue is (V,) int32 scratch.
    """
    dist[goal] = 0
    queue[0] = goal
    head = 0
    tail = 1
    while head < tail:
        v = queue[head]
        head += 1
        dv = dist[v]
        for k in range(deg[v]):
            u = neigh[v, k]
            if dist[u] == unreachable:
                dist[u] = dv + 1
                queue[tail] = u
                tail += 1


@jit
def _mix(seed, node_id, agent):
    # small deterministic LCG state from (search seed, node id, agent id)
    s = (seed * 2654435761 + node_id * 40503 + agent * 9781 + 1) & _LCG_MASK
    s = (s * 1103515245 + 12345) & _LCG_MASK
    return s


@jit
def _lcg_next(state):
    return (state * 1103515245 + 12345) & _LCG_MASK


@jit
def build_default_prefs(config, dist_all, neigh, deg, seed, node_id, prefs, plen):
    """Default cost-to-go preferences for all agents.

    Candidates are neigh(Q[i]) plus the stay action, sorted ascending by
    dist-to-goal; ties are broken by a seeded per-(seed, node, agent) shuffle.
    Writes into prefs (n, 5) and plen (n,).
    """
    n = config.shape[0]
    for i in range(n):
        v = config[i]
        m = 0
        prefs[i, m] = v
        m += 1
        for k in range(deg[v]):
            prefs[i, m] = neigh[v, k]
            m += 1
        plen[i] = m
        # Fisher-Yates shuffle so equal-dist candidates get a random order
        state = _mix(seed, node_id, i)
        for a in range(m - 1, 0, -1):
            state = _lcg_next(state)
            b = state % (a + 1)
            tmp = prefs[i, a]
            prefs[i, a] = prefs[i, b]
            prefs[i, b] = tmp
        # stable insertion sort by dist ascending keeps the shuffled tie order
        for a in range(1, m):
            cand = prefs[i, a]
            key = dist_all[i, cand]
            b = a - 1
            while b >= 0 and dist_all[i, prefs[i, b]] > key:
                prefs[i, b + 1] = prefs[i, b]
                b -= 1
            prefs[i, b + 1] = cand


@jit
def pibt_resolve(config, prefs, plen, order, pinned, occ_now, occ_next, next_loc,
                 st_agent, st_k):
    """One PIBT step with priority inheritance and backtracking.

    Constraint pins are pre-applied; then agents are resolved in `order`
    (descending priority). Returns PIBT_OK / PIBT_FAIL /
    PIBT_CONSTRAINT_INFEASIBLE; on PIBT_OK, next_loc holds the new
    configuration.

    occ_now must map vertex -> occupying agent (-1 free); occ_next and
    next_loc must be prefilled with -1.
    """
    n = config.shape[0]
    # apply constraint pins first; mutually inconsistent pins are rejected
    for idx in range(n):
        i = order[idx]
        p = pinned[i]
        if p >= 0:
            if occ_next[p] != -1:
                return PIBT_CONSTRAINT_INFEASIBLE
            j = occ_now[p]
            if j != -1 and j != i and pinned[j] == config[i]:
                return PIBT_CONSTRAINT_INFEASIBLE  # pinned pair would swap
            occ_next[p] = i
            next_loc[i] = p

    for idx in range(n):
        root = order[idx]
        if next_loc[root] != -1:
            continue
        sp = 0
        st_agent[sp] = root
        st_k[sp] = 0
        sp = 1
        done = False
        while sp > 0:
            i = st_agent[sp - 1]
            k = st_k[sp - 1]
            pushed = False
            reserved = False
            while k < plen[i]:
                v = prefs[i, k]
                k += 1
                if occ_next[v] != -1:
                    continue
                j = occ_now[v]
                if j != -1 and next_loc[j] == config[i]:
                    continue  # would swap
                occ_next[v] = i
                next_loc[i] = v
                st_k[sp - 1] = k
                if j != -1 and j != i and next_loc[j] == -1:
                    # priority inheritance: displaced agent decides first
                    st_agent[sp] = j
                    st_k[sp] = 0
                    sp += 1
                    pushed = True
                else:
                    reserved = True
                break
            if pushed:
                continue
            if reserved:
                done = True  # success propagates to the root
                break
            # all candidates refused: forced stay, backtrack to requester
            next_loc[i] = config[i]
            occ_next[config[i]] = i
            sp -= 1
        if not done:
            return PIBT_FAIL
    return PIBT_OK
