"""Independent oracles used to freeze expected values.

Everything here is deliberately brute-force and shares no code with the hot
paths it checks: joint-configuration-space search, heapq Dijkstra distances,
a pairwise-constraint re-derivation validator, and a straight-line dense
forward pass for the attention network.
"""

import heapq
import itertools
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from lagat.grid import GridMap, Instance, Solution


def dijkstra_dist(gmap: GridMap, goal: int) -> Dict[int, int]:
    dist = {goal: 0}
    heap = [(0, goal)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist.get(v, 1 << 30):
            continue
        y, x = divmod(v, gmap.width)
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nx, ny = x + dx, y + dy
            if not gmap.in_bounds(nx, ny):
                continue
            u = ny * gmap.width + nx
            if not gmap.passable[u]:
                continue
            if d + 1 < dist.get(u, 1 << 30):
                dist[u] = d + 1
                heapq.heappush(heap, (d + 1, u))
    return dist


def joint_successors(gmap: GridMap, config: Tuple[int, ...]):
    """All transitionable successor configurations (exponential; tiny inputs)."""
    n = len(config)
    per_agent = [[config[i]] + gmap.neighbors(config[i]) for i in range(n)]
    for cand in itertools.product(*per_agent):
        if len(set(cand)) != n:
            continue
        swap = False
        for a in range(n):
            for b in range(a + 1, n):
                if cand[a] == config[b] and cand[b] == config[a] and cand[a] != config[a]:
                    swap = True
        if not swap:
            yield cand


def joint_bfs_solvable(instance: Instance) -> bool:
    """Exact solvability by BFS over the joint configuration space."""
    start = tuple(instance.starts)
    goal = tuple(instance.goals)
    if start == goal:
        return True
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for cfg in frontier:
            for succ in joint_successors(instance.map, cfg):
                if succ in seen:
                    continue
                if succ == goal:
                    return True
                seen.add(succ)
                nxt.append(succ)
        frontier = nxt
    return False


def joint_soc_optimum(instance: Instance, t_max: int = 200) -> Optional[int]:
    """Exact optimal stop-time sum-of-costs via Dijkstra over
    (time, configuration, permanently-parked mask)."""
    gmap = instance.map
    n = instance.n
    goal = tuple(instance.goals)
    full = (1 << n) - 1

    def closure(pos, mask):
        for i in range(n):
            if not (mask >> i) & 1 and pos[i] == goal[i]:
                mask |= 1 << i  # parking is a free choice; Dijkstra explores both
        return mask

    start = tuple(instance.starts)
    init_states = [(start, 0)]
    # both choices at every goal visit: parked or still active
    best: Dict[Tuple[int, Tuple[int, ...], int], int] = {}
    heap = []
    counter = 0
    for mask in range(full + 1):
        # valid initial masks: parked agents must start at their goals
        if all(start[i] == goal[i] for i in range(n) if (mask >> i) & 1):
            state = (0, start, mask)
            best[state] = 0
            heap.append((0, counter, state))
            counter += 1
    heapq.heapify(heap)
    while heap:
        cost, _, state = heapq.heappop(heap)
        if cost > best.get(state, -1):
            continue
        t, pos, mask = state
        if mask == full:
            return cost
        if t >= t_max:
            continue
        step = n - bin(mask).count("1")
        options = []
        for i in range(n):
            if (mask >> i) & 1:
                options.append([pos[i]])
            else:
                options.append([pos[i]] + gmap.neighbors(pos[i]))
        for cand in itertools.product(*options):
            if len(set(cand)) != n:
                continue
            swap = any(
                cand[a] == pos[b] and cand[b] == pos[a] and cand[a] != pos[a]
                for a in range(n)
                for b in range(a + 1, n)
            )
            if swap:
                continue
            for new_mask in range(mask, full + 1):
                if new_mask & mask != mask:
                    continue
                if not all(
                    cand[i] == goal[i]
                    for i in range(n)
                    if (new_mask >> i) & 1 and not (mask >> i) & 1
                ):
                    continue
                ns = (t + 1, cand, new_mask)
                nc = cost + step
                if nc < best.get(ns, 1 << 60):
                    best[ns] = nc
                    heapq.heappush(heap, (nc, counter, ns))
                    counter += 1
    return None


def brute_force_validate(instance: Instance, solution: Solution) -> bool:
    """Re-derive every pairwise constraint per timestep from scratch."""
    paths = solution.paths
    if paths.shape[0] != instance.n:
        return False
    n, length = paths.shape
    for i in range(n):
        if paths[i, 0] != instance.starts[i] or paths[i, -1] != instance.goals[i]:
            return False
        for t in range(length):
            v = int(paths[i, t])
            if not instance.map.is_passable(v):
                return False
        for t in range(length - 1):
            u, v = int(paths[i, t]), int(paths[i, t + 1])
            if u != v and v not in instance.map.neighbors(u):
                return False
    for t in range(length):
        for i in range(n):
            for j in range(i + 1, n):
                if paths[i, t] == paths[j, t]:
                    return False
    for t in range(length - 1):
        for i in range(n):
            for j in range(i + 1, n):
                if (
                    paths[i, t + 1] == paths[j, t]
                    and paths[j, t + 1] == paths[i, t]
                    and paths[i, t] != paths[i, t + 1]
                ):
                    return False
    return True


def brute_soc(instance: Instance, solution: Solution) -> int:
    """Stop-time SoC recomputed directly from the definition."""
    total = 0
    for i in range(instance.n):
        path = solution.paths[i]
        cost = 0
        for t in range(len(path)):
            if any(path[u] != instance.goals[i] for u in range(t, len(path))):
                cost = t + 1
        total += cost
    return total


# ---------------------------------------------------------------------------
# Dense straight-line forward pass (no batching, no fused ops)


def _conv3_naive(x, w, b):
    c_out = w.shape[0]
    c_in, h, wd = x.shape
    out = np.zeros((c_out, h - 2, wd - 2))
    for o in range(c_out):
        for yy in range(h - 2):
            for xx in range(wd - 2):
                acc = 0.0
                for c in range(c_in):
                    for ky in range(3):
                        for kx in range(3):
                            acc += w[o, c, ky, kx] * x[c, yy + ky, xx + kx]
                out[o, yy, xx] = max(acc + b[o], 0.0)
    return out


def gnn_forward_oracle(weights, observations, graph):
    t = {k: v.astype(np.float64) for k, v in weights.tensors.items()}
    n = graph.n
    xs = []
    for i in range(n):
        h = observations[i].astype(np.float64)
        for conv in ("conv1", "conv2", "conv3"):
            h = _conv3_naive(h, t[f"cnn.{conv}.weight"], t[f"cnn.{conv}.bias"])
        xs.append(np.array([h[c].max() for c in range(h.shape[0])]))

    edge_w = []
    for i in range(n):
        rows = []
        for f in graph.in_features[i]:
            hid = np.maximum(
                t["edge_mlp.fc1.weight"] @ f + t["edge_mlp.fc1.bias"], 0.0
            )
            rows.append(t["edge_mlp.fc2.weight"] @ hid + t["edge_mlp.fc2.bias"])
        edge_w.append(rows)

    slope = weights.leaky_slope
    for l in range(weights.num_layers):
        w_r = t[f"layers.{l}.W_R"]
        w_n = t[f"layers.{l}.W_n"]
        w_e = t[f"layers.{l}.W_e"]
        th_n = t[f"layers.{l}.Theta_n"]
        th_e = t[f"layers.{l}.Theta_e"]
        new_xs = []
        for i in range(n):
            js = graph.in_neighbors[i]
            m = np.zeros(len(xs[i]))
            if len(js):
                logits = []
                for idx, j in enumerate(js):
                    a_ij = xs[i] @ (th_n @ xs[j] + th_e @ edge_w[i][idx])
                    logits.append(a_ij if a_ij > 0 else slope * a_ij)
                mx = max(logits)
                exps = [math.exp(v - mx) for v in logits]
                z = sum(exps)
                for idx, j in enumerate(js):
                    alpha = exps[idx] / z
                    m = m + alpha * (w_n @ xs[j] + w_e @ edge_w[i][idx])
            new_xs.append(np.maximum(w_r @ xs[i] + m, 0.0))
        xs = new_xs

    probs = []
    for i in range(n):
        h = np.maximum(
            t["decoder.fc1.weight"] @ xs[i] + t["decoder.fc1.bias"], 0.0
        )
        logits = t["decoder.fc2.weight"] @ h + t["decoder.fc2.bias"]
        mx = logits.max()
        e = np.exp(logits - mx)
        probs.append(e / e.sum())
    return np.stack(probs)
