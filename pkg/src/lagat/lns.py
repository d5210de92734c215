"""Anytime post-processing: large-neighborhood refinement of a feasible
solution. Iteratively selects an agent subset, re-plans it against the frozen
remainder with space-time shortest paths, and accepts strict SoC improvements
until the deadline.
"""

import heapq
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .grid import Instance, Solution, validate_solution
from .metrics import agent_cost, sum_of_costs

RANDOM = "RANDOM"
FAILURE_BASED = "FAILURE_BASED"


@dataclass(frozen=True)
class Neighborhood:
    agents: Tuple[int, ...]
    kind: str  # RANDOM | FAILURE_BASED


def _fixed_position(path: np.ndarray, t: int) -> int:
    return int(path[min(t, len(path) - 1)])


class _FixedPaths:
    """Occupancy view of frozen agents; they rest at their final cell forever."""

    def __init__(self, paths: List[np.ndarray]):
        self.paths = paths
        self.horizon = max((len(p) for p in paths), default=0)

    def vertex_occupied(self, v: int, t: int) -> bool:
        return any(_fixed_position(p, t) == v for p in self.paths)

    def edge_conflict(self, u: int, v: int, t: int) -> bool:
        # our move u -> v during step t -> t+1 swaps with a fixed v -> u move
        return any(
            _fixed_position(p, t) == v and _fixed_position(p, t + 1) == u
            for p in self.paths
        )

    def last_time_at(self, v: int) -> int:
        """Last t with some fixed agent at v; -1 if never, inf if parked there."""
        last = -1
        for p in self.paths:
            if int(p[-1]) == v:
                return 1 << 30
            occ = np.flatnonzero(p == v)
            if occ.size:
                last = max(last, int(occ[-1]))
        return last


def space_time_astar(
    instance: Instance,
    agent: int,
    fixed: _FixedPaths,
    t_max: int,
) -> Optional[np.ndarray]:
    """Min-stop-time path start -> goal avoiding the fixed paths.

    The agent parks at its goal after arrival, so an arrival time is valid
    only once no fixed agent visits the goal again.
    """
    gmap = instance.map
    start, goal = instance.starts[agent], instance.goals[agent]
    dist = instance.dist_field(agent).dist
    unreachable = gmap.unreachable
    earliest_goal = fixed.last_time_at(goal) + 1
    if earliest_goal >= (1 << 30):
        return None

    counter = 0
    h0 = int(dist[start])
    if h0 >= unreachable:
        return None
    heap = [(h0, 0, counter, start, 0, None)]
    seen = set()
    parents = {}
    while heap:
        f, g, _, v, t, parent_key = heapq.heappop(heap)
        key = (v, t)
        if key in seen:
            continue
        seen.add(key)
        parents[key] = parent_key
        if v == goal and t >= earliest_goal:
            path = []
            k: Optional[Tuple[int, int]] = key
            while k is not None:
                path.append(k[0])
                k = parents[k]
            path.reverse()
            return np.array(path, dtype=np.int32)
        if t >= t_max:
            continue
        for u in [v] + gmap.neighbors(v):
            if fixed.vertex_occupied(u, t + 1):
                continue
            if u != v and fixed.edge_conflict(v, u, t):
                continue
            nkey = (u, t + 1)
            if nkey in seen:
                continue
            counter += 1
            hu = int(dist[u])
            if hu >= unreachable:
                continue
            heapq.heappush(heap, (t + 1 + hu, t + 1, counter, u, t + 1, key))
    return None


def _exact_joint_repair(
    instance: Instance,
    subset: Sequence[int],
    fixed: _FixedPaths,
    t_max: int,
) -> Optional[List[np.ndarray]]:
    """SoC-optimal re-plan for a subset of <= 2 agents against fixed paths.

    Dijkstra over (t, positions, done-mask): a done agent has permanently
    parked at its goal; each step costs one per not-yet-done agent, which sums
    the stop times exactly.
    """
    gmap = instance.map
    m = len(subset)
    goals = [instance.goals[a] for a in subset]
    starts = [instance.starts[a] for a in subset]
    earliest = []
    for g in goals:
        e = fixed.last_time_at(g) + 1
        if e >= (1 << 30):
            return None
        earliest.append(e)

    def done_closure(t, pos, mask):
        for a in range(m):
            if not (mask >> a) & 1 and pos[a] == goals[a] and t >= earliest[a]:
                mask |= 1 << a
        return mask

    start_mask = done_closure(0, tuple(starts), 0)
    init = (0, tuple(starts), start_mask)
    dist_cost = {init: 0}
    parents = {init: None}
    heap = [(0, 0, init)]
    counter = 0
    full = (1 << m) - 1
    best_goal_state = None
    while heap:
        cost, _, state = heapq.heappop(heap)
        if cost > dist_cost.get(state, -1):
            continue
        t, pos, mask = state
        if mask == full:
            best_goal_state = state
            break
        if t >= t_max:
            continue
        step_cost = m - bin(mask).count("1")
        # candidate moves per agent (done agents stay)
        options = []
        for a in range(m):
            if (mask >> a) & 1:
                options.append([pos[a]])
            else:
                cands = []
                for u in [pos[a]] + gmap.neighbors(pos[a]):
                    if fixed.vertex_occupied(u, t + 1):
                        continue
                    if u != pos[a] and fixed.edge_conflict(pos[a], u, t):
                        continue
                    cands.append(u)
                options.append(cands)

        def product(idx, chosen):
            if idx == m:
                yield tuple(chosen)
                return
            for u in options[idx]:
                chosen.append(u)
                yield from product(idx + 1, chosen)
                chosen.pop()

        for new_pos in product(0, []):
            if len(set(new_pos)) != m:
                continue
            swap = any(
                new_pos[a] == pos[b] and new_pos[b] == pos[a]
                for a in range(m)
                for b in range(a + 1, m)
                if new_pos[a] != pos[a]
            )
            if swap:
                continue
            new_mask = done_closure(t + 1, new_pos, mask)
            new_state = (t + 1, new_pos, new_mask)
            new_cost = cost + step_cost
            if new_cost < dist_cost.get(new_state, 1 << 60):
                dist_cost[new_state] = new_cost
                parents[new_state] = state
                counter += 1
                heapq.heappush(heap, (new_cost, counter, new_state))
    if best_goal_state is None:
        return None
    chain = []
    s = best_goal_state
    while s is not None:
        chain.append(s[1])
        s = parents[s]
    chain.reverse()
    return [
        np.array([c[a] for c in chain], dtype=np.int32) for a in range(m)
    ]


def _assemble(instance: Instance, paths: List[np.ndarray]) -> Solution:
    """Pad per-agent paths with goal rests to a common, trimmed length."""
    costs = [
        agent_cost(p, instance.goals[i]) for i, p in enumerate(paths)
    ]
    length = max(max(costs) + 1, 1)
    out = np.empty((instance.n, length), dtype=np.int32)
    for i, p in enumerate(paths):
        if len(p) >= length:
            out[i] = p[:length]
        else:
            out[i, : len(p)] = p
            out[i, len(p):] = instance.goals[i]
    return Solution(paths=out)


def select_neighborhood(
    instance: Instance,
    paths: List[np.ndarray],
    k: int,
    kind: str,
    rng: np.random.Generator,
) -> Neighborhood:
    n = instance.n
    k = min(k, n)
    if kind == RANDOM:
        agents = tuple(int(a) for a in rng.choice(n, size=k, replace=False))
    else:
        gaps = [
            agent_cost(paths[i], instance.goals[i])
            - int(instance.dist_field(i)[instance.starts[i]])
            for i in range(n)
        ]
        order = sorted(range(n), key=lambda i: (-gaps[i], i))
        agents = tuple(order[:k])
    return Neighborhood(agents=agents, kind=kind)


def refine(
    instance: Instance,
    solution: Solution,
    deadline: Optional[float],
    seed: int = 0,
    k: int = 8,
    stall_limit: int = 30,
    history: Optional[List[int]] = None,
) -> Solution:
    """Destroy-and-repair until the deadline; strict-improvement acceptance.

    deadline is in seconds (0 returns the input verbatim, None means run
    until `stall_limit` consecutive non-improving iterations).
    """
    report = validate_solution(instance, solution)
    if not report.ok:
        raise ValueError(f"infeasible input solution: {report.violations[:3]}")
    if deadline is not None and deadline <= 0:
        return solution

    t_end = None if deadline is None else time.perf_counter() + deadline
    rng = np.random.default_rng(seed)
    best_paths = [solution.paths[i].copy() for i in range(instance.n)]
    best_soc = sum_of_costs(instance, solution)
    if history is not None:
        history.append(best_soc)
    kinds = [RANDOM, FAILURE_BASED]
    stall = 0
    it = 0
    while True:
        if t_end is not None and time.perf_counter() >= t_end:
            break
        if t_end is None and stall >= stall_limit:
            break
        nb = select_neighborhood(
            instance, best_paths, k, kinds[it % 2], rng
        )
        it += 1
        subset = list(nb.agents)
        fixed = _FixedPaths(
            [best_paths[i] for i in range(instance.n) if i not in nb.agents]
        )
        t_max = max(len(p) for p in best_paths) + instance.map.num_cells
        new_sub: Optional[List[np.ndarray]] = None
        if len(subset) <= 2:
            new_sub = _exact_joint_repair(instance, subset, fixed, t_max)
        else:
            order = [subset[j] for j in rng.permutation(len(subset))]
            planned = {}
            ok = True
            for a in order:
                fixed_now = _FixedPaths(fixed.paths + list(planned.values()))
                p = space_time_astar(instance, a, fixed_now, t_max)
                if p is None:
                    ok = False
                    break
                planned[a] = p
            if ok:
                new_sub = [planned[a] for a in subset]
        if new_sub is None:
            stall += 1
            continue
        cand_paths = list(best_paths)
        for a, p in zip(subset, new_sub):
            cand_paths[a] = p
        cand = _assemble(instance, cand_paths)
        cand_soc = sum_of_costs(instance, cand)
        if cand_soc < best_soc and validate_solution(instance, cand).ok:
            best_soc = cand_soc
            best_paths = [cand.paths[i].copy() for i in range(instance.n)]
            if history is not None:
                history.append(best_soc)
            stall = 0
        else:
            stall += 1
    return _assemble(instance, best_paths)
