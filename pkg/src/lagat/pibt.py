"""One-step configuration generation: preferences, dynamic priorities, and
PIBT with priority inheritance and backtracking.

The collision-resolution recursion runs in a kernel (numba or numpy backend);
preference providers are arbitrary Python callbacks, so learned policies plug
in without touching the hot path.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from . import kernels
from .grid import DistField, GridMap

# re-exported status codes
PIBT_OK = kernels.PIBT_OK
PIBT_FAIL = kernels.PIBT_FAIL
PIBT_CONSTRAINT_INFEASIBLE = kernels.PIBT_CONSTRAINT_INFEASIBLE

Configuration = Tuple[int, ...]
PreferenceProvider = Callable[[int], Sequence[int]]


@dataclass(frozen=True)
class Preference:
    """Ordered one-step candidate vertices for one agent."""

    agent: int
    candidates: Tuple[int, ...]


@dataclass(frozen=True)
class Constraint:
    """Partial assignment of agents to next vertices (low-level search node)."""

    assignments: Tuple[Tuple[int, int], ...] = ()

    @property
    def depth(self) -> int:
        return len(self.assignments)

    def extended(self, agent: int, vertex: int) -> "Constraint":
        return Constraint(self.assignments + ((agent, vertex),))


C_INIT = Constraint()


@dataclass(frozen=True)
class PriorityState:
    """Per-agent dynamic priorities: elapsed steps off goal + id fraction."""

    priority: np.ndarray  # (n,) float64, pairwise distinct
    steps: np.ndarray  # (n,) int64 steps since last at goal

    @staticmethod
    def initial(n: int) -> "PriorityState":
        steps = np.zeros(n, dtype=np.int64)
        prio = steps + np.arange(n) / (n + 1)
        return PriorityState(priority=prio, steps=steps)

    def order(self) -> np.ndarray:
        """Agent ids in descending priority."""
        return np.argsort(-self.priority, kind="stable").astype(np.int32)


def update_priorities(
    priorities: PriorityState, config: Configuration, goals: Sequence[int]
) -> PriorityState:
    n = len(config)
    at_goal = np.array([config[i] == goals[i] for i in range(n)])
    steps = np.where(at_goal, 0, priorities.steps + 1)
    prio = steps + np.arange(n) / (n + 1)
    return PriorityState(priority=prio, steps=steps)


def default_preference(
    agent: int,
    config: Configuration,
    dist: DistField,
    gmap: GridMap,
    seed: int = 0,
    node_id: int = 0,
) -> Preference:
    """Candidates ascending by dist-to-goal; ties shuffled per (seed, node, agent)."""
    v = config[agent]
    cands = [v] + gmap.neighbors(v)
    state = kernels._mix(seed, node_id, agent)
    for a in range(len(cands) - 1, 0, -1):
        state = kernels._lcg_next(state)
        b = state % (a + 1)
        cands[a], cands[b] = cands[b], cands[a]
    cands.sort(key=lambda u: dist[u])  # stable: preserves shuffled tie order
    return Preference(agent=agent, candidates=tuple(cands))


@dataclass(frozen=True)
class PibtOutcome:
    config: Optional[Configuration]
    status: int  # PIBT_OK | PIBT_FAIL | PIBT_CONSTRAINT_INFEASIBLE

    @property
    def ok(self) -> bool:
        return self.status == PIBT_OK


def pibt_step(
    gmap: GridMap,
    config: Configuration,
    priorities: PriorityState,
    prefs: Union[PreferenceProvider, Sequence[Sequence[int]]],
    constraint: Constraint = C_INIT,
) -> PibtOutcome:
    """One PIBT step honoring `constraint` pins exactly.

    `prefs` is either a callback (agent -> ordered candidates) or a
    per-agent list of candidate lists. Candidates outside neigh(Q[i]) + stay
    are dropped; duplicates are dropped.
    """
    n = len(config)
    cfg = np.asarray(config, dtype=np.int32)
    pinned = np.full(n, -1, dtype=np.int32)
    seen_agents = set()
    for agent, vertex in constraint.assignments:
        if agent in seen_agents:
            raise ValueError(f"agent {agent} pinned twice")
        seen_agents.add(agent)
        feasible = {config[agent], *gmap.neighbors(config[agent])}
        if vertex not in feasible:
            raise ValueError(
                f"pin {vertex} not reachable in one step for agent {agent}"
            )
        pinned[agent] = vertex

    prefs_arr = np.full((n, 5), -1, dtype=np.int32)
    plen = np.zeros(n, dtype=np.int32)
    for i in range(n):
        if pinned[i] >= 0:
            continue  # pin replaces the preference list
        cand = prefs(i) if callable(prefs) else prefs[i]
        feasible = {config[i], *gmap.neighbors(config[i])}
        m = 0
        taken = set()
        for v in cand:
            v = int(v)
            if v in feasible and v not in taken:
                prefs_arr[i, m] = v
                taken.add(v)
                m += 1
        plen[i] = m

    occ_now = np.full(gmap.num_cells, -1, dtype=np.int32)
    occ_now[cfg] = np.arange(n, dtype=np.int32)
    occ_next = np.full(gmap.num_cells, -1, dtype=np.int32)
    next_loc = np.full(n, -1, dtype=np.int32)
    st_agent = np.empty(n, dtype=np.int32)
    st_k = np.empty(n, dtype=np.int32)
    status = kernels.pibt_resolve(
        cfg, prefs_arr, plen, priorities.order(), pinned,
        occ_now, occ_next, next_loc, st_agent, st_k,
    )
    if status != PIBT_OK:
        return PibtOutcome(config=None, status=int(status))
    return PibtOutcome(config=tuple(int(v) for v in next_loc), status=PIBT_OK)
