"""Lazy-constraints configuration search.

Stack-based exploration over configurations: each node pop generates one PIBT
successor under the next constraint from the node's low-level tree; further
successors appear as constraints are synthesized lazily. An explored table
deduplicates configurations (hit => skip, no parent rewiring). Hosts the
deadlock-detection hook and the per-node unguided-agent override.
"""

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Set, Tuple

import numpy as np

from . import kernels
from .deadlock import deadlock_detection
from .grid import GridMap, Instance, Solution
from .pibt import C_INIT, Constraint, PriorityState, update_priorities

Configuration = Tuple[int, ...]

SOLVED = "SOLVED"
NO_SOLUTION = "NO_SOLUTION"
TIMEOUT = "TIMEOUT"

# provider: (agent, configuration, node context) -> ordered candidate vertices
NodeProvider = Callable[[int, Configuration, "NodeContext"], Sequence[int]]

_TIME_CHECK_EVERY = 64


@dataclass
class SolverOptions:
    time_limit: float = 30.0
    deadlock_depth: int = 2
    policy: Optional[object] = None  # PolicyWeights
    provider: Optional[NodeProvider] = None  # overrides policy if set
    anytime: bool = False
    seed: int = 0
    no_policy: bool = False
    no_deadlock_detection: bool = False
    inherit_unguided: bool = True
    lns_k: int = 8

    def __post_init__(self):
        if self.deadlock_depth < 0:
            raise ValueError("deadlock depth must be >= 0")
        if self.time_limit <= 0:
            raise ValueError("time limit must be > 0")


@dataclass
class NodeContext:
    """Per-node information handed to preference providers."""

    node_id: int
    seed: int
    instance: Instance


class SearchNode:
    __slots__ = (
        "config", "cfg_arr", "tree", "parent", "unguided",
        "priorities", "order", "id",
    )

    def __init__(self, config, parent, unguided, priorities, node_id):
        self.config: Configuration = config
        self.cfg_arr = np.asarray(config, dtype=np.int32)
        self.tree = deque([C_INIT])
        self.parent: Optional[SearchNode] = parent
        self.unguided: Set[int] = unguided
        self.priorities: PriorityState = priorities
        self.order = priorities.order()
        self.id = node_id


@dataclass
class DeadlockEvent:
    expansion: int
    ancestor_id: int
    agents: Tuple[int, ...]


@dataclass
class SolveResult:
    status: str
    solution: Optional[Solution] = None
    soc: Optional[int] = None
    init_soc: Optional[int] = None
    init_time: Optional[float] = None
    final_time: float = 0.0
    expansions: int = 0
    node_count: int = 0
    deadlock_events: List[DeadlockEvent] = field(default_factory=list)
    partial_paths: Optional[np.ndarray] = None


def update_constraints(node: SearchNode, popped: Constraint, gmap: GridMap) -> None:
    """Append children of `popped` to the node's low-level tree.

    Depth-k constraints branch over all one-step targets of the (k+1)-th agent
    in descending-priority order; depth-n constraints are leaves.
    """
    k = popped.depth
    n = len(node.config)
    if k >= n:
        return
    agent = int(node.order[k])
    v = node.config[agent]
    node.tree.append(popped.extended(agent, v))
    for u in gmap.neigh[v, : gmap.deg[v]]:
        node.tree.append(popped.extended(agent, int(u)))


def backtrack(node: SearchNode) -> Solution:
    configs = []
    cur: Optional[SearchNode] = node
    while cur is not None:
        configs.append(cur.config)
        cur = cur.parent
    configs.reverse()
    return Solution.from_configs(configs)


class _Scratch:
    """Reused per-solve buffers for the hot expansion loop."""

    def __init__(self, n: int, num_cells: int):
        self.prefs = np.full((n, 5), -1, dtype=np.int32)
        self.plen = np.zeros(n, dtype=np.int32)
        self.pinned = np.empty(n, dtype=np.int32)
        self.occ_now = np.full(num_cells, -1, dtype=np.int32)
        self.occ_next = np.full(num_cells, -1, dtype=np.int32)
        self.next_loc = np.empty(n, dtype=np.int32)
        self.st_agent = np.empty(n, dtype=np.int32)
        self.st_k = np.empty(n, dtype=np.int32)
        self.ids = np.arange(n, dtype=np.int32)


def configuration_generator(
    node: SearchNode,
    constraint: Constraint,
    instance: Instance,
    scratch: _Scratch,
    seed: int,
    provider: Optional[NodeProvider] = None,
) -> Optional[Configuration]:
    """Generate one successor configuration via PIBT, or None on failure.

    Per-agent preference source: `provider` when present and the agent is not
    in the node's unguided set; the default cost-to-go preference otherwise.
    """
    gmap = instance.map
    s = scratch
    s.pinned.fill(-1)
    for agent, vertex in constraint.assignments:
        s.pinned[agent] = vertex

    kernels.build_default_prefs(
        node.cfg_arr, instance.dist_table(), gmap.neigh, gmap.deg,
        seed, node.id, s.prefs, s.plen,
    )
    if provider is not None:
        ctx = NodeContext(node_id=node.id, seed=seed, instance=instance)
        for i in range(instance.n):
            if i in node.unguided or s.pinned[i] >= 0:
                continue
            cand = provider(i, node.config, ctx)
            feasible = {node.config[i], *gmap.neighbors(node.config[i])}
            m = 0
            taken = set()
            for v in cand:
                v = int(v)
                if v in feasible and v not in taken:
                    s.prefs[i, m] = v
                    taken.add(v)
                    m += 1
            s.plen[i] = m

    s.occ_now.fill(-1)
    s.occ_now[node.cfg_arr] = s.ids
    s.occ_next.fill(-1)
    s.next_loc.fill(-1)
    status = kernels.pibt_resolve(
        node.cfg_arr, s.prefs, s.plen, node.order, s.pinned,
        s.occ_now, s.occ_next, s.next_loc, s.st_agent, s.st_k,
    )
    if status != kernels.PIBT_OK:
        return None
    return tuple(int(v) for v in s.next_loc)


def _active_provider(instance: Instance, options: SolverOptions):
    if options.no_policy:
        return None
    if options.provider is not None:
        return options.provider
    if options.policy is not None:
        from .policy import PolicyProvider

        return PolicyProvider(options.policy, instance)
    return None


def solve(instance: Instance, options: Optional[SolverOptions] = None) -> SolveResult:
    """Run the configuration search; optionally refine anytime via LNS."""
    options = options or SolverOptions()
    t_start = time.perf_counter()
    goals = instance.goals
    gmap = instance.map
    n = instance.n

    if not instance.is_well_posed():
        return SolveResult(
            status=NO_SOLUTION, final_time=time.perf_counter() - t_start
        )

    provider = _active_provider(instance, options)
    dd_active = (
        provider is not None
        and not options.no_deadlock_detection
        and options.deadlock_depth > 0
    )

    scratch = _Scratch(n, gmap.num_cells)
    node_counter = 0
    root = SearchNode(
        config=tuple(instance.starts),
        parent=None,
        unguided=set(),
        priorities=PriorityState.initial(n),
        node_id=node_counter,
    )
    node_counter += 1
    open_stack: List[SearchNode] = [root]
    explored = {root.config: root}
    goal_config = tuple(goals)

    result = SolveResult(status=TIMEOUT)
    expansions = 0
    iterations = 0
    best_node = root
    best_at_goal = sum(1 for i in range(n) if root.config[i] == goals[i])
    deadline = t_start + options.time_limit

    while open_stack:
        iterations += 1
        if iterations % _TIME_CHECK_EVERY == 0 and time.perf_counter() > deadline:
            result.status = TIMEOUT
            result.partial_paths = backtrack(best_node).paths
            break
        node = open_stack[-1]
        if node.config == goal_config:
            solution = backtrack(node)
            now = time.perf_counter()
            from .metrics import sum_of_costs

            soc = sum_of_costs(instance, solution)
            result.status = SOLVED
            result.solution = solution
            result.soc = soc
            result.init_soc = soc
            result.init_time = now - t_start
            if options.anytime:
                remaining = deadline - now
                if remaining > 0:
                    from .lns import refine

                    refined = refine(
                        instance, solution, deadline=remaining,
                        seed=options.seed, k=options.lns_k,
                    )
                    result.solution = refined
                    result.soc = sum_of_costs(instance, refined)
            break
        if not node.tree:
            open_stack.pop()
            continue
        constraint = node.tree.popleft()
        update_constraints(node, constraint, gmap)
        q_new = configuration_generator(
            node, constraint, instance, scratch, options.seed, provider
        )
        expansions += 1
        if q_new is None:
            continue
        if q_new in explored:
            continue
        child = SearchNode(
            config=q_new,
            parent=node,
            unguided=set(node.unguided) if options.inherit_unguided else set(),
            priorities=update_priorities(node.priorities, q_new, goals),
            node_id=node_counter,
        )
        node_counter += 1
        open_stack.append(child)
        explored[q_new] = child
        at_goal = sum(1 for i in range(n) if q_new[i] == goals[i])
        if at_goal > best_at_goal:
            best_at_goal = at_goal
            best_node = child
        if dd_active:
            events = deadlock_detection(
                node, q_new, open_stack, options.deadlock_depth, goals, gmap
            )
            for anc, agents in events:
                result.deadlock_events.append(
                    DeadlockEvent(
                        expansion=expansions,
                        ancestor_id=anc.id,
                        agents=tuple(sorted(agents)),
                    )
                )
    else:
        result.status = NO_SOLUTION

    result.expansions = expansions
    result.node_count = node_counter
    result.final_time = time.perf_counter() - t_start
    return result
