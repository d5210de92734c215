"""Deadlock detection: spot agents whose position and vicinity repeat across
recent ancestor configurations, strip their neural guidance, and resurrect the
affected ancestors for re-exploration.
"""

from typing import Dict, List, Optional, Sequence, Set, Tuple

from .grid import GridMap

Configuration = Tuple[int, ...]

# occupant NONE is encoded as -1 so equality comparison stays well-defined
Surrounding = Tuple[Tuple[int, int], ...]


def _occupancy(config: Configuration) -> Dict[int, int]:
    return {v: i for i, v in enumerate(config)}


def surrounding(
    gmap: GridMap,
    config: Configuration,
    agent: int,
    occ: Optional[Dict[int, int]] = None,
) -> Surrounding:
    """(vertex, occupant-or--1) for each neighbor of the agent's cell."""
    if occ is None:
        occ = _occupancy(config)
    v = config[agent]
    return tuple(
        (int(u), occ.get(int(u), -1)) for u in gmap.neigh[v, : gmap.deg[v]]
    )


def deadlock_detection(
    node,
    q_new: Configuration,
    open_stack: list,
    d: int,
    goals: Sequence[int],
    gmap: GridMap,
) -> List[Tuple[object, Set[int]]]:
    """Walk up to d ancestors of `node`; mark repeating off-goal agents
    unguided, reset the ancestor's constraint tree, and reinsert it.

    Returns [(ancestor, newly marked agents), ...] for tracing. d=0 is a no-op.
    """
    from collections import deque

    from .pibt import C_INIT

    events: List[Tuple[object, Set[int]]] = []
    occ_new = _occupancy(q_new)
    anc = node.parent
    for _ in range(d):
        if anc is None:
            break
        q_anc = anc.config
        occ_anc = _occupancy(q_anc)
        newly: Set[int] = set()
        for i in range(len(q_new)):
            if q_new[i] == goals[i] or q_new[i] != q_anc[i]:
                continue
            if i in anc.unguided:
                continue
            if surrounding(gmap, q_new, i, occ_new) == surrounding(
                gmap, q_anc, i, occ_anc
            ):
                newly.add(i)
        if newly:
            anc.unguided |= newly
            anc.tree = deque([C_INIT])
            open_stack.append(anc)
            events.append((anc, newly))
        anc = anc.parent
    return events
