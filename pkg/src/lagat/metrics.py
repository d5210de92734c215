"""Solution metrics: stop-time sum-of-costs, its trivial lower bound, and
per-run records for the benchmark harness.
"""

from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .grid import Instance, Solution, validate_solution


def agent_cost(path: np.ndarray, goal: int) -> int:
    """Last timestep after which the agent rests at its goal forever."""
    off_goal = np.flatnonzero(path != goal)
    if off_goal.size == 0:
        return 0
    return int(off_goal[-1]) + 1


def sum_of_costs(instance: Instance, solution: Solution) -> int:
    return sum(
        agent_cost(solution.paths[i], instance.goals[i])
        for i in range(instance.n)
    )


def soc_lower_bound(instance: Instance) -> int:
    return sum(
        int(instance.dist_field(i)[instance.starts[i]])
        for i in range(instance.n)
    )


@dataclass
class RunRecord:
    instance_id: str
    solver: str
    status: str
    soc: Optional[int]
    soc_lb: Optional[float]  # SoC / LB, reported 1.0 when LB == 0
    makespan: Optional[int]
    init_time: Optional[float]
    init_soc: Optional[int]
    final_time: float
    seed: int
    agents: int = 0
    map_name: str = ""

    def as_dict(self):
        return asdict(self)

    CSV_FIELDS = (
        "instance_id", "map_name", "agents", "solver", "status", "soc",
        "soc_lb", "makespan", "init_time", "init_soc", "final_time", "seed",
    )


def compute_metrics(
    instance: Instance,
    solution: Solution,
    instance_id: str = "",
    solver: str = "",
    seed: int = 0,
    init_time: Optional[float] = None,
    init_soc: Optional[int] = None,
    final_time: float = 0.0,
) -> RunRecord:
    """Metrics for a feasible solution; infeasible input is rejected."""
    report = validate_solution(instance, solution)
    if not report.ok:
        raise ValueError(
            f"infeasible solution: {report.violations[:3]}"
        )
    soc = sum_of_costs(instance, solution)
    lb = soc_lower_bound(instance)
    soc_lb = soc / lb if lb > 0 else 1.0
    makespan = max(
        agent_cost(solution.paths[i], instance.goals[i])
        for i in range(instance.n)
    )
    return RunRecord(
        instance_id=instance_id,
        solver=solver,
        status="SOLVED",
        soc=soc,
        soc_lb=soc_lb,
        makespan=makespan,
        init_time=init_time,
        init_soc=init_soc,
        final_time=final_time,
        seed=seed,
        agents=instance.n,
    )
