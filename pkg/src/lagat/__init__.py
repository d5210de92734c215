"""Hybrid multi-agent pathfinding: lazy-constraint configuration search with
PIBT collision shielding, an optional learned graph-attention preference
heuristic with deadlock override, and anytime LNS refinement."""

from .backend import NUMBA_ENABLED, backend_name
from .grid import (
    DistField,
    GridMap,
    Instance,
    InstanceError,
    MapParseError,
    ScenarioError,
    Solution,
    ValidationReport,
    distance_field,
    dump_map,
    dump_scenario,
    format_solution,
    generate_instance,
    load_map,
    load_scenario,
    maze_map,
    parse_solution,
    random_map,
    validate_solution,
    warehouse_map,
)
from .lacam import (
    NO_SOLUTION,
    SOLVED,
    TIMEOUT,
    SearchNode,
    SolveResult,
    SolverOptions,
    backtrack,
    configuration_generator,
    solve,
    update_constraints,
)
from .lns import refine
from .metrics import RunRecord, compute_metrics, soc_lower_bound, sum_of_costs
from .pibt import (
    C_INIT,
    PIBT_CONSTRAINT_INFEASIBLE,
    PIBT_FAIL,
    PIBT_OK,
    Constraint,
    Preference,
    PriorityState,
    default_preference,
    pibt_step,
    update_priorities,
)
from .policy import (
    PolicyProvider,
    PolicyWeights,
    build_comm_graph,
    build_observation,
    gnn_forward,
    load_weights,
    policy_preference,
    random_weights,
    save_weights,
)

__version__ = "0.1.0"
