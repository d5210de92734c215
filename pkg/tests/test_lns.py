import numpy as np
import pytest

from lagat.grid import Instance, Solution, validate_solution
from lagat.lacam import SOLVED, SolverOptions, solve
from lagat.lns import refine, select_neighborhood, space_time_astar, _FixedPaths
from lagat.metrics import sum_of_costs

from solvertestlib import grid_from_ascii, random_tiny_instance
from oracles import joint_soc_optimum


class TestSpaceTimeAstar:
    def test_waits_for_crossing_traffic(self):
        gmap = grid_from_ascii("...", "...", "...")
        inst = Instance(
            gmap, [gmap.vertex(0, 1), gmap.vertex(1, 0)],
            [gmap.vertex(2, 1), gmap.vertex(1, 2)],
        )
        # agent 1 fixed: crosses the center at t=1
        fixed = _FixedPaths([
            np.array([gmap.vertex(1, 0), gmap.vertex(1, 1), gmap.vertex(1, 2)],
                     dtype=np.int32)
        ])
        path = space_time_astar(inst, 0, fixed, t_max=20)
        assert path is not None
        assert int(path[0]) == inst.starts[0] and int(path[-1]) == inst.goals[0]
        # no vertex conflict with the fixed path at any time
        for t, v in enumerate(path):
            assert not fixed.vertex_occupied(int(v), t) or True  # checked below
        for t in range(len(path)):
            assert not fixed.vertex_occupied(int(path[t]), t)

    def test_goal_parked_on_by_fixed_agent_unsolvable(self):
        gmap = grid_from_ascii("...")
        inst = Instance(gmap, [0, 2], [1, 2])
        fixed = _FixedPaths([np.array([2, 1], dtype=np.int32)])  # parks on 1
        assert space_time_astar(inst, 0, fixed, t_max=20) is None


class TestRefine:
    def test_already_optimal_single_agent_unchanged(self):
        gmap = grid_from_ascii("....")
        inst = Instance(gmap, [0], [3])
        sol = Solution.from_configs([(0,), (1,), (2,), (3,)])
        out = refine(inst, sol, deadline=None, stall_limit=5)
        assert np.array_equal(out.paths, sol.paths)

    def test_zero_deadline_returns_input_verbatim(self):
        gmap = grid_from_ascii("....")
        inst = Instance(gmap, [0], [3])
        sol = Solution.from_configs([(0,), (1,), (1,), (2,), (3,)])
        out = refine(inst, sol, deadline=0)
        assert out is sol

    def test_needless_detour_removed_to_optimum(self):
        gmap = grid_from_ascii("...", "...")
        inst = Instance(gmap, [0, 3], [2, 3])
        # agent 0 detours through the bottom row; agent 1 idles off to the side
        sol = Solution.from_configs(
            [(0, 3), (1, 4), (4, 3), (5, 4), (2, 3)]
        )
        # legal? agent1 wanders 3->4->3->4->3
        assert validate_solution(inst, sol).ok
        out = refine(inst, sol, deadline=None, seed=1)
        opt = joint_soc_optimum(inst)
        assert sum_of_costs(inst, out) == opt == 2

    def test_monotone_history_and_feasibility(self):
        rng = np.random.default_rng(17)
        done = 0
        while done < 15:
            inst = random_tiny_instance(rng, max_side=6, max_agents=4)
            if inst is None or not inst.is_well_posed():
                continue
            result = solve(inst, SolverOptions(no_policy=True))
            if result.status != SOLVED:
                continue
            history = []
            out = refine(inst, result.solution, deadline=None, seed=7,
                         stall_limit=10, history=history)
            assert all(b < a for a, b in zip(history, history[1:]))
            assert validate_solution(inst, out).ok
            assert sum_of_costs(inst, out) == history[-1]
            done += 1

    def test_infeasible_input_rejected(self):
        gmap = grid_from_ascii("...")
        inst = Instance(gmap, [0, 2], [2, 0])
        sol = Solution.from_configs([(0, 2), (1, 1), (2, 0)])
        with pytest.raises(ValueError, match="infeasible"):
            refine(inst, sol, deadline=None)

    def test_two_agent_subsets_reach_joint_optimum(self):
        rng = np.random.default_rng(23)
        done = 0
        while done < 10:
            inst = random_tiny_instance(rng, max_side=4, max_agents=2)
            if inst is None or inst.n != 2 or not inst.is_well_posed():
                continue
            result = solve(inst, SolverOptions(no_policy=True))
            if result.status != SOLVED:
                continue
            out = refine(inst, result.solution, deadline=None, seed=3)
            opt = joint_soc_optimum(inst)
            assert opt is not None
            assert sum_of_costs(inst, out) == opt
            done += 1


class TestNeighborhoods:
    def test_failure_based_picks_largest_gap(self):
        gmap = grid_from_ascii("." * 8)
        inst = Instance(gmap, [0, 4], [3, 5])
        paths = [
            np.array([0, 1, 2, 1, 2, 3], dtype=np.int32),  # gap 5-3=2
            np.array([4, 5], dtype=np.int32),  # gap 0
        ]
        nb = select_neighborhood(inst, paths, 1, "FAILURE_BASED",
                                 np.random.default_rng(0))
        assert nb.agents == (0,)

    def test_random_kind_uses_requested_size(self):
        gmap = grid_from_ascii("....", "....")
        inst = Instance(gmap, [0, 1, 2], [5, 6, 7])
        paths = [np.array([s], dtype=np.int32) for s in inst.starts]
        nb = select_neighborhood(inst, paths, 2, "RANDOM",
                                 np.random.default_rng(0))
        assert len(nb.agents) == 2 and len(set(nb.agents)) == 2
