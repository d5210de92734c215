import numpy as np

from magat_trainer.dataset import build_dataset, samples_from_trajectory
from magat_trainer.formats import Trajectory
from magat_trainer.observe import ACTIONS, action_label

from trainertestlib import grid_from_ascii


def make_traj(grid, starts, goals, configs, name="t"):
    return Trajectory(
        name=name, grid=grid, starts=tuple(starts), goals=tuple(goals),
        paths=np.asarray(configs, dtype=np.int32).T,
    )


def test_sample_count_is_agents_times_steps(tiny_cfg):
    grid = grid_from_ascii("....")
    traj = make_traj(grid, [0, 3], [2, 3], [(0, 3), (1, 3), (2, 3)])
    samples = samples_from_trajectory(traj, tiny_cfg)
    assert len(samples) == 2  # T timesteps
    assert sum(len(s.labels) for s in samples) == 2 * 2  # n x T labels


def test_labels_match_moves(tiny_cfg):
    grid = grid_from_ascii("...", "...")
    # agent 0 moves right then down; agent 1 stays at its goal throughout
    traj = make_traj(grid, [0, 5], [4, 5], [(0, 5), (1, 5), (4, 5)])
    samples = samples_from_trajectory(traj, tiny_cfg)
    right = ACTIONS.index((1, 0))
    down = ACTIONS.index((0, 1))
    stay = ACTIONS.index((0, 0))
    assert samples[0].labels.tolist() == [right, stay]
    assert samples[1].labels.tolist() == [down, stay]


def test_action_label_round_trip():
    grid = grid_from_ascii("...", "...")
    v = grid.vertex(1, 0)
    for a, (dx, dy) in enumerate(ACTIONS):
        u = grid.vertex(1 + dx, 0 + dy)
        assert action_label(grid, v, u) == a


def test_observation_shapes_and_graph(tiny_cfg):
    grid = grid_from_ascii("....", "....")
    traj = make_traj(grid, [0, 1], [3, 2], [(0, 1), (1, 2), (2, 3), (3, 2)])
    samples = build_dataset([traj], tiny_cfg)
    side = 2 * tiny_cfg.r_obs + 1
    for s in samples:
        assert s.observations.shape == (2, 4, side, side)
        assert s.graph.n == 2
        # adjacent agents within r_comm: each has the other as in-neighbor
        assert s.graph.in_neighbors[0].tolist() == [1]
        assert s.graph.in_neighbors[1].tolist() == [0]
