"""Labeled samples from expert trajectories.

One sample = one timestep of one instance: observation tensors for every
agent, the communication graph of that configuration, and the expert action
label per agent. Stay-at-goal steps carry the stay label.
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .formats import Trajectory
from .model import ModelConfig
from .observe import action_label, build_comm_graph, build_observation, CommGraph


@dataclass
class Sample:
    instance: str
    t: int
    observations: np.ndarray  # (n, 4, 2R+1, 2R+1) float32
    graph: CommGraph
    labels: np.ndarray  # (n,) int64
    # flat edge list (j -> i) derived from the graph, for batched training
    edge_src: np.ndarray = None  # (E,) int64
    edge_dst: np.ndarray = None  # (E,) int64
    edge_feat: np.ndarray = None  # (E, 3) float32

    def __post_init__(self):
        if self.edge_src is None:
            src, dst, feat = [], [], []
            for i in range(self.graph.n):
                for k, j in enumerate(self.graph.in_neighbors[i]):
                    src.append(int(j))
                    dst.append(i)
                    feat.append(self.graph.in_features[i][k])
            self.edge_src = np.asarray(src, dtype=np.int64)
            self.edge_dst = np.asarray(dst, dtype=np.int64)
            self.edge_feat = (
                np.asarray(feat, dtype=np.float32).reshape(len(src), 3)
            )


def samples_from_trajectory(traj: Trajectory, cfg: ModelConfig) -> List[Sample]:
    grid = traj.grid
    n, length = traj.paths.shape
    dists = [grid.distance_field(g) for g in traj.goals]
    out = []
    for t in range(length - 1):
        config = [int(v) for v in traj.paths[:, t]]
        nxt = [int(v) for v in traj.paths[:, t + 1]]
        obs = np.stack([
            build_observation(grid, config, i, dists[i], traj.goals[i],
                              cfg.r_obs)
            for i in range(n)
        ]).astype(np.float32)
        labels = np.array(
            [action_label(grid, config[i], nxt[i]) for i in range(n)],
            dtype=np.int64,
        )
        graph = build_comm_graph(config, grid, cfg.r_comm, cfg.comm_metric)
        out.append(Sample(traj.name, t, obs, graph, labels))
    return out


def build_dataset(trajectories: Sequence[Trajectory],
                  cfg: ModelConfig) -> List[Sample]:
    out = []
    for traj in trajectories:
        out.extend(samples_from_trajectory(traj, cfg))
    return out
