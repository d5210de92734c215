"""Observation tensors and communication graphs for training samples.

Mirrors the inference-side conventions exactly: 4-channel local window
(obstacles with out-of-map padding, other agents, goal projection, normalized
cost-to-go), directed proximity graph with (dx, dy, manhattan) edge features,
in-neighbors sorted by grid vertex.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .formats import Grid

# fixed action order: stay, up, down, left, right
ACTIONS = ((0, 0), (0, -1), (0, 1), (-1, 0), (1, 0))


def action_label(grid: Grid, u: int, v: int) -> int:
    """Index of the action moving u -> v."""
    ux, uy = grid.xy(u)
    vx, vy = grid.xy(v)
    return ACTIONS.index((vx - ux, vy - uy))


def build_observation(
    grid: Grid,
    config: Sequence[int],
    agent: int,
    dist: np.ndarray,
    goal: int,
    r_obs: int,
) -> np.ndarray:
    side = 2 * r_obs + 1
    obs = np.zeros((4, side, side), dtype=np.float64)
    cx, cy = grid.xy(config[agent])
    center_dist = int(dist[config[agent]])
    others = {v for j, v in enumerate(config) if j != agent}
    for oy in range(side):
        for ox in range(side):
            x, y = cx + ox - r_obs, cy + oy - r_obs
            if not grid.in_bounds(x, y) or not grid.passable[grid.vertex(x, y)]:
                obs[0, oy, ox] = 1.0
                obs[3, oy, ox] = 1.0
                continue
            v = grid.vertex(x, y)
            if v in others:
                obs[1, oy, ox] = 1.0
            d = int(dist[v])
            if d >= grid.unreachable or center_dist >= grid.unreachable:
                obs[3, oy, ox] = 1.0
            else:
                obs[3, oy, ox] = (d - center_dist) / (2 * r_obs)
    gx, gy = grid.xy(goal)
    dgx, dgy = gx - cx, gy - cy
    if abs(dgx) <= r_obs and abs(dgy) <= r_obs:
        obs[2, dgy + r_obs, dgx + r_obs] = 1.0
    else:
        best = None
        best_cos = -2.0
        norm_g = math.hypot(dgx, dgy)
        for oy in range(side):
            for ox in range(side):
                if oy not in (0, side - 1) and ox not in (0, side - 1):
                    continue
                bx, by = ox - r_obs, oy - r_obs
                cos = (bx * dgx + by * dgy) / (math.hypot(bx, by) * norm_g)
                if cos > best_cos + 1e-12:
                    best_cos = cos
                    best = (oy, ox)
        obs[2, best[0], best[1]] = 1.0
    return obs


@dataclass
class CommGraph:
    n: int
    in_neighbors: List[np.ndarray]
    in_features: List[np.ndarray]


def build_comm_graph(
    config: Sequence[int],
    grid: Grid,
    r_comm: int,
    metric: str = "chebyshev",
) -> CommGraph:
    n = len(config)
    xy = [grid.xy(v) for v in config]
    in_neighbors = []
    in_features = []
    for i in range(n):
        xi, yi = xy[i]
        js = []
        for j in range(n):
            if j == i:
                continue
            dx, dy = xy[j][0] - xi, xy[j][1] - yi
            prox = max(abs(dx), abs(dy)) if metric == "chebyshev" else (
                abs(dx) + abs(dy)
            )
            if prox <= r_comm:
                js.append(j)
        js.sort(key=lambda j: config[j])
        feats = np.array(
            [
                (xy[j][0] - xi, xy[j][1] - yi,
                 abs(xy[j][0] - xi) + abs(xy[j][1] - yi))
                for j in js
            ],
            dtype=np.float64,
        ).reshape(len(js), 3)
        in_neighbors.append(np.array(js, dtype=np.int64))
        in_features.append(feats)
    return CommGraph(n=n, in_neighbors=in_neighbors, in_features=in_features)
