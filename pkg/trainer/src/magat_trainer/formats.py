"""Interchange-format parsers and a minimal grid model.

The trainer talks to the solver exclusively through files: MovingAI-style
maps and scenarios, the solver's solution text format, and the binary weight
format. These parsers are deliberately independent of the solver package.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np


class Grid:
    """4-connected grid; vertices are row-major cell indices."""

    def __init__(self, width: int, height: int, passable: np.ndarray):
        self.width = width
        self.height = height
        self.passable = np.asarray(passable, dtype=bool).ravel()
        self.unreachable = width * height

    def vertex(self, x: int, y: int) -> int:
        return y * self.width + x

    def xy(self, v: int) -> Tuple[int, int]:
        y, x = divmod(v, self.width)
        return x, y

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def neighbors(self, v: int) -> List[int]:
        x, y = self.xy(v)
        out = []
        for dx, dy in ((0, -1), (0, 1), (-1, 0), (1, 0)):
            nx, ny = x + dx, y + dy
            if self.in_bounds(nx, ny) and self.passable[self.vertex(nx, ny)]:
                out.append(self.vertex(nx, ny))
        return out

    def largest_component(self) -> np.ndarray:
        """Vertices of the largest connected passable region."""
        seen = np.zeros(self.width * self.height, dtype=bool)
        best: List[int] = []
        for v in np.flatnonzero(self.passable):
            if seen[v]:
                continue
            comp = [int(v)]
            seen[v] = True
            stack = [int(v)]
            while stack:
                u = stack.pop()
                for w in self.neighbors(u):
                    if not seen[w]:
                        seen[w] = True
                        comp.append(w)
                        stack.append(w)
            if len(comp) > len(best):
                best = comp
        return np.array(sorted(best), dtype=np.int64)

    def distance_field(self, goal: int) -> np.ndarray:
        """BFS distances to goal; unreachable sentinel elsewhere."""
        dist = np.full(self.width * self.height, self.unreachable,
                       dtype=np.int32)
        dist[goal] = 0
        frontier = [goal]
        while frontier:
            nxt = []
            for v in frontier:
                for u in self.neighbors(v):
                    if dist[u] > dist[v] + 1:
                        dist[u] = dist[v] + 1
                        nxt.append(u)
            frontier = nxt
        return dist


def parse_map(text: str) -> Grid:
    lines = text.splitlines()
    if len(lines) < 4 or not lines[0].startswith("type"):
        raise ValueError("not a grid map file")
    height = int(lines[1].split()[1])
    width = int(lines[2].split()[1])
    passable = np.zeros(width * height, dtype=bool)
    for y, row in enumerate(lines[4 : 4 + height]):
        for x, ch in enumerate(row.rstrip("\r\n")):
            passable[y * width + x] = ch in ".G"
    return Grid(width, height, passable)


def parse_scenario(text: str) -> List[Tuple[int, int, int, int]]:
    """(sx, sy, gx, gy) per agent entry."""
    entries = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("version"):
            continue
        parts = line.split()
        entries.append(tuple(int(p) for p in parts[4:8]))
    return entries


def dump_scenario(grid: Grid, starts: Sequence[int], goals: Sequence[int],
                  map_name: str = "map") -> str:
    lines = ["version 1"]
    for s, g in zip(starts, goals):
        sx, sy = grid.xy(s)
        gx, gy = grid.xy(g)
        lines.append(
            f"0\t{map_name}\t{grid.width}\t{grid.height}\t{sx}\t{sy}\t{gx}\t{gy}\t0"
        )
    return "\n".join(lines) + "\n"


def parse_solution(text: str, grid: Grid):
    """Returns (starts, goals, paths) with paths shaped (n, T+1)."""

    def points(s: str) -> List[int]:
        out = []
        s = s.strip()
        if not s:
            return out
        for token in s.split("),"):
            x_s, y_s = token.strip().strip("()").split(",")
            out.append(grid.vertex(int(x_s), int(y_s)))
        return out

    starts = goals = None
    configs = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("starts="):
            starts = points(line[len("starts="):])
        elif line.startswith("goals="):
            goals = points(line[len("goals="):])
        elif ":" in line:
            configs.append(points(line.split(":", 1)[1]))
    if starts is None or goals is None or not configs:
        raise ValueError("missing starts=, goals=, or timestep lines")
    return starts, goals, np.asarray(configs, dtype=np.int32).T


@dataclass(frozen=True)
class Trajectory:
    """One expert-solved instance: the raw material for labeled samples."""

    name: str
    grid: Grid
    starts: Tuple[int, ...]
    goals: Tuple[int, ...]
    paths: np.ndarray  # (n, T+1)
