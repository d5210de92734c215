"""Maps, instances, distance fields, configurations, and solution validation.

Vertices are row-major cell indices (v = y * width + x); only passable cells
are graph vertices. The unreachable sentinel is width * height, strictly
larger than any path length, so ascending sorts stay well-defined.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels


class MapParseError(ValueError):
    pass


class ScenarioError(ValueError):
    pass


class InstanceError(ValueError):
    pass


class GridMap:
    """Static 4-connected grid. Immutable after construction."""

    def __init__(self, width: int, height: int, passable: Sequence[bool]):
        if width < 1 or height < 1:
            raise ValueError("width and height must be >= 1")
        passable = np.asarray(passable, dtype=bool).ravel()
        if passable.size != width * height:
            raise ValueError("passable must have width*height entries")
        self.width = width
        self.height = height
        self.passable = passable
        self.passable.setflags(write=False)
        self.unreachable = width * height
        self._build_neighbor_table()

    def _build_neighbor_table(self):
        w, h = self.width, self.height
        num = w * h
        neigh = np.full((num, 4), -1, dtype=np.int32)
        deg = np.zeros(num, dtype=np.uint8)
        for v in range(num):
            if not self.passable[v]:
                continue
            y, x = divmod(v, w)
            d = 0
            for dx, dy in ((0, -1), (0, 1), (-1, 0), (1, 0)):
                nx, ny = x + dx, y + dy
                if 0 <= nx < w and 0 <= ny < h and self.passable[ny * w + nx]:
                    neigh[v, d] = ny * w + nx
                    d += 1
            deg[v] = d
        neigh.setflags(write=False)
        deg.setflags(write=False)
        self.neigh = neigh
        self.deg = deg

    @property
    def num_cells(self) -> int:
        return self.width * self.height

    def vertex(self, x: int, y: int) -> int:
        return y * self.width + x

    def xy(self, v: int) -> Tuple[int, int]:
        y, x = divmod(v, self.width)
        return x, y

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_passable(self, v: int) -> bool:
        return 0 <= v < self.num_cells and bool(self.passable[v])

    def neighbors(self, v: int) -> List[int]:
        return [int(u) for u in self.neigh[v, : self.deg[v]]]

    def passable_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.passable)

    def components(self) -> List[np.ndarray]:
        """Connected components of the passable subgraph, largest first."""
        seen = np.zeros(self.num_cells, dtype=bool)
        comps = []
        for v in self.passable_vertices():
            if seen[v]:
                continue
            stack = [int(v)]
            seen[v] = True
            comp = []
            while stack:
                u = stack.pop()
                comp.append(u)
                for nb in self.neigh[u, : self.deg[u]]:
                    if not seen[nb]:
                        seen[nb] = True
                        stack.append(int(nb))
            comps.append(np.array(sorted(comp), dtype=np.int64))
        comps.sort(key=len, reverse=True)
        return comps


@dataclass(frozen=True)
class DistField:
    """Exact BFS distances to one goal; map.unreachable where disconnected."""

    goal: int
    dist: np.ndarray  # (num_cells,) int32, read-only

    def __getitem__(self, v: int) -> int:
        return int(self.dist[v])


def distance_field(gmap: GridMap, goal: int) -> DistField:
    if not (0 <= goal < gmap.num_cells):
        raise ValueError(f"goal vertex {goal} out of bounds")
    if not gmap.passable[goal]:
        raise ValueError(f"goal vertex {goal} is blocked")
    dist = np.full(gmap.num_cells, gmap.unreachable, dtype=np.int32)
    queue = np.empty(gmap.num_cells, dtype=np.int32)
    kernels.bfs_fill(gmap.neigh, gmap.deg, goal, gmap.unreachable, dist, queue)
    dist.setflags(write=False)
    return DistField(goal=goal, dist=dist)


class Instance:
    """A MAPF instance: map plus per-agent start/goal vertices.

    Distance fields are computed lazily per goal and cached.
    """

    def __init__(self, gmap: GridMap, starts: Sequence[int], goals: Sequence[int]):
        starts = [int(s) for s in starts]
        goals = [int(g) for g in goals]
        if len(starts) != len(goals):
            raise InstanceError("starts and goals must have the same length")
        if len(starts) == 0:
            raise InstanceError("instance needs at least one agent")
        if len(set(starts)) != len(starts):
            raise InstanceError("starts must be pairwise distinct")
        if len(set(goals)) != len(goals):
            raise InstanceError("goals must be pairwise distinct")
        for v in starts + goals:
            if not gmap.is_passable(v):
                raise InstanceError(f"vertex {v} is blocked or out of range")
        self.map = gmap
        self.starts = tuple(starts)
        self.goals = tuple(goals)
        self.n = len(starts)
        self._fields: Dict[int, DistField] = {}
        self._dist_table: Optional[np.ndarray] = None

    def dist_field(self, agent: int) -> DistField:
        goal = self.goals[agent]
        f = self._fields.get(goal)
        if f is None:
            f = distance_field(self.map, goal)
            self._fields[goal] = f
        return f

    def dist_table(self) -> np.ndarray:
        """Stacked (n, num_cells) distance-to-goal table."""
        if self._dist_table is None:
            self._dist_table = np.stack(
                [self.dist_field(i).dist for i in range(self.n)]
            )
        return self._dist_table

    def is_well_posed(self) -> bool:
        """Every goal reachable from its start."""
        u = self.map.unreachable
        return all(
            self.dist_field(i)[self.starts[i]] < u for i in range(self.n)
        )


@dataclass(frozen=True)
class Solution:
    """Per-agent paths, all of equal length T+1 (one configuration per step)."""

    paths: np.ndarray  # (n, T+1) int32

    @property
    def n(self) -> int:
        return self.paths.shape[0]

    @property
    def makespan(self) -> int:
        return self.paths.shape[1] - 1

    def config_at(self, t: int) -> Tuple[int, ...]:
        return tuple(int(v) for v in self.paths[:, t])

    @staticmethod
    def from_configs(configs: Sequence[Sequence[int]]) -> "Solution":
        arr = np.asarray(configs, dtype=np.int32).T.copy()
        return Solution(paths=arr)


@dataclass(frozen=True)
class Violation:
    kind: str  # length_mismatch | bad_start | bad_goal | bad_vertex |
    #            non_adjacent | vertex_collision | edge_swap
    t: int
    agents: Tuple[int, ...]
    vertex: Optional[int] = None


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind, t, agents, vertex=None):
        self.violations.append(Violation(kind, t, tuple(agents), vertex))


def validate_solution(instance: Instance, solution: Solution) -> ValidationReport:
    """Mechanized feasibility check; every problem becomes a report entry."""
    rep = ValidationReport()
    paths = solution.paths
    gmap = instance.map
    if paths.ndim != 2 or paths.shape[0] != instance.n or paths.shape[1] < 1:
        rep.add("length_mismatch", 0, range(instance.n))
        return rep
    n, length = paths.shape
    T = length - 1
    for i in range(n):
        if paths[i, 0] != instance.starts[i]:
            rep.add("bad_start", 0, (i,), int(paths[i, 0]))
        if paths[i, T] != instance.goals[i]:
            rep.add("bad_goal", T, (i,), int(paths[i, T]))
        for t in range(length):
            v = int(paths[i, t])
            if not gmap.is_passable(v):
                rep.add("bad_vertex", t, (i,), v)
        for t in range(T):
            u, v = int(paths[i, t]), int(paths[i, t + 1])
            if u != v and (not gmap.is_passable(u) or v not in gmap.neighbors(u)):
                rep.add("non_adjacent", t + 1, (i,), v)
    for t in range(length):
        seen: Dict[int, int] = {}
        for i in range(n):
            v = int(paths[i, t])
            if v in seen:
                rep.add("vertex_collision", t, (seen[v], i), v)
            else:
                seen[v] = i
    for t in range(T):
        pos = {int(paths[i, t]): i for i in range(n)}
        for i in range(n):
            u, v = int(paths[i, t]), int(paths[i, t + 1])
            if u == v:
                continue
            j = pos.get(v)
            if j is not None and j != i and int(paths[j, t + 1]) == u:
                if i < j:  # report each swapped pair once
                    rep.add("edge_swap", t + 1, (i, j), v)
    return rep


# ---------------------------------------------------------------------------
# MovingAI file formats


def load_map(text: str) -> GridMap:
    """Parse a MovingAI grid map. `.`/`G` passable; `@`/`T`/`O` blocked."""
    lines = text.splitlines()
    if len(lines) < 4:
        raise MapParseError("line 1: expected 4 header lines")
    if not lines[0].strip().startswith("type"):
        raise MapParseError("line 1: expected 'type ...' header")
    try:
        h_key, h_val = lines[1].split()
        w_key, w_val = lines[2].split()
        if h_key != "height" or w_key != "width":
            raise ValueError
        height, width = int(h_val), int(w_val)
    except ValueError:
        raise MapParseError("line 2-3: expected 'height H' and 'width W'")
    if lines[3].strip() != "map":
        raise MapParseError("line 4: expected 'map'")
    rows = lines[4 : 4 + height]
    if len(rows) < height:
        raise MapParseError(f"line {4 + len(rows) + 1}: expected {height} map rows")
    passable = np.zeros(width * height, dtype=bool)
    for y, row in enumerate(rows):
        row = row.rstrip("\r\n")
        if len(row) != width:
            raise MapParseError(
                f"line {5 + y}: row length {len(row)} != width {width}"
            )
        for x, ch in enumerate(row):
            if ch in ".G":
                passable[y * width + x] = True
            elif ch in "@TO":
                pass
            else:
                raise MapParseError(f"line {5 + y}: unknown cell character {ch!r}")
    return GridMap(width, height, passable)


def dump_map(gmap: GridMap) -> str:
    rows = []
    for y in range(gmap.height):
        rows.append(
            "".join(
                "." if gmap.passable[y * gmap.width + x] else "@"
                for x in range(gmap.width)
            )
        )
    return "type octile\nheight {}\nwidth {}\nmap\n{}\n".format(
        gmap.height, gmap.width, "\n".join(rows)
    )


def load_scenario(text: str, gmap: GridMap, n: int) -> Instance:
    """Build an Instance from the first n entries of a MovingAI scen file."""
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("version"):
            continue
        parts = line.split()
        if len(parts) < 8:
            raise ScenarioError(f"line {lineno}: expected >= 8 fields")
        try:
            sx, sy, gx, gy = (int(p) for p in parts[4:8])
        except ValueError:
            raise ScenarioError(f"line {lineno}: non-integer coordinates")
        entries.append((sx, sy, gx, gy))
    if n > len(entries):
        raise ScenarioError(
            f"insufficient entries: requested {n}, file has {len(entries)}"
        )
    starts, goals = [], []
    for idx, (sx, sy, gx, gy) in enumerate(entries[:n]):
        for label, (x, y) in (("start", (sx, sy)), ("goal", (gx, gy))):
            if not gmap.in_bounds(x, y):
                raise ScenarioError(f"entry {idx}: {label} ({x},{y}) out of range")
            if not gmap.passable[gmap.vertex(x, y)]:
                raise ScenarioError(f"entry {idx}: {label} ({x},{y}) is blocked")
        starts.append(gmap.vertex(sx, sy))
        goals.append(gmap.vertex(gx, gy))
    return Instance(gmap, starts, goals)


def dump_scenario(instance: Instance, map_name: str = "map") -> str:
    gmap = instance.map
    lines = ["version 1"]
    for i in range(instance.n):
        sx, sy = gmap.xy(instance.starts[i])
        gx, gy = gmap.xy(instance.goals[i])
        lines.append(
            f"0\t{map_name}\t{gmap.width}\t{gmap.height}\t{sx}\t{sy}\t{gx}\t{gy}\t0"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solver output interchange format


def format_solution(instance: Instance, solution: Solution) -> str:
    gmap = instance.map

    def fmt(vs):
        return ",".join("({},{})".format(*gmap.xy(int(v))) for v in vs)

    lines = [
        "starts=" + fmt(instance.starts),
        "goals=" + fmt(instance.goals),
    ]
    for t in range(solution.paths.shape[1]):
        lines.append(f"{t}:" + fmt(solution.paths[:, t]))
    return "\n".join(lines) + "\n"


def parse_solution(text: str, gmap: GridMap):
    """Parse the interchange format; returns (starts, goals, Solution)."""

    def parse_points(s: str) -> List[int]:
        pts = []
        s = s.strip()
        if not s:
            return pts
        for token in s.split("),"):
            token = token.strip().strip("()")
            x_s, y_s = token.split(",")
            pts.append(gmap.vertex(int(x_s), int(y_s)))
        return pts

    starts = goals = None
    configs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("starts="):
            starts = parse_points(line[len("starts="):])
        elif line.startswith("goals="):
            goals = parse_points(line[len("goals="):])
        elif ":" in line:
            _, rhs = line.split(":", 1)
            configs.append(parse_points(rhs))
        else:
            raise ValueError(f"line {lineno}: unrecognized line {line!r}")
    if starts is None or goals is None or not configs:
        raise ValueError("missing starts=, goals=, or timestep lines")
    return starts, goals, Solution.from_configs(configs)


# ---------------------------------------------------------------------------
# Instance generation


def random_map(width: int, height: int, seed: int, obstacle_p: float = 0.2) -> GridMap:
    """I.i.d. obstacles, then largest-component extraction."""
    rng = np.random.default_rng(seed)
    passable = rng.random(width * height) >= obstacle_p
    if not passable.any():
        return GridMap(width, height, passable)
    gmap = GridMap(width, height, passable)
    comps = gmap.components()
    if not comps:
        return gmap
    keep = np.zeros(width * height, dtype=bool)
    keep[comps[0]] = True
    return GridMap(width, height, keep)


def maze_map(width: int, height: int, seed: int, punch_p: float = 0.1) -> GridMap:
    """Recursive-division maze, corridor width 1, with random wall punches."""
    rng = np.random.default_rng(seed)
    grid = np.ones((height, width), dtype=bool)

    def divide(x0, y0, x1, y1):
        if x1 - x0 < 2 or y1 - y0 < 2:
            return
        horizontal = (y1 - y0) > (x1 - x0) or (
            (y1 - y0) == (x1 - x0) and rng.random() < 0.5
        )
        if horizontal:
            walls = [y for y in range(y0 + 1, y1) if y % 2 == 0]
            if not walls:
                return
            wy = int(rng.choice(walls))
            gaps = [x for x in range(x0, x1 + 1) if x % 2 == 1] or list(
                range(x0, x1 + 1)
            )
            gx = int(rng.choice(gaps))
            for x in range(x0, x1 + 1):
                if x != gx:
                    grid[wy, x] = False
            divide(x0, y0, x1, wy - 1)
            divide(x0, wy + 1, x1, y1)
        else:
            walls = [x for x in range(x0 + 1, x1) if x % 2 == 0]
            if not walls:
                return
            wx = int(rng.choice(walls))
            gaps = [y for y in range(y0, y1 + 1) if y % 2 == 1] or list(
                range(y0, y1 + 1)
            )
            gy = int(rng.choice(gaps))
            for y in range(y0, y1 + 1):
                if y != gy:
                    grid[y, wx] = False
            divide(x0, y0, wx - 1, y1)
            divide(wx + 1, y0, x1, y1)

    divide(0, 0, width - 1, height - 1)
    # punch loops through walls so the maze is not a tree
    wall_cells = np.flatnonzero(~grid.ravel())
    for v in wall_cells:
        if rng.random() < punch_p:
            grid.ravel()[v] = True
    gmap = GridMap(width, height, grid.ravel())
    comps = gmap.components()
    keep = np.zeros(width * height, dtype=bool)
    keep[comps[0]] = True
    return GridMap(width, height, keep)


def warehouse_map(width: int, height: int, seed: int) -> GridMap:
    """Shelf blocks separated by single-cell aisles."""
    rng = np.random.default_rng(seed)
    grid = np.ones((height, width), dtype=bool)
    shelf_len = 4
    for y in range(2, height - 1, 2):
        x = 1 + int(rng.integers(0, 2))
        while x + shelf_len <= width - 1:
            grid[y, x : x + shelf_len] = False
            x += shelf_len + 1
    gmap = GridMap(width, height, grid.ravel())
    comps = gmap.components()
    keep = np.zeros(width * height, dtype=bool)
    keep[comps[0]] = True
    return GridMap(width, height, keep)


MAP_GENERATORS = {
    "random": random_map,
    "maze": maze_map,
    "warehouse": warehouse_map,
}


def generate_instance(gmap: GridMap, n: int, seed: int) -> Instance:
    """Deterministic instance draw: distinct starts/goals in one component."""
    comps = gmap.components()
    if not comps or len(comps[0]) < n:
        largest = len(comps[0]) if comps else 0
        raise InstanceError(
            f"largest connected component has {largest} cells, need {n}"
        )
    comp = comps[0]
    rng = np.random.default_rng(seed)
    starts = rng.choice(comp, size=n, replace=False)
    goals = rng.choice(comp, size=n, replace=False)
    return Instance(gmap, starts.tolist(), goals.tolist())
