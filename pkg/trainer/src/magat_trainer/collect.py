"""Expert trajectory collection.

The expert is the solver CLI invoked as a subprocess; the only coupling is
the map/scenario/solution interchange formats. Unsolved instances escalate
through a staged timeout ladder and are dropped with a log entry when the
ladder is exhausted.
"""

import json
import logging
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .formats import Grid, Trajectory, parse_map, parse_scenario, parse_solution

log = logging.getLogger(__name__)

DEFAULT_TIMEOUTS = (1.0, 5.0, 15.0, 60.0)
SOLVER = "lagat"


def solve_instance(
    map_path: Path,
    scen_path: Path,
    agents: int,
    out_path: Path,
    timeouts: Sequence[float] = DEFAULT_TIMEOUTS,
    seed: int = 0,
    anytime: bool = False,
    policy: Optional[Path] = None,
) -> Optional[Trajectory]:
    """Run the expert through the timeout ladder; None if never solved."""
    for limit in timeouts:
        cmd = [
            SOLVER, "solve", "--map", str(map_path), "--scen", str(scen_path),
            "--agents", str(agents), "--time-limit", str(limit),
            "--seed", str(seed), "--output", str(out_path),
        ]
        if policy is not None:
            cmd += ["--policy", str(policy)]
        else:
            cmd += ["--no-policy"]
        if anytime:
            cmd.append("--anytime")
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True,
                                  timeout=limit + 60)
        except (OSError, subprocess.TimeoutExpired) as e:
            log.warning("solver crash on %s: %s", map_path.name, e)
            return None
        if proc.returncode == 0:
            grid = parse_map(map_path.read_text())
            starts, goals, paths = parse_solution(out_path.read_text(), grid)
            return Trajectory(
                name=map_path.stem, grid=grid, starts=tuple(starts),
                goals=tuple(goals), paths=paths,
            )
        if proc.returncode == 2:  # proven unsolvable: no ladder will help
            log.info("unsolvable: %s", map_path.name)
            return None
        if proc.returncode not in (3,):  # not a timeout -> treat as crash
            log.warning("solver error on %s: %s", map_path.name,
                        proc.stderr.strip())
            return None
    log.info("timeout ladder exhausted: %s", map_path.name)
    return None


def generate_suite(
    out_dir: Path,
    kind: str,
    size: str,
    agents: int,
    count: int,
    seed: int,
) -> List[Tuple[Path, Path, int]]:
    """Generate instances with the solver CLI; (map, scen, agents) triples."""
    out_dir.mkdir(parents=True, exist_ok=True)
    subprocess.run(
        [
            SOLVER, "gen", "--kind", kind, "--size", size,
            "--agents", str(agents), "--count", str(count),
            "--seed", str(seed), "--out", str(out_dir),
        ],
        check=True, capture_output=True,
    )
    return [
        (m, m.with_suffix(".scen"), agents)
        for m in sorted(out_dir.glob("*.map"))
    ]


def collect(
    instances: Sequence[Tuple[Path, Path, int]],
    out_dir: Path,
    timeouts: Sequence[float] = DEFAULT_TIMEOUTS,
    seed: int = 0,
    anytime: bool = False,
    workers: int = 4,
) -> List[Trajectory]:
    """Solve every instance; write .sol files and a collect_log.jsonl."""
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(item):
        map_path, scen_path, agents = item
        sol_path = out_dir / (map_path.stem + ".sol")
        traj = solve_instance(map_path, scen_path, agents, sol_path,
                              timeouts, seed, anytime)
        if traj is None and sol_path.exists():
            sol_path.unlink()
        return map_path, traj

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, instances))

    trajectories = []
    log_lines = []
    for map_path, traj in results:
        if traj is None:
            log_lines.append(json.dumps(
                {"instance": map_path.stem, "status": "dropped"}
            ))
        else:
            trajectories.append(traj)
            # keep the map/scen next to the solution so the dataset directory
            # is self-contained
            for src in (map_path, map_path.with_suffix(".scen")):
                dst = out_dir / src.name
                if src.resolve() != dst.resolve():
                    dst.write_text(src.read_text())
    (out_dir / "collect_log.jsonl").write_text(
        "\n".join(log_lines) + ("\n" if log_lines else "")
    )
    return trajectories


def load_trajectories(data_dir: Path) -> List[Trajectory]:
    """Read a collected dataset directory back into trajectories."""
    out = []
    for sol_path in sorted(Path(data_dir).glob("*.sol")):
        map_path = sol_path.with_suffix(".map")
        grid = parse_map(map_path.read_text())
        starts, goals, paths = parse_solution(sol_path.read_text(), grid)
        out.append(Trajectory(
            name=sol_path.stem, grid=grid, starts=tuple(starts),
            goals=tuple(goals), paths=paths,
        ))
    return out
