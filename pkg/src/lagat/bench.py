"""Benchmark harness: run a solver-option matrix over an instance suite and
emit plot-ready per-run and aggregate tables (CSV plus a JSON mirror).

Rows execute in a worker pool capped by the LAGAT_THREADS environment
variable; per-row seeds keep each row deterministic and the collector writes
output in input order, so reruns are byte-identical.
"""

import json
import multiprocessing
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from .grid import generate_instance, load_map, load_scenario
from .lacam import SOLVED, SolverOptions, solve
from .metrics import RunRecord, compute_metrics, soc_lower_bound

SCHEMA_VERSION = 1


@dataclass
class BenchRow:
    map_path: str
    scen_path: Optional[str]
    agents: int
    solver_name: str
    solver_cfg: Dict
    seed: int  # solver seed
    gen_seed: int = 0  # instance-generation seed, shared across solvers


def discover_suite(suite_dir: str) -> List[Tuple[str, Optional[str]]]:
    """(map, matching scen or None) pairs, sorted by name."""
    suite = Path(suite_dir)
    pairs = []
    for map_path in sorted(suite.glob("*.map")):
        scen = map_path.with_suffix(".scen")
        pairs.append((str(map_path), str(scen) if scen.exists() else None))
    return pairs


def _solver_options(cfg: Dict, seed: int) -> SolverOptions:
    policy = None
    if cfg.get("policy"):
        from .policy import load_weights

        policy = load_weights(Path(cfg["policy"]).read_bytes())
    return SolverOptions(
        time_limit=float(cfg.get("time_limit", 30.0)),
        deadlock_depth=int(cfg.get("deadlock_depth", 2)),
        policy=policy,
        anytime=bool(cfg.get("anytime", False)),
        seed=seed,
        no_policy=bool(cfg.get("no_policy", False)),
        no_deadlock_detection=bool(cfg.get("no_deadlock_detection", False)),
        lns_k=int(cfg.get("lns_k", 8)),
    )


def run_row(row: BenchRow) -> RunRecord:
    map_name = Path(row.map_path).stem
    instance_id = f"{map_name}:{row.agents}:{row.gen_seed}"
    try:
        gmap = load_map(Path(row.map_path).read_text())
        if row.scen_path:
            instance = load_scenario(
                Path(row.scen_path).read_text(), gmap, row.agents
            )
        else:
            instance = generate_instance(gmap, row.agents, row.gen_seed)
    except (OSError, ValueError):
        return RunRecord(
            instance_id=instance_id, solver=row.solver_name, status="ERROR",
            soc=None, soc_lb=None, makespan=None, init_time=None,
            init_soc=None, final_time=0.0, seed=row.seed, agents=row.agents,
            map_name=map_name,
        )
    result = solve(instance, _solver_options(row.solver_cfg, row.seed))
    if result.status == SOLVED:
        rec = compute_metrics(
            instance, result.solution,
            instance_id=instance_id, solver=row.solver_name, seed=row.seed,
            init_time=result.init_time, init_soc=result.init_soc,
            final_time=result.final_time,
        )
        rec.map_name = map_name
        return rec
    return RunRecord(
        instance_id=instance_id, solver=row.solver_name, status=result.status,
        soc=None, soc_lb=None, makespan=None, init_time=None, init_soc=None,
        final_time=result.final_time, seed=row.seed, agents=row.agents,
        map_name=map_name,
    )


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_runs_csv(records: List[RunRecord], path: Path) -> None:
    lines = [",".join(RunRecord.CSV_FIELDS)]
    for r in records:
        d = r.as_dict()
        lines.append(",".join(_fmt(d[f]) for f in RunRecord.CSV_FIELDS))
    path.write_text("\n".join(lines) + "\n")


def aggregate(records: List[RunRecord]) -> List[Dict]:
    """Mean and 95% CI half-width per (map, agent count, solver).

    TIMEOUT/NO_SOLUTION rows are excluded from SoC averages but count in the
    success-rate denominator.
    """
    groups: Dict[Tuple[str, int, str], List[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.map_name, r.agents, r.solver), []).append(r)
    rows = []
    for (map_name, agents, solver), rs in sorted(groups.items()):
        solved = [r for r in rs if r.status == "SOLVED"]
        total = len(rs)

        def mean_ci(values):
            if not values:
                return None, None
            arr = np.asarray(values, dtype=float)
            mean = float(arr.mean())
            if arr.size < 2:
                return mean, 0.0
            half = float(
                stats.t.ppf(0.975, arr.size - 1)
                * arr.std(ddof=1)
                / np.sqrt(arr.size)
            )
            return mean, half
        soc_mean, soc_ci = mean_ci([r.soc for r in solved])
        ratio_mean, ratio_ci = mean_ci([r.soc_lb for r in solved])
        time_mean, time_ci = mean_ci([r.final_time for r in solved])
        rows.append(
            {
                "map_name": map_name,
                "agents": agents,
                "solver": solver,
                "runs": total,
                "success_rate": len(solved) / total if total else 0.0,
                "soc_mean": soc_mean,
                "soc_ci95": soc_ci,
                "soc_lb_mean": ratio_mean,
                "soc_lb_ci95": ratio_ci,
                "time_mean": time_mean,
                "time_ci95": time_ci,
            }
        )
    return rows


AGG_FIELDS = (
    "map_name", "agents", "solver", "runs", "success_rate", "soc_mean",
    "soc_ci95", "soc_lb_mean", "soc_lb_ci95", "time_mean", "time_ci95",
)


def write_aggregates_csv(rows: List[Dict], path: Path) -> None:
    lines = [",".join(AGG_FIELDS)]
    for row in rows:
        lines.append(",".join(_fmt(row[f]) for f in AGG_FIELDS))
    path.write_text("\n".join(lines) + "\n")


def worker_count() -> int:
    env = os.environ.get("LAGAT_THREADS")
    if env:
        return max(1, int(env))
    return max(1, multiprocessing.cpu_count() // 2)


def run_benchmark(suite_dir: str, config: Dict, out_dir: str) -> List[RunRecord]:
    """Execute every (instance, agent count, solver) row and write reports."""
    pairs = discover_suite(suite_dir)
    if not pairs:
        raise ValueError(f"no .map files under {suite_dir}")
    agent_counts = config.get("agents", [8])
    solvers = config.get("solvers", [{"name": "lacam"}])
    base_seed = int(config.get("seed", 0))
    rows = []
    for map_path, scen_path in pairs:
        for agents in agent_counts:
            for cfg in solvers:
                rows.append(
                    BenchRow(
                        map_path=map_path,
                        scen_path=scen_path,
                        agents=int(agents),
                        solver_name=cfg.get("name", "lacam"),
                        solver_cfg=cfg,
                        seed=base_seed + int(cfg.get("seed", 0)),
                        gen_seed=base_seed,
                    )
                )
    workers = worker_count()
    if workers > 1 and len(rows) > 1:
        with multiprocessing.Pool(workers) as pool:
            records = pool.map(run_row, rows)
    else:
        records = [run_row(r) for r in rows]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_runs_csv(records, out / "runs.csv")
    agg = aggregate(records)
    write_aggregates_csv(agg, out / "aggregates.csv")
    (out / "runs.json").write_text(
        json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "note": "soc_lb reported as 1.0 when the lower bound is 0",
                "runs": [r.as_dict() for r in records],
                "aggregates": agg,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return records
