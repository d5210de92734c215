#!/usr/bin/env python3
"""Compare the numba-compiled kernels against the pure-numpy fallback.

Runs the same deterministic solve workload in two subprocesses — one with the
default backend, one with ``LAGAT_NO_NUMBA=1`` — verifies that statuses,
costs, expansion counts, and the solution paths themselves are identical, and
prints a throughput table.

Usage:
    python3 benchmarks/backend_compare.py [--sizes 16,24,32] [--agents 8,16,32]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from lagat import backend_name
from lagat.grid import generate_instance, maze_map, random_map, warehouse_map
from lagat.lacam import SolverOptions, solve

sizes = [int(s) for s in sys.argv[1].split(",")]
agent_counts = [int(a) for a in sys.argv[2].split(",")]
generators = {"random": random_map, "maze": maze_map, "warehouse": warehouse_map}

rows = []
for kind, gen in generators.items():
    for side in sizes:
        gmap = gen(side, side, 7)
        capacity = len(gmap.components()[0])
        for agents in agent_counts:
            if agents > capacity // 2:
                continue
            inst = generate_instance(gmap, agents, 7)
            t0 = time.perf_counter()
            r = solve(inst, SolverOptions(no_policy=True, time_limit=30.0, seed=1))
            wall = time.perf_counter() - t0
            rows.append({
                "kind": kind, "side": side, "agents": agents,
                "status": r.status, "soc": r.soc, "expansions": r.expansions,
                "wall": wall,
                "paths": (r.solution.paths.tobytes().hex()
                          if r.solution is not None else None),
            })
print(json.dumps({"backend": backend_name(), "rows": rows}))
"""


def run_backend(no_numba: bool, sizes: str, agents: str) -> dict:
    env = dict(os.environ, LAGAT_NO_NUMBA="1" if no_numba else "0")
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, sizes, agents],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(proc.stdout.splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="16,24,32")
    ap.add_argument("--agents", default="8,16,32")
    args = ap.parse_args(argv)

    print("warming up numba cache ...", flush=True)
    run_backend(False, "8", "4")

    fast = run_backend(False, args.sizes, args.agents)
    slow = run_backend(True, args.sizes, args.agents)
    assert fast["backend"] == "numba" and slow["backend"] == "numpy"

    mismatches = 0
    header = f"{'map':<10}{'side':>5}{'agents':>7}{'status':>9}{'soc':>7}" \
             f"{'exp':>7}{'numba s':>9}{'numpy s':>9}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    total_fast = total_slow = 0.0
    for a, b in zip(fast["rows"], slow["rows"]):
        same = all(a[k] == b[k] for k in ("status", "soc", "expansions", "paths"))
        if not same:
            mismatches += 1
        total_fast += a["wall"]
        total_slow += b["wall"]
        speedup = b["wall"] / a["wall"] if a["wall"] > 0 else float("inf")
        print(
            f"{a['kind']:<10}{a['side']:>5}{a['agents']:>7}{a['status']:>9}"
            f"{str(a['soc']):>7}{a['expansions']:>7}{a['wall']:>9.3f}"
            f"{b['wall']:>9.3f}{speedup:>8.1f}x"
            + ("" if same else "   MISMATCH")
        )
    print("-" * len(header))
    print(
        f"total wall: numba {total_fast:.2f}s, numpy {total_slow:.2f}s "
        f"({total_slow / max(total_fast, 1e-9):.1f}x); "
        f"{mismatches} result mismatches"
    )
    return 1 if mismatches else 0


if __name__ == "__main__":
    raise SystemExit(main())
