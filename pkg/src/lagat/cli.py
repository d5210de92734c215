"""Command-line front end: solve / validate / gen / bench subcommands.

Exit codes for `solve`: 0 SOLVED, 2 NO_SOLUTION, 3 TIMEOUT (1 is reserved for
usage or input errors).
"""

import argparse
import json
import sys
from pathlib import Path

from .bench import run_benchmark
from .grid import (
    MAP_GENERATORS,
    Instance,
    dump_map,
    dump_scenario,
    format_solution,
    generate_instance,
    load_map,
    load_scenario,
    parse_solution,
    validate_solution,
)
from .lacam import NO_SOLUTION, SOLVED, TIMEOUT, SolverOptions, solve

EXIT_CODES = {SOLVED: 0, NO_SOLUTION: 2, TIMEOUT: 3}


def cmd_solve(args) -> int:
    gmap = load_map(Path(args.map).read_text())
    instance = load_scenario(Path(args.scen).read_text(), gmap, args.agents)
    policy = None
    if args.policy:
        from .policy import load_weights

        policy = load_weights(Path(args.policy).read_bytes())
    options = SolverOptions(
        time_limit=args.time_limit,
        deadlock_depth=args.deadlock_depth,
        policy=policy,
        anytime=args.anytime,
        seed=args.seed,
        no_policy=args.no_policy,
        no_deadlock_detection=args.no_deadlock_detection,
        lns_k=args.lns_k,
    )
    result = solve(instance, options)
    if result.status == SOLVED:
        Path(args.output).write_text(format_solution(instance, result.solution))
        print(
            f"SOLVED soc={result.soc} init_soc={result.init_soc} "
            f"init_time={result.init_time:.3f}s time={result.final_time:.3f}s "
            f"expansions={result.expansions}"
        )
    else:
        print(f"{result.status} time={result.final_time:.3f}s "
              f"expansions={result.expansions}")
    return EXIT_CODES[result.status]


def cmd_validate(args) -> int:
    gmap = load_map(Path(args.map).read_text())
    starts, goals, solution = parse_solution(
        Path(args.solution).read_text(), gmap
    )
    instance = Instance(gmap, starts, goals)
    report = validate_solution(instance, solution)
    if report.ok:
        print("OK: feasible solution")
        return 0
    for v in report.violations:
        print(f"violation kind={v.kind} t={v.t} agents={v.agents} "
              f"vertex={v.vertex}")
    return 1


def cmd_gen(args) -> int:
    try:
        width, height = (int(p) for p in args.size.lower().split("x"))
    except ValueError:
        print(f"bad --size {args.size!r}, expected WxH", file=sys.stderr)
        return 1
    gen = MAP_GENERATORS[args.kind]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for idx in range(args.count):
        seed = args.seed + idx
        gmap = gen(width, height, seed)
        instance = generate_instance(gmap, args.agents, seed)
        name = f"{args.kind}_{width}x{height}_{idx:03d}"
        (out / f"{name}.map").write_text(dump_map(gmap))
        (out / f"{name}.scen").write_text(dump_scenario(instance, name))
    print(f"wrote {args.count} instances to {out}")
    return 0


def cmd_bench(args) -> int:
    config = json.loads(Path(args.config).read_text())
    records = run_benchmark(args.suite, config, args.out)
    solved = sum(1 for r in records if r.status == "SOLVED")
    print(f"{solved}/{len(records)} rows solved; reports in {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lagat")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("--map", required=True)
    p.add_argument("--scen", required=True)
    p.add_argument("--agents", type=int, required=True)
    p.add_argument("--policy", default=None, help="weight file (MAGATW01)")
    p.add_argument("--deadlock-depth", type=int, default=2)
    p.add_argument("--anytime", action="store_true")
    p.add_argument("--time-limit", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-policy", action="store_true")
    p.add_argument("--no-deadlock-detection", action="store_true")
    p.add_argument("--lns-k", type=int, default=8)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="validate a solution file")
    p.add_argument("--map", required=True)
    p.add_argument("--solution", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen", help="generate maps and scenarios")
    p.add_argument("--kind", choices=sorted(MAP_GENERATORS), required=True)
    p.add_argument("--size", required=True, help="WxH")
    p.add_argument("--agents", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
