"""Command line entry point: ``mapfdecomp {decompose,solve,bench,validate,generate}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench.maps import SUITE, generate_scenario
from .bench.records import emit_csv
from .bench.runner import BenchConfig, run_benchmark, sample_tasks
from .decompose import decompose_instance
from .grid import Instance, MapFormatError, ScenarioError, dump_map, load_map, parse_scenario, select_rows
from .layered import SolverKind, layered_solve, raw_solve
from .solvers import InvalidPathError, Solution, SolverTimeout, validate_solution

log = logging.getLogger("mapfdecomp")


def _instance(args, count: int | None = None) -> Instance:
    grid = load_map(Path(args.map).read_text())
    rows = parse_scenario(Path(args.scen).read_text(), grid)
    count = count if count is not None else args.agents
    if args.seed is not None:
        tasks = sample_tasks(rows, count, args.seed, Path(args.map).stem, 0)
    else:
        tasks = select_rows(rows, count)
    return Instance(grid, tasks)


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_decompose(args) -> int:
    decomposition = decompose_instance(_instance(args))
    _write(decomposition.to_report(), args.out)
    return 0


def cmd_solve(args) -> int:
    instance = _instance(args)
    kind = SolverKind(args.solver)
    timeout = args.timeout_ms / 1000.0
    if args.method == "layered":
        outcome = layered_solve(instance, kind=kind, deadline=timeout)
        solution = outcome.solution
        log.info("decomposition rate %.4f, %d levels", outcome.decomposition.rate, len(outcome.decomposition.levels))
    else:
        try:
            solution = raw_solve(instance, kind, deadline=timeout)
        except SolverTimeout:
            solution = None
    if solution is None:
        print("no solution found", file=sys.stderr)
        return 1
    print(f"soc={solution.soc} makespan={solution.makespan}", file=sys.stderr)
    _write(solution.to_text(), args.out)
    return 0


def cmd_validate(args) -> int:
    solution = Solution.from_text(Path(args.solution).read_text())
    instance = _instance(args, args.agents or len(solution.paths))
    try:
        conflicts = validate_solution(instance.map, instance.tasks, solution)
    except InvalidPathError as exc:
        print(f"invalid path: {exc}")
        return 1
    for c in conflicts:
        print(f"{c.kind} t={c.time} agents {c.agent},{c.other} at {list(c.cells)}")
    print(f"{len(conflicts)} conflicts")
    return 1 if conflicts else 0


def cmd_bench(args) -> int:
    if not args.out:
        raise SystemExit("bench needs --out")
    if len(args.map) != len(args.scen):
        raise SystemExit("pass one --scen per --map")
    config = BenchConfig(
        maps=[Path(p) for p in args.map],
        scens=[Path(p) for p in args.scen],
        agent_counts=args.agents_list,
        repetitions=args.reps,
        timeout=args.timeout_ms / 1000.0,
        methods=args.method or ["raw", "layered"],
        solvers=[SolverKind(s) for s in (args.solver or ["serial"])],
        seed=args.seed or 0,
        output=Path(args.out),
        jobs=args.jobs,
    )
    records = run_benchmark(config)
    emit_csv(records, config.output)
    wins = sum(r.success for r in records)
    print(f"{len(records)} runs, {wins} successful, written to {config.output}", file=sys.stderr)
    return 0


def cmd_generate(args) -> int:
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.names or SUITE:
        if name not in SUITE:
            raise SystemExit(f"unknown map {name!r}; choose from {', '.join(SUITE)}")
        grid = SUITE[name]()
        (out / f"{name}.map").write_text(dump_map(grid))
        (out / f"{name}.scen").write_text(generate_scenario(grid, f"{name}.map", rows=args.rows, seed=args.seed or 0))
        print(f"{name}: {grid.dims[0]}x{grid.dims[1]}, {grid.free_count} free cells", file=sys.stderr)
    return 0


def _counts(text: str) -> list[int]:
    try:
        counts = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad agent count list {text!r}") from None
    if not counts or min(counts) < 1:
        raise argparse.ArgumentTypeError("agent counts must be positive")
    return counts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapfdecomp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def instance_flags(p, agents_required=True):
        p.add_argument("--map", required=True)
        p.add_argument("--scen", required=True)
        if agents_required:
            p.add_argument("--agents", type=int, required=True)
        p.add_argument("--seed", type=int, default=None, help="sample scenario rows instead of taking the first ones")
        p.add_argument("--out")

    p = sub.add_parser("decompose", help="print the decomposition report of one instance")
    instance_flags(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("solve", help="solve one instance and print its paths")
    instance_flags(p)
    p.add_argument("--method", choices=["raw", "layered"], default="layered")
    p.add_argument("--solver", choices=["serial", "parallel"], default="serial")
    p.add_argument("--timeout-ms", type=float, default=30000)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="check a solution file for conflicts")
    instance_flags(p, agents_required=False)
    p.add_argument("--agents", type=int, default=None)
    p.add_argument("--solution", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="run a raw vs layered campaign and write CSV")
    p.add_argument("--map", action="append", required=True)
    p.add_argument("--scen", action="append", required=True)
    p.add_argument("--agents", dest="agents_list", type=_counts, required=True, help="comma separated counts")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--timeout-ms", type=float, default=30000)
    p.add_argument("--method", action="append", choices=["raw", "layered"])
    p.add_argument("--solver", action="append", choices=["serial", "parallel"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1, help="run (map, count, rep) tuples in parallel processes")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("generate", help="write the synthetic benchmark maps and scenarios")
    p.add_argument("dir")
    p.add_argument("names", nargs="*")
    p.add_argument("--rows", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, MapFormatError, ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
