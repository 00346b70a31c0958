"""pc-mapf command line: solve, generate, bench, verify, oracle."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import (ASSEMBLY, CMAPD, SOLVERS, BenchmarkValidationError, GenerationError,
                    GeneratorConfig, generate_suite, read_suite, run_benchmark, write_suite)
from .gridworld import BUNDLED_MAPS, MapFormatError, load_map, motion_graph, parse_map
from .problem import ProblemFormatError, format_solution, parse_problem, parse_solution
from .taskgraph import CycleError, UnreachableError
from .verify import OracleBudgetExceeded, oracle_makespan, validate_solution

OK, UNSOLVED, INVALID_INPUT, VALIDATION_FAILED = 0, 1, 2, 3

log = logging.getLogger("pc-mapf")


class InputError(Exception):
    pass


def read_map(spec: str):
    """A map file path, or the name of a bundled map."""
    path = Path(spec)
    try:
        if path.exists():
            return parse_map(path.read_text())
        if spec in BUNDLED_MAPS:
            return load_map(spec)
    except MapFormatError as exc:
        raise InputError(f"{spec}: {exc}") from None
    raise InputError(f"no such map file or bundled map: {spec}")


def read_problem(path: str, grid):
    try:
        problem = parse_problem(Path(path).read_text())
        problem.check(grid)
    except OSError as exc:
        raise InputError(str(exc)) from None
    except (ProblemFormatError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None
    return problem


def cmd_solve(args) -> int:
    grid = read_map(args.map)
    problem = read_problem(args.problem, grid)
    g = motion_graph(grid)
    result = SOLVERS[args.algorithm](problem, g, timeout=args.timeout_seconds)
    log.info("%s: %s, %d CT nodes, %d ms", args.algorithm, result.status,
             result.ct_nodes, result.runtime_ms)
    if not result.solved:
        print(f"unsolved: {result.status}", file=sys.stderr)
        return UNSOLVED
    text = format_solution(result.solution, problem)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return OK


def cmd_generate(args) -> int:
    grid = read_map(args.map)
    try:
        cfg = GeneratorConfig(grid, args.agents, args.mean_tasks, args.coalition_degree,
                              args.edge_probability, args.seed, args.mode)
        problems = generate_suite(cfg, args.count)
    except (GenerationError, ValueError) as exc:
        raise InputError(str(exc)) from None
    for p in write_suite(args.out_dir, grid, problems):
        print(p)
    return OK


def cmd_bench(args) -> int:
    try:
        instances = read_suite(args.instances)
    except (OSError, MapFormatError, ProblemFormatError) as exc:
        raise InputError(str(exc)) from None
    algorithms = tuple(a.strip() for a in args.algorithms.split(","))
    unknown = [a for a in algorithms if a not in SOLVERS]
    if unknown:
        raise InputError(f"unknown algorithm(s): {', '.join(unknown)}")
    try:
        report, records = run_benchmark(instances, algorithms, args.timeout_seconds,
                                        args.csv, args.workers)
    except BenchmarkValidationError as exc:
        print(exc, file=sys.stderr)
        return VALIDATION_FAILED
    for r in records:
        log.info("%s %s %s %s", r.instance, r.algorithm, r.status, r.makespan)
    if report is not None:
        print(report)
    return OK if all(r.status == "solved" for r in records) else UNSOLVED


def cmd_verify(args) -> int:
    grid = read_map(args.map)
    problem = read_problem(args.problem, grid)
    try:
        solution = parse_solution(Path(args.solution).read_text(), problem)
    except (OSError, ProblemFormatError) as exc:
        raise InputError(str(exc)) from None
    report = validate_solution(problem, motion_graph(grid), solution)
    if not report.ok:
        print(report, file=sys.stderr)
        return VALIDATION_FAILED
    print(f"valid, makespan {solution.makespan}")
    return OK


def cmd_oracle(args) -> int:
    grid = read_map(args.map)
    problem = read_problem(args.problem, grid)
    try:
        result = oracle_makespan(problem, motion_graph(grid), budget=args.budget)
    except OracleBudgetExceeded:
        print("oracle budget exceeded", file=sys.stderr)
        return UNSOLVED
    if result.makespan is None:
        print("no solution", file=sys.stderr)
        return UNSOLVED
    print(f"makespan {result.makespan}")
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pc-mapf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one problem")
    p.add_argument("--map", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--algorithm", choices=sorted(SOLVERS), default="pc-cbs")
    p.add_argument("--timeout-seconds", type=float, default=300)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("generate", help="write a suite of random instances")
    p.add_argument("--map", required=True)
    p.add_argument("--mode", choices=[ASSEMBLY, CMAPD], default=ASSEMBLY)
    p.add_argument("--agents", type=int, default=2)
    p.add_argument("--mean-tasks", type=int, default=2)
    p.add_argument("--coalition-degree", type=int, default=1)
    p.add_argument("--edge-probability", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="run solvers over a generated suite")
    p.add_argument("--instances", required=True)
    p.add_argument("--algorithms", default="pc-cbs,h-cbs")
    p.add_argument("--timeout-seconds", type=float, default=300)
    p.add_argument("--csv")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="check a solution file")
    p.add_argument("--map", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--solution", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="exact makespan by joint-state search")
    p.add_argument("--map", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--budget", type=int, default=10 ** 7)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID_INPUT
    except (UnreachableError, CycleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID_INPUT


if __name__ == "__main__":
    sys.exit(main())
