"""Precedence-constrained multi-agent path finding on grids."""
from .gridworld import GridMap, MotionGraph, all_pairs_shortest_paths, load_map, motion_graph, parse_map
from .hcbs import solve_hcbs
from .pccbs import PCCBS, SolveResult, solve
from .problem import AgentPath, Problem, Solution, format_problem, format_solution, parse_problem, parse_solution
from .taskgraph import build_task_graph
from .verify import oracle_makespan, validate_solution

__all__ = [
    "GridMap", "MotionGraph", "all_pairs_shortest_paths", "load_map", "motion_graph", "parse_map",
    "AgentPath", "Problem", "Solution", "format_problem", "format_solution", "parse_problem",
    "parse_solution", "build_task_graph", "PCCBS", "SolveResult", "solve", "solve_hcbs",
    "oracle_makespan", "validate_solution",
]
