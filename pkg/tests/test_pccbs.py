import random

import pytest
from hypothesis import given, settings, strategies as st

from pcmapf.bench import random_small_instance
from pcmapf.gridworld import all_pairs_shortest_paths, motion_graph, parse_map
from pcmapf.lowlevel import ConstraintSet
from pcmapf.pccbs import (PCCBS, CollisionConflict, ConflictTreeNode, detect_collision_conflict,
                          detect_precedence_conflict, replan_priority, resolve_collision_conflict,
                          resolve_precedence_conflict, solve, split_interval)
from pcmapf.problem import Agent, AgentPath, Problem, Task, parse_problem
from pcmapf.taskgraph import CARRY, INF, Interval, build_task_graph, initialize_intervals
from pcmapf.verify import oracle_makespan, validate_solution

from helpers import DEAD_END_MAP, DEAD_END_PROBLEM, grid_from

OPEN5 = grid_from(*["....."] * 5)


def coalition_node(pickups):
    """Four-agent coalition with the given (inconsistent) pickup timesteps."""
    names = [f"a{i}" for i in range(len(pickups))]
    starts = [(0, 0), (0, 4), (4, 0), (4, 4)]
    agents = {a: Agent(a, starts[i], starts[i]) for i, a in enumerate(names)}
    problem = Problem(agents, {"t": Task("t", tuple(names), (2, 2), (2, 3))}, {a: ("t",) for a in names})
    tg = build_task_graph(problem, all_pairs_shortest_paths(motion_graph(OPEN5)))
    sol = {a: AgentPath(a, [(2, 2)] * 20, {"t": (p, 15)}) for a, p in zip(names, pickups)}
    return tg, ConflictTreeNode(ConstraintSet(), initialize_intervals(tg), sol)


def test_split_reproduces_worked_example():
    tg, node = coalition_node([5, 10, 7, 12])
    conflict = detect_precedence_conflict(node, tg)
    assert conflict.kind == "start" and conflict.task.kind == CARRY
    assert conflict.split_timestep == 12
    node.intervals = node.intervals.replace(conflict.task.index, start=Interval(0, INF))
    children = resolve_precedence_conflict(node, conflict, tg)
    assert [c.branch[0][2] for c in children] == [Interval(0, 11), Interval(12, INF)]


def test_split_clamps_to_old_max():
    assert split_interval(Interval(0, 9), 12) == (Interval(0, 8), Interval(9, 9))


def test_split_at_min_gives_empty_lower_half():
    lo, hi = split_interval(Interval(3, 9), 3)
    assert lo.empty and hi == Interval(3, 9)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 60))
def test_split_partitions_interval(a, width, s):
    old = Interval(a, a + width)
    lo, hi = split_interval(old, max(s, a))
    covered = {t for t in range(a, a + width + 1) if t in lo or t in hi}
    assert covered == set(range(a, a + width + 1))
    assert not any(t in lo and t in hi for t in range(a, a + width + 1))


def test_consistent_coalition_has_no_conflict():
    tg, node = coalition_node([6, 6, 6, 6])
    assert detect_precedence_conflict(node, tg) is None


def test_chain_boundary_end_equals_start_is_consistent():
    agents = {"a": Agent("a", (0, 0), (0, 0)), "b": Agent("b", (4, 0), (4, 0))}
    tasks = {"t1": Task("t1", ("a",), (0, 1), (0, 4)), "t2": Task("t2", ("b",), (4, 1), (4, 4))}
    problem = Problem(agents, tasks, {"a": ("t1",), "b": ("t2",)}, [("t1", "t2")])
    tg = build_task_graph(problem, all_pairs_shortest_paths(motion_graph(OPEN5)))
    sol = {"a": AgentPath("a", [(0, 0)] * 10, {"t1": (2, 6)}), "b": AgentPath("b", [(4, 0)] * 10, {"t2": (6, 8)})}
    node = ConflictTreeNode(ConstraintSet(), initialize_intervals(tg), sol)
    assert detect_precedence_conflict(node, tg) is None
    sol["b"] = AgentPath("b", [(4, 0)] * 10, {"t2": (5, 8)})
    conflict = detect_precedence_conflict(node, tg)
    assert conflict is not None and conflict.split_timestep == 6


def test_replan_priority():
    assert replan_priority(["a1", "a2"], {"a1": 10, "a2": 7}) == ["a1", "a2"]
    assert replan_priority(["a1", "a2"], {"a1": 7, "a2": 10}) == ["a2", "a1"]
    assert replan_priority(["b", "a"], {"a": 5, "b": 5}) == ["b", "a"]


def two_agent_node(pa, pb):
    problem = Problem({"a": Agent("a", pa[0], pa[-1]), "b": Agent("b", pb[0], pb[-1])}, {}, {})
    sol = {"a": AgentPath("a", pa, {}), "b": AgentPath("b", pb, {})}
    return problem, ConflictTreeNode(ConstraintSet(), None, sol)


def test_vertex_collision_detected_at_time():
    problem, node = two_agent_node([(1, 0), (1, 1), (1, 2), (1, 3), (1, 4)],
                                   [(3, 3), (2, 3), (2, 3), (1, 3), (0, 3)])
    assert detect_collision_conflict(node, problem) == CollisionConflict(("a", "b"), ((1, 3),), 3)


def test_edge_collision_detected_at_departure():
    problem, node = two_agent_node([(0, 0), (0, 1), (0, 2)], [(0, 3), (0, 2), (0, 1)])
    c = detect_collision_conflict(node, problem)
    assert c.is_edge and c.timestep == 1 and c.location == ((0, 1), (0, 2))


def test_coalition_members_may_share_cells_while_carrying():
    problem = Problem({"a": Agent("a", (0, 0), (0, 0)), "b": Agent("b", (0, 2), (0, 2))},
                      {"t": Task("t", ("a", "b"), (0, 1), (1, 1))}, {"a": ("t",), "b": ("t",)})
    pa = [(0, 0), (0, 1), (1, 1), (0, 1), (0, 0)]
    pb = [(0, 2), (0, 1), (1, 1), (0, 1), (0, 2)]
    sol = {"a": AgentPath("a", pa, {"t": (1, 2)}), "b": AgentPath("b", pb, {"t": (1, 2)})}
    node = ConflictTreeNode(ConstraintSet(), None, sol)
    c = detect_collision_conflict(node, problem)
    assert c.timestep == 3  # only once the task is over


def test_collision_split_constrains_each_agent():
    grid = grid_from(".....")
    problem = Problem({"a": Agent("a", (0, 0), (0, 4)), "b": Agent("b", (0, 4), (0, 0))}, {}, {})
    planner = PCCBS(problem, motion_graph(grid))
    root = planner.root()
    c = detect_collision_conflict(root, problem)
    children = resolve_collision_conflict(root, c, planner)
    # neither agent can get around in a one-row corridor
    assert children == [] or all(ch.constraints != root.constraints for ch in children)


def test_trivial_instance():
    problem = Problem({"a": Agent("a", (0, 0), (0, 0))}, {}, {})
    result = solve(problem, motion_graph(OPEN5))
    assert result.solved and result.makespan == 0 and result.ct_nodes == 1


def test_dead_end_matches_oracle():
    g = motion_graph(parse_map(DEAD_END_MAP))
    problem = parse_problem(DEAD_END_PROBLEM)
    result = solve(problem, g, timeout=60)
    assert result.makespan == oracle_makespan(problem, g).makespan == 9
    assert validate_solution(problem, g, result.solution).ok


def test_infeasible_instance_reported():
    grid = grid_from(".@.")
    problem = Problem({"a": Agent("a", (0, 0), (0, 0))}, {"t": Task("t", ("a",), (0, 2), (0, 0))}, {"a": ("t",)})
    assert solve(problem, motion_graph(grid)).status == "infeasible"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2]))
def test_optimal_valid_and_monotone(seed, degree):
    grid, problem = random_small_instance(random.Random(seed), degree)
    g = motion_graph(grid)
    planner = PCCBS(problem, g, timeout=20)
    result = planner.solve()
    if not result.solved:
        return
    assert planner.popped_costs == sorted(planner.popped_costs)
    assert validate_solution(problem, g, result.solution).ok
    try:
        oracle = oracle_makespan(problem, g, budget=300_000)
    except Exception:
        return
    assert result.makespan == oracle.makespan


@pytest.mark.parametrize("bypass, prioritize", [(False, False), (True, False), (False, True)])
def test_search_options_keep_optimality(bypass, prioritize):
    rng = random.Random(5)
    for _ in range(15):
        grid, problem = random_small_instance(rng, rng.choice([1, 2]))
        g = motion_graph(grid)
        plain = PCCBS(problem, g, timeout=20, bypass=bypass, prioritize=prioritize).solve()
        full = PCCBS(problem, g, timeout=20).solve()
        if plain.solved and full.solved:
            assert plain.makespan == full.makespan
