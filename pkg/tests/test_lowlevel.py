import random

from hypothesis import given, settings, strategies as st

from pcmapf.gridworld import all_pairs_shortest_paths, load_map, motion_graph, parse_map
from pcmapf.lowlevel import (ConstraintSet, PlanContext, SearchState, Waypoint, cost_to_go,
                             heuristic_tuple, plan_agent_path, plan_segment)
from pcmapf.problem import Agent, AgentPath, Problem, Task
from pcmapf.taskgraph import INF, Interval

from helpers import grid_from, single_agent_arrival

EMPTY = motion_graph(load_map("empty"))
EMPTY_DIST = all_pairs_shortest_paths(EMPTY)


def one_task(pickup_window=Interval(), start=(0, 0)):
    problem = Problem({"a": Agent("a", start, (0, 8))},
                      {"t": Task("t", ("a",), (0, 4), (0, 8))}, {"a": ("t",)})
    ctx = PlanContext(problem, EMPTY, EMPTY_DIST, 500)
    wp = [Waypoint("t", (0, 4), pickup_window, (0, 8), Interval())]
    return ctx, wp


def test_straight_line_arrival():
    ctx, wp = one_task()
    path = plan_agent_path(ctx, "a", wp, ConstraintSet(), {}, 0)
    assert path.arrival == 8
    assert path.events == {"t": (4, 8)}
    assert path.positions[0] == (0, 0) and path.positions[-1] == (0, 8)


def test_pickup_window_forces_wait():
    ctx, wp = one_task(Interval(6, INF))
    path = plan_agent_path(ctx, "a", wp, ConstraintSet(), {}, 0)
    assert path.events["t"][0] == 6
    oracle = single_agent_arrival(EMPTY, (0, 0), (0, 8), [((0, 4), Interval(6, INF)), ((0, 8), Interval())])
    assert path.arrival == oracle == 10


def test_missed_window_is_infeasible():
    ctx, wp = one_task(Interval(0, 3))
    assert plan_agent_path(ctx, "a", wp, ConstraintSet(), {}, 0) is None


def test_vertex_constraint_detours():
    ctx, wp = one_task()
    cons = ConstraintSet().with_vertex("a", (0, 2), 2)
    path = plan_agent_path(ctx, "a", wp, cons, {}, 0)
    assert path.at(2) != (0, 2)
    assert path.arrival == 9


def test_constraint_on_park_after_arrival_delays_arrival():
    ctx, wp = one_task()
    cons = ConstraintSet().with_vertex("a", (0, 8), 12)
    path = plan_agent_path(ctx, "a", wp, cons, {}, 0)
    assert path.arrival == 13


def test_edge_constraint():
    ctx, wp = one_task()
    cons = ConstraintSet().with_edge("a", (0, 0), (0, 1), 0)
    path = plan_agent_path(ctx, "a", wp, cons, {}, 0)
    assert path.positions[1] != (0, 1)
    assert path.arrival == 9


def test_heuristic_tuple_at_origin():
    h = heuristic_tuple(0, 8, 10)
    assert h.delay == 0 and h.f == 8 and h.cost_to_go == 8
    assert heuristic_tuple(0, 8, 5).delay == 3


def test_cost_to_go_values():
    wp = [Waypoint("t", (0, 4), Interval(), (0, 7), Interval())]
    assert cost_to_go(SearchState((0, 8), 9, 2), wp, (0, 8), EMPTY_DIST) == 0
    assert cost_to_go(SearchState((0, 4), 4, 1), wp, (0, 7), EMPTY_DIST) == 3
    assert cost_to_go(SearchState((0, 0), 0, 0), wp, (0, 8), EMPTY_DIST) == 8


def dead_end_instance():
    grid = parse_map("height 3\nwidth 5\n..@@@\n.....\n..@@@\n")
    g = motion_graph(grid)
    problem = Problem(
        {"ra": Agent("ra", (1, 1), (0, 1)), "rb": Agent("rb", (0, 0), (1, 0))},
        {"t1": Task("t1", ("ra",), (1, 1), (1, 3)), "t2": Task("t2", ("rb",), (0, 0), (1, 4))},
        {"ra": ("t1",), "rb": ("t2",)})
    return g, problem


def test_collision_count_breaks_ties_toward_delay():
    g, problem = dead_end_instance()
    ctx = PlanContext(problem, g, all_pairs_shortest_paths(g), 200)
    rb = AgentPath("rb", [(0, 0), (0, 1), (1, 1), (1, 2), (1, 3), (1, 4), (1, 3), (1, 2), (1, 1),
                          (1, 0)], {"t2": (0, 5)})
    wp = [Waypoint("t1", (1, 1), Interval(), (1, 3), Interval())]
    # the greedy plan enters the passage at once and runs into rb; within the bound
    # of 9 the planner prefers the delayed entry that avoids rb altogether
    path = plan_agent_path(ctx, "ra", wp, ConstraintSet(), {"rb": rb}, 9)
    assert path.arrival <= 9
    clashes = [t for t in range(10) if path.at(t) == rb.at(t)]
    assert clashes == []
    assert path.events["t1"][0] >= 2
    greedy = plan_agent_path(ctx, "ra", wp, ConstraintSet(), {}, 0)
    assert greedy.events["t1"] == (0, 2)


def test_segment_plan_holds_goal():
    ctx, _ = one_task()
    path = plan_segment(ctx, (0, 0), 3, (0, 2), {((0, 2), 9)}, set(), hold_goal=True)
    assert path[0] == (0, 0) and path[-1] == (0, 2)
    assert 3 + len(path) - 1 > 9
    free = plan_segment(ctx, (0, 0), 3, (0, 2), {((0, 2), 9)}, set(), hold_goal=False)
    assert len(free) == 3


@st.composite
def single_agent_cases(draw):
    rng = random.Random(draw(st.integers(0, 10 ** 6)))
    rows = ["".join("@" if rng.random() < 0.2 else "." for _ in range(5)) for _ in range(5)]
    if all(ch == "@" for row in rows for ch in row):
        rows[0] = "....."
    g = motion_graph(grid_from(*rows))
    cells = g.vertices
    start, park = rng.choice(cells), rng.choice(cells)
    stops = []
    for _ in range(rng.randint(0, 2)):
        p, d = rng.sample(cells, 2) if len(cells) > 1 else (None, None)
        if p is None:
            break
        lo = rng.randint(0, 8)
        stops.append((p, d, Interval(lo, lo + rng.choice([2, 5, INF])), Interval(0, INF)))
    vcons = {(rng.choice(cells), rng.randint(1, 10)) for _ in range(rng.randint(0, 6))}
    return g, start, park, stops, vcons


@settings(max_examples=60, deadline=None)
@given(single_agent_cases())
def test_matches_single_agent_oracle(case):
    g, start, park, stops, vcons = case
    dist = all_pairs_shortest_paths(g)
    tasks = {f"t{i}": Task(f"t{i}", ("a",), p, d) for i, (p, d, _, _) in enumerate(stops)}
    problem = Problem({"a": Agent("a", start, park)}, tasks, {"a": tuple(tasks)})
    if any(dist(u, v) == INF for u in [start] + [s[0] for s in stops] + [s[1] for s in stops]
           for v in [park] + [s[0] for s in stops] + [s[1] for s in stops]):
        return
    ctx = PlanContext(problem, g, dist, 60)
    wps = [Waypoint(f"t{i}", p, pw, d, dw) for i, (p, d, pw, dw) in enumerate(stops)]
    cons = ConstraintSet(frozenset(("a", v, t) for v, t in vcons))
    path = plan_agent_path(ctx, "a", wps, cons, {}, 0)
    flat = []
    for p, d, pw, dw in stops:
        flat += [(p, pw), (d, dw)]
    expected = single_agent_arrival(g, start, park, flat, frozenset(vcons), horizon=80)
    assert (path.arrival if path else None) == expected
    if path:
        for t, v in enumerate(path.positions):
            assert (v, t) not in vcons
            if t:
                assert v == path.positions[t - 1] or v in g.neighbors(path.positions[t - 1])
