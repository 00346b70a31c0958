"""Single-agent multi-waypoint space-time A* with cascaded tie-breaking.

A search state is (position, timestep, phase).  For an agent with K allotted
tasks, phase 2j means "heading to the pickup of task j", phase 2j+1 means
"carrying task j" and phase 2K means "heading to parking".  Pickups and
deliveries are zero-duration transitions that advance the phase.
"""
from __future__ import annotations

import heapq
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

from .gridworld import DistanceTable, MotionGraph, Vertex
from .problem import AgentPath, Problem
from .taskgraph import INF, Interval


class SearchTimeout(Exception):
    pass


@dataclass(frozen=True)
class Waypoint:
    task: str
    pickup: Vertex
    pickup_window: Interval
    delivery: Vertex
    delivery_window: Interval


@dataclass(frozen=True)
class SearchState:
    position: Vertex
    timestep: int
    phase: int

    @property
    def tasks_completed(self) -> int:
        return self.phase // 2


@dataclass(frozen=True)
class ConstraintSet:
    vertex: frozenset = frozenset()  # (agent, v, t): agent may not be at v at t
    edge: frozenset = frozenset()  # (agent, u, v, t): agent may not move u->v over t->t+1

    def with_vertex(self, agent: str, v: Vertex, t: int) -> "ConstraintSet":
        return ConstraintSet(self.vertex | {(agent, v, t)}, self.edge)

    def with_edge(self, agent: str, u: Vertex, v: Vertex, t: int) -> "ConstraintSet":
        return ConstraintSet(self.vertex, self.edge | {(agent, u, v, t)})

    def for_agent(self, agent: str) -> tuple[set, set]:
        return ({(v, t) for a, v, t in self.vertex if a == agent},
                {(u, v, t) for a, u, v, t in self.edge if a == agent})

    def __len__(self):
        return len(self.vertex) + len(self.edge)


class HeuristicTuple(NamedTuple):
    delay: int  # C1
    precedence: int  # C2
    collisions: int  # C3
    moves_to_go: int  # C4
    cost_to_go: int  # C5
    f: int  # C6


@dataclass
class PlanContext:
    """Per-problem data shared (read-only) by every low-level call."""

    problem: Problem
    graph: MotionGraph
    dist: DistanceTable
    horizon: int
    preds: dict[str, list[str]] = field(default_factory=dict)
    succs: dict[str, list[str]] = field(default_factory=dict)
    expansions: int = 0

    def __post_init__(self):
        for k in self.problem.tasks:
            self.preds.setdefault(k, [])
            self.succs.setdefault(k, [])
        for u, v in self.problem.edges:
            self.preds[v].append(u)
            self.succs[u].append(v)


def heuristic_tuple(cost_to_come: int, cost_to_go: int, makespan_bound: float,
                    precedence: int = 0, collisions: int = 0, moves: int = 0) -> HeuristicTuple:
    return HeuristicTuple(
        max(cost_to_come + cost_to_go - makespan_bound, 0) if makespan_bound != INF else 0,
        precedence, collisions, moves + cost_to_go, cost_to_go, cost_to_come + cost_to_go)


class _Route:
    """Event vertices and windows for one agent's itinerary."""

    def __init__(self, waypoints: list[Waypoint], park: Vertex, dist: DistanceTable,
                 park_block: int = -1):
        self.vertices = []
        self.windows = []
        for w in waypoints:
            self.vertices += [w.pickup, w.delivery]
            self.windows += [w.pickup_window, w.delivery_window]
        self.n = len(self.vertices)
        self.park = park
        self.dist = dist
        self.park_block = park_block
        self.legs = [dist(self.vertices[e], self.vertices[e + 1]) for e in range(self.n - 1)]
        self.to_park = dist(self.vertices[-1], park) if self.n else 0

    def remaining(self, v: Vertex, t: int, phase: int):
        """Earliest-completion lower bound minus t, or None if some window is missed."""
        if phase >= self.n:
            return max(self.dist(v, self.park), self.park_block + 1 - t)
        tau = t + self.dist(v, self.vertices[phase])
        for e in range(phase, self.n):
            if e > phase:
                tau += self.legs[e - 1]
            w = self.windows[e]
            if tau < w.min_time:
                tau = w.min_time
            if tau > w.max_time:
                return None
        tau += self.to_park
        return max(tau, self.park_block + 1) - t


def cost_to_go(state: SearchState, waypoints: list[Waypoint], park: Vertex,
               dist: DistanceTable) -> float:
    """Shortest remaining move count through the unvisited waypoints to parking."""
    route = _Route(waypoints, park, dist)
    if state.phase >= route.n:
        return dist(state.position, park)
    total = dist(state.position, route.vertices[state.phase])
    total += sum(route.legs[state.phase:]) + route.to_park
    return total


class _Others:
    """Occupancy and event lookups over the other agents' current paths."""

    def __init__(self, ctx: PlanContext, agent: str, other_plans: dict[str, AgentPath]):
        self.plans = {a: p for a, p in other_plans.items() if a != agent and p is not None}
        self.occ = defaultdict(list)
        self.moves = defaultdict(int)
        self.parked = {}
        for a, p in self.plans.items():
            for t, v in enumerate(p.positions):
                self.occ[(v, t)].append(a)
                if t and p.positions[t - 1] != v:
                    self.moves[(p.positions[t - 1], v, t - 1)] += 1
            self.parked[p.positions[-1]] = (a, p.arrival)
        self.pickup: dict[str, list[int]] = defaultdict(list)
        self.delivery: dict[str, list[int]] = defaultdict(list)
        for a, p in self.plans.items():
            for k, (pt, dt) in p.events.items():
                self.pickup[k].append(pt)
                self.delivery[k].append(dt)

    def at(self, v: Vertex, t: int) -> list[str]:
        found = self.occ.get((v, t), [])
        parked = self.parked.get(v)
        if parked is not None and t > parked[1]:
            found = found + [parked[0]]
        return found


def plan_agent_path(ctx: PlanContext, agent: str, waypoints: list[Waypoint],
                    constraints: ConstraintSet, other_plans: dict[str, AgentPath],
                    makespan_bound: float, deadline: float | None = None) -> AgentPath | None:
    """Minimum-delay path through the waypoints to parking, or None if infeasible.

    Nodes are ordered by HeuristicTuple: no path returned arrives later than
    max(makespan_bound, earliest feasible arrival).
    """
    problem, dist, graph = ctx.problem, ctx.dist, ctx.graph
    start = problem.agents[agent].start
    park = problem.agents[agent].park
    vcons, econs = constraints.for_agent(agent)
    park_block = max((t for v, t in vcons if v == park), default=-1)
    route = _Route(waypoints, park, dist, park_block)
    n_events = route.n
    horizon = ctx.horizon + max((t for _, t in vcons), default=0) + max(
        (t for *_, t in econs), default=0)
    others = _Others(ctx, agent, other_plans)
    tasks = [w.task for w in waypoints]
    coalition = [set(problem.tasks[k].coalition) - {agent} for k in tasks]

    def event_conflicts(e: int, t: int) -> int:
        k = tasks[e // 2]
        count = 0
        if e % 2 == 0:
            count += sum(1 for p in others.pickup[k] if p != t)
            for j in ctx.preds[k]:
                if any(d > t for d in others.delivery[j]):
                    count += 1
        else:
            count += sum(1 for d in others.delivery[k] if d != t)
            for j in ctx.succs[k]:
                if any(p < t for p in others.pickup[j]):
                    count += 1
        return count

    def step_conflicts(v: Vertex, u: Vertex, t: int, phase: int) -> tuple[int, int]:
        """(precedence, collision) increments for moving v->u over t->t+1."""
        t1 = t + 1
        prec = coll = 0
        k = tasks[phase // 2] if phase < n_events else None
        carrying = phase % 2 == 1 and phase < n_events
        for o in others.at(u, t1):
            if k is not None and o in coalition[phase // 2]:
                ev = others.plans[o].events.get(k)
                if ev is not None and (carrying or u == waypoints[phase // 2].pickup) \
                        and ev[0] <= t1 <= ev[1]:
                    continue
            coll += 1
        if u != v:
            coll += others.moves.get((u, v, t), 0)
        if carrying:
            for o in coalition[phase // 2]:
                plan = others.plans.get(o)
                if plan is None:
                    continue
                ev = plan.events.get(k)
                if ev and ev[0] <= t1 <= ev[1] and plan.at(t1) != u:
                    prec += 1
        return prec, coll

    # node arrays: position, t, phase, parent, c2, c3, moves
    nodes: list[tuple] = []
    best: dict[tuple, tuple] = {}
    heap: list = []

    def push(v, t, phase, parent, c2, c3, moves):
        h = route.remaining(v, t, phase)
        if h is None:
            return
        key = (*heuristic_tuple(t, h, makespan_bound, c2, c3, moves), len(nodes))
        state = (v, t, phase)
        old = best.get(state)
        if old is not None and old[:6] <= key[:6]:
            return
        best[state] = key
        nodes.append((v, t, phase, parent, c2, c3, moves))
        heapq.heappush(heap, (key, len(nodes) - 1))

    push(start, 0, 0, -1, 0, 0, 0)
    expanded = 0
    goal = None
    while heap:
        key, nid = heapq.heappop(heap)
        v, t, phase, _, c2, c3, moves = nodes[nid]
        if best.get((v, t, phase)) != key:
            continue
        expanded += 1
        if deadline is not None and expanded % 512 == 0 and time.monotonic() > deadline:
            ctx.expansions += expanded
            raise SearchTimeout
        if phase == n_events and v == park and t > park_block:
            goal = nid
            break
        if phase < n_events and v == route.vertices[phase] and t in route.windows[phase]:
            push(v, t, phase + 1, nid, c2 + event_conflicts(phase, t), c3, moves)
        if t >= horizon:
            continue
        for u in (v,) + graph.neighbors(v):
            if (u, t + 1) in vcons or (u != v and (v, u, t) in econs):
                continue
            dp, dc = step_conflicts(v, u, t, phase)
            push(u, t + 1, phase, nid, c2 + dp, c3 + dc, moves + (u != v))
    ctx.expansions += expanded
    if goal is None:
        return None
    return _reconstruct(agent, nodes, goal, tasks)


def _reconstruct(agent: str, nodes: list[tuple], goal: int, tasks: list[str]) -> AgentPath:
    chain = []
    nid = goal
    while nid >= 0:
        chain.append(nodes[nid])
        nid = nodes[nid][3]
    chain.reverse()
    positions = [chain[0][0]]
    times: dict[int, int] = {}
    for prev, cur in zip(chain, chain[1:]):
        if cur[1] == prev[1]:
            times[prev[2]] = cur[1]  # event prev.phase happened at this t
        else:
            positions.append(cur[0])
    events = {k: (times[2 * j], times[2 * j + 1]) for j, k in enumerate(tasks)}
    return AgentPath(agent, positions, events)


def occupancy_levels(ctx: PlanContext, agent: str, waypoints: list[Waypoint],
                     constraints: ConstraintSet, bound: int) -> list[set[Vertex]]:
    """Cells the agent can occupy at each t <= bound on some valid itinerary
    that parks by ``bound``, ignoring the other agents."""
    problem, graph = ctx.problem, ctx.graph
    start = problem.agents[agent].start
    park = problem.agents[agent].park
    vcons, econs = constraints.for_agent(agent)
    park_block = max((t for v, t in vcons if v == park), default=-1)
    route = _Route(waypoints, park, ctx.dist, park_block)
    n = route.n

    def ok(v, t, phase):
        h = route.remaining(v, t, phase)
        return h is not None and t + h <= bound

    def closure(v, t, phase):
        out = [phase]
        while phase < n and v == route.vertices[phase] and t in route.windows[phase] \
                and ok(v, t, phase + 1):
            phase += 1
            out.append(phase)
        return out

    if (start, 0) in vcons or not ok(start, 0, 0):
        return []
    layers = [set((start, ph) for ph in closure(start, 0, 0))]
    edges: list[dict] = []
    for t in range(bound):
        nxt: set = set()
        links: dict = defaultdict(set)
        for v, ph in layers[t]:
            for u in (v,) + graph.neighbors(v):
                if (u, t + 1) in vcons or (u != v and (v, u, t) in econs):
                    continue
                if not ok(u, t + 1, ph):
                    continue
                for ph2 in closure(u, t + 1, ph):
                    nxt.add((u, ph2))
                    links[(u, ph2)].add((v, ph))
        layers.append(nxt)
        edges.append(links)
    # keep states that can still finish: parked in the final phase by ``bound``
    alive = [set() for _ in layers]
    arrived = [False] * len(layers)
    for t in range(len(layers) - 1, -1, -1):
        for v, ph in layers[t]:
            if ph == n and v == park and t > park_block:
                alive[t].add((v, ph))
                arrived[t] = True
        if t + 1 < len(layers):
            for s2 in alive[t + 1]:
                alive[t] |= edges[t][s2]
    out = []
    parked_since = False
    for t in range(len(layers)):
        cells = {v for v, _ in alive[t]}
        if parked_since:
            cells.add(park)
        parked_since = parked_since or arrived[t] and (park, n) in alive[t]
        out.append(cells)
    return out


def plan_segment(ctx: PlanContext, start: Vertex, start_time: int, goal: Vertex,
                 vcons: set, econs: set, hold_goal: bool,
                 occupancy: dict | None = None, deadline: float | None = None) -> list[Vertex] | None:
    """Single-waypoint space-time A* ordered by f-value, then collisions with ``occupancy``.

    Returns positions for timesteps start_time..arrival.  With ``hold_goal`` the
    arrival must come after every vertex constraint on ``goal``.
    """
    dist, graph = ctx.dist, ctx.graph
    if (start, start_time) in vcons:
        return None
    block = max((t for v, t in vcons if v == goal), default=-1) if hold_goal else -1
    horizon = start_time + ctx.horizon + max((t for _, t in vcons), default=0)
    occupancy = occupancy or {}
    nodes = [(start, start_time, -1, 0)]
    best = {(start, start_time): 0}
    h0 = max(dist(start, goal), block + 1 - start_time)
    heap = [((start_time + h0, 0, -start_time), 0)]
    expanded = 0
    while heap:
        key, nid = heapq.heappop(heap)
        v, t, _, coll = nodes[nid]
        if best.get((v, t)) != nid:
            continue
        expanded += 1
        if deadline is not None and expanded % 512 == 0 and time.monotonic() > deadline:
            ctx.expansions += expanded
            raise SearchTimeout
        if v == goal and t > block:
            ctx.expansions += expanded
            out = []
            while nid >= 0:
                out.append(nodes[nid][0])
                nid = nodes[nid][2]
            return out[::-1]
        if t >= horizon:
            continue
        for u in (v,) + graph.neighbors(v):
            if (u, t + 1) in vcons or (u != v and (v, u, t) in econs):
                continue
            c = coll + occupancy.get((u, t + 1), 0)
            if u != v:
                c += occupancy.get((u, v, t), 0)
            h = dist(u, goal)
            if h == INF:
                continue
            h = max(h, block + 1 - (t + 1))
            state = (u, t + 1)
            prev = best.get(state)
            k2 = (t + 1 + h, c, -(t + 1))
            if prev is not None and nodes[prev][3] <= c:
                continue
            nodes.append((u, t + 1, nid, c))
            best[state] = len(nodes) - 1
            heapq.heappush(heap, (k2, len(nodes) - 1))
    ctx.expansions += expanded
    return None
