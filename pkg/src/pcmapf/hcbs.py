"""H-CBS baseline: CBS over per-segment plans, ordered by task slack.

Each agent's route is cut into segments GO(a,k), CARRY(k) (shared by the
coalition) and a final PARK(a) leg.  Segments are planned one at a time from
their earliest start, so no segment is ever delayed pre-emptively to help a
later one.  That is the intended source of sub-optimality.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

from .gridworld import DistanceTable, MotionGraph, all_pairs_shortest_paths
from .lowlevel import PlanContext, SearchTimeout, plan_segment
from .pccbs import SolveResult, collision_conflicts
from .problem import AgentPath, Problem, Solution
from .taskgraph import (CARRY, GO, EmptyIntervalError, TaskGraph, UnreachableError,
                        build_task_graph, completion_estimates, initialize_intervals,
                        search_horizon)


@dataclass(frozen=True)
class SlackTable:
    earliest: tuple[int, ...]
    latest: tuple[int, ...]
    park: dict[str, int]  # slack of each agent's final parking leg
    makespan: int

    @property
    def slack(self) -> tuple[int, ...]:
        return tuple(l - e for e, l in zip(self.earliest, self.latest))

    def __getitem__(self, index: int) -> int:
        return self.latest[index] - self.earliest[index]


def compute_slack(g: TaskGraph, dist: DistanceTable) -> SlackTable:
    """Critical-path slack against the collision-free makespan, park legs included."""
    problem = g.problem
    intervals = initialize_intervals(g)
    estimates = completion_estimates(g, intervals, dist)
    makespan = max(estimates.values(), default=0)
    earliest = [iv.min_time for iv in intervals.start]
    last_of = {}
    for a, tasks in problem.allotments.items():
        if tasks:
            last_of.setdefault(g.carry[tasks[-1]], []).append(a)
    latest_end = [makespan] * len(g.nodes)
    latest = [0] * len(g.nodes)
    for i in reversed(g.order):
        n = g.nodes[i]
        bound = makespan
        for a in last_of.get(i, ()):
            bound = min(bound, makespan - dist(n.end, problem.agents[a].park))
        for s in g.succs[i]:
            bound = min(bound, latest[s])
        latest_end[i] = bound
        latest[i] = bound - g.min_cost[i]
    park = {a: makespan - est for a, est in estimates.items()}
    return SlackTable(tuple(earliest), tuple(latest), park, makespan)


@dataclass
class _Node:
    constraints: dict  # segment key -> (frozenset vertex (v,t), frozenset edge (u,v,t))
    paths: dict[str, AgentPath]
    bounds: dict[str, list]  # agent -> [(segment key, start time)]
    cost: int
    conflicts: int = 0


@dataclass
class _Segment:
    key: tuple
    start: tuple[int, int]
    goal: tuple[int, int]
    agents: tuple[str, ...]
    preds: list = field(default_factory=list)
    hold_goal: bool = False


class HCBS:
    def __init__(self, problem: Problem, graph: MotionGraph, dist: DistanceTable | None = None,
                 timeout: float | None = None):
        problem.check(graph.map)
        self.problem = problem
        self.graph = graph
        self.dist = dist or all_pairs_shortest_paths(graph)
        self.timeout = timeout
        self.deadline = None
        self.ctx = PlanContext(problem, graph, self.dist,
                               search_horizon(problem, len(graph.vertices)))
        self.ct_nodes = 0
        self.cache: dict = {}

    def _segments(self, g: TaskGraph, slack: SlackTable) -> tuple[list[_Segment], dict]:
        problem = self.problem
        segs: dict[tuple, _Segment] = {}
        rank = {}
        for pos, i in enumerate(g.order):
            n = g.nodes[i]
            key = ("GO", n.task, n.agent) if n.kind == GO else ("CARRY", n.task)
            agents = (n.agent,) if n.kind == GO else problem.tasks[n.task].coalition
            preds = []
            for p in g.preds[i]:
                pn = g.nodes[p]
                preds.append(("GO", pn.task, pn.agent) if pn.kind == GO else ("CARRY", pn.task))
            segs[key] = _Segment(key, n.start, n.end, agents, preds, hold_goal=n.kind == GO)
            rank[key] = (slack[i], pos)
        for j, (a, agent) in enumerate(problem.agents.items()):
            tasks = problem.allotments[a]
            start = problem.tasks[tasks[-1]].delivery if tasks else agent.start
            key = ("PARK", a)
            segs[key] = _Segment(key, start, agent.park, (a,),
                                 [("CARRY", tasks[-1])] if tasks else [], hold_goal=True)
            rank[key] = (slack.park[a], len(g.order) + j)
        return list(segs.values()), rank

    def _plan_one(self, seg: _Segment, start_time: int, cons, occupancy) -> list | None:
        vcons, econs = cons
        cache_key = (seg.key, start_time, vcons, econs)
        if cache_key not in self.cache:
            self.cache[cache_key] = plan_segment(self.ctx, seg.start, start_time, seg.goal,
                                                 vcons, econs, seg.hold_goal, occupancy,
                                                 self.deadline)
        return self.cache[cache_key]

    def isps(self, constraints: dict) -> tuple[dict, dict] | None:
        """Plan every segment from its earliest start, lowest slack first."""
        segs, rank = self.segs, self.rank
        by_key = {s.key: s for s in segs}
        done: dict[tuple, tuple[int, list]] = {}  # key -> (start time, positions)
        occupancy: dict = {}
        empty = (frozenset(), frozenset())
        while len(done) < len(segs):
            ready = [s for s in segs if s.key not in done and all(p in done for p in s.preds)]
            seg = min(ready, key=lambda s: rank[s.key])
            start_time = max((done[p][0] + len(done[p][1]) - 1 for p in seg.preds), default=0)
            path = self._plan_one(seg, start_time, constraints.get(seg.key, empty), occupancy)
            if path is None:
                return None
            done[seg.key] = (start_time, path)
            for dt, v in enumerate(path):
                occupancy[(v, start_time + dt)] = occupancy.get((v, start_time + dt), 0) + 1
                if dt:
                    u = path[dt - 1]
                    occupancy[(u, v, start_time + dt - 1)] = occupancy.get((u, v, start_time + dt - 1), 0) + 1
        return self._assemble(by_key, done)

    def _assemble(self, by_key: dict, done: dict) -> tuple[dict, dict]:
        paths, bounds = {}, {}
        for a, agent in self.problem.agents.items():
            keys = []
            for k in self.problem.allotments[a]:
                keys += [("GO", k, a), ("CARRY", k)]
            keys.append(("PARK", a))
            positions = [agent.start]
            events = {}
            bnd = []
            for key in keys:
                t0, seg_path = done[key]
                while len(positions) - 1 < t0:  # GO tails wait at the pickup
                    positions.append(positions[-1])
                bnd.append((key, t0))
                positions.extend(seg_path[1:])
                if key[0] == "CARRY":
                    events[key[1]] = (t0, t0 + len(seg_path) - 1)
            paths[a] = AgentPath(a, positions, events)
            bounds[a] = bnd
        return paths, bounds

    @staticmethod
    def _segment_at(bounds: list, t: int) -> tuple:
        """Segment owning timestep t: the one covering (start, next start]."""
        owner = bounds[0][0]
        for key, start in bounds:
            if start < t:
                owner = key
        return owner

    def _child(self, parent: _Node, key: tuple, vertex=None, edge=None) -> _Node | None:
        vcons, econs = parent.constraints.get(key, (frozenset(), frozenset()))
        if vertex is not None:
            vcons = vcons | {vertex}
        if edge is not None:
            econs = econs | {edge}
        constraints = dict(parent.constraints)
        constraints[key] = (vcons, econs)
        planned = self.isps(constraints)
        if planned is None:
            return None
        return self._node(constraints, *planned)

    def _node(self, constraints, paths, bounds) -> _Node:
        self.ct_nodes += 1
        conflicts = sum(1 for _ in collision_conflicts(paths, list(self.problem.agents)))
        return _Node(constraints, paths, bounds, max(p.arrival for p in paths.values()), conflicts)

    def solve(self) -> SolveResult:
        t0 = time.monotonic()
        self.deadline = t0 + self.timeout if self.timeout else None
        try:
            result = self._search()
        except SearchTimeout:
            result = SolveResult("timeout")
        except (UnreachableError, EmptyIntervalError):
            result = SolveResult("infeasible")
        result.ct_nodes = self.ct_nodes
        result.ll_expansions = self.ctx.expansions
        result.runtime_ms = int((time.monotonic() - t0) * 1000)
        if result.solution is not None:
            result.solution.stats.update(ct_nodes=result.ct_nodes,
                                         ll_expansions=result.ll_expansions,
                                         runtime_ms=result.runtime_ms, algorithm="h-cbs")
        return result

    def _search(self) -> SolveResult:
        g = build_task_graph(self.problem, self.dist)
        self.segs, self.rank = self._segments(g, compute_slack(g, self.dist))
        planned = self.isps({})
        if planned is None:
            return SolveResult("exhausted")
        root = self._node({}, *planned)
        counter = itertools.count()
        open_list = [(root.cost, root.conflicts, next(counter), root)]
        agents = list(self.problem.agents)
        while open_list:
            if self.deadline is not None and time.monotonic() > self.deadline:
                raise SearchTimeout
            _, _, _, node = heapq.heappop(open_list)
            conflict = next(collision_conflicts(node.paths, agents), None)
            if conflict is None:
                return SolveResult("solved", Solution(dict(node.paths)))
            t = conflict.timestep
            children = []
            for j, a in enumerate(conflict.agents):
                if conflict.is_edge:
                    u, v = conflict.location
                    if j:
                        u, v = v, u
                    key = self._segment_at(node.bounds[a], t + 1)
                    child = self._child(node, key, edge=(u, v, t))
                else:
                    key = self._segment_at(node.bounds[a], t)
                    child = self._child(node, key, vertex=(conflict.location[0], t))
                if child is not None:
                    children.append(child)
            for child in children:
                heapq.heappush(open_list, (child.cost, child.conflicts, next(counter), child))
        return SolveResult("exhausted")


def solve_hcbs(problem: Problem, graph: MotionGraph, timeout: float | None = None,
               dist: DistanceTable | None = None) -> SolveResult:
    return HCBS(problem, graph, dist, timeout).solve()
