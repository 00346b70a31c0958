"""Independent plan validator and brute-force joint-state optimality oracle.

Neither function touches solver data structures; they only use the problem
description and the collision predicates of :mod:`pcmapf.gridworld`.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .gridworld import (DistanceTable, MotionGraph, all_pairs_shortest_paths,
                        is_edge_collision, is_vertex_collision)
from .problem import AgentPath, Problem, Solution

KINDS = ("vertex-collision", "edge-collision", "precedence", "coalition-desync",
         "interval", "parking", "discontinuity")


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    timestep: int


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def add(self, kind: str, detail: str, t: int) -> None:
        self.violations.append(Violation(kind, detail, t))

    def __str__(self):
        if self.ok:
            return "ok"
        return "\n".join(f"{v.kind} t={v.timestep}: {v.detail}" for v in self.violations)


def shares_task(a: AgentPath, b: AgentPath, t: int) -> bool:
    """Both agents are inside the carry window of one common task at t."""
    return bool(a.active_tasks(t) & b.active_tasks(t))


def validate_solution(problem: Problem, graph: MotionGraph, solution: Solution) -> ValidationReport:
    report = ValidationReport()
    paths = solution.paths
    for a, agent in problem.agents.items():
        path = paths.get(a)
        if path is None or not path.positions:
            report.add("discontinuity", f"agent {a} has no path", 0)
            continue
        pos = path.positions
        if pos[0] != agent.start:
            report.add("discontinuity", f"agent {a} starts at {pos[0]}, not {agent.start}", 0)
        for t, v in enumerate(pos):
            if v not in graph:
                report.add("discontinuity", f"agent {a} at non-free cell {v}", t)
            elif t and pos[t - 1] in graph and v != pos[t - 1] and v not in graph.neighbors(pos[t - 1]):
                report.add("discontinuity", f"agent {a} jumps {pos[t - 1]}->{v}", t - 1)
        if pos[-1] != agent.park:
            report.add("parking", f"agent {a} ends at {pos[-1]}, not {agent.park}", path.arrival)
        prev_delivery = 0
        for k in problem.allotments[a]:
            task = problem.tasks[k]
            if k not in path.events:
                report.add("interval", f"agent {a} has no event for task {k}", path.arrival)
                continue
            p, d = path.events[k]
            if not 0 <= p < d <= path.arrival:
                report.add("interval", f"agent {a} task {k} events ({p},{d}) out of order/range", p)
                continue
            if path.at(p) != task.pickup:
                report.add("interval", f"agent {a} not at pickup of {k} at t={p}", p)
            if path.at(d) != task.delivery:
                report.add("interval", f"agent {a} not at delivery of {k} at t={d}", d)
            if p < prev_delivery:
                report.add("interval", f"agent {a} picks up {k} before finishing its previous task", p)
            prev_delivery = d

    if not report.ok:
        return report

    for k, task in problem.tasks.items():
        members = task.coalition
        ref = paths[members[0]]
        p, d = ref.events[k]
        for m in members[1:]:
            if paths[m].events[k] != (p, d):
                report.add("coalition-desync",
                           f"task {k}: {members[0]} events {(p, d)} vs {m} {paths[m].events[k]}",
                           min(p, paths[m].events[k][0]))
                continue
            for t in range(p, d + 1):
                if paths[m].at(t) != ref.at(t):
                    report.add("coalition-desync", f"task {k}: {m} apart from {members[0]}", t)
                    break
    for u, v in problem.edges:
        du = paths[problem.tasks[u].coalition[0]].events[u][1]
        pv = paths[problem.tasks[v].coalition[0]].events[v][0]
        if du > pv:
            report.add("precedence", f"{u} delivered at {du} after {v} picked up at {pv}", pv)

    horizon = max(p.arrival for p in paths.values())
    agents = list(problem.agents)
    for t in range(horizon + 1):
        for a, b in itertools.combinations(agents, 2):
            pa, pb = paths[a], paths[b]
            if is_vertex_collision(pa.at(t), pb.at(t), shares_task(pa, pb, t)):
                report.add("vertex-collision", f"{a} and {b} at {pa.at(t)}", t)
            if t < horizon:
                same = shares_task(pa, pb, t) and shares_task(pa, pb, t + 1)
                if is_edge_collision((pa.at(t), pa.at(t + 1)), (pb.at(t), pb.at(t + 1)), same):
                    report.add("edge-collision", f"{a} and {b} swap {pa.at(t)}<->{pa.at(t + 1)}", t)
    return report


class OracleBudgetExceeded(RuntimeError):
    pass


@dataclass
class OracleResult:
    makespan: int | None  # None means infeasible
    expansions: int
    solution: Solution | None = None


class _Joint:
    """Static per-problem data for the joint-state search."""

    def __init__(self, problem: Problem, graph: MotionGraph, dist: DistanceTable):
        self.problem = problem
        self.graph = graph
        self.dist = dist
        self.agents = list(problem.agents)
        self.n = len(self.agents)
        self.tasks = [problem.allotments[a] for a in self.agents]
        self.K = [len(t) for t in self.tasks]
        self.park = [problem.agents[a].park for a in self.agents]
        # per task: (member index, task position in that member's allotment)
        self.members = {k: [(i, self.tasks[i].index(k)) for i in range(self.n) if k in self.tasks[i]]
                        for k in problem.tasks}
        self.preds = {k: [u for u, v in problem.edges if v == k] for k in problem.tasks}
        self.rest = []
        for i in range(self.n):
            verts = []
            for k in self.tasks[i]:
                verts += [problem.tasks[k].pickup, problem.tasks[k].delivery]
            verts.append(self.park[i])
            rest = [0] * len(verts)
            for e in range(len(verts) - 2, -1, -1):
                rest[e] = rest[e + 1] + dist(verts[e], verts[e + 1])
            self.rest.append((verts, rest))

    def h(self, pos, ph) -> int:
        best = 0
        for i in range(self.n):
            verts, rest = self.rest[i]
            val = self.dist(pos[i], verts[ph[i]]) + rest[ph[i]]
            if val > best:
                best = val
        return best

    def carrying(self, i, phase):
        return self.tasks[i][phase // 2] if phase % 2 == 1 else None

    def delivered(self, k, ph) -> bool:
        i, j = self.members[k][0]
        return ph[i] >= 2 * j + 2

    def event_closures(self, pos, ph):
        """All post-event phase tuples reachable at this timestep."""
        problem = self.problem
        deliverable = []
        for k, mem in self.members.items():
            i, j = mem[0]
            if ph[i] == 2 * j + 1 and pos[i] == problem.tasks[k].delivery:
                deliverable.append(k)
        for choice in itertools.product((False, True), repeat=len(deliverable)):
            mid = list(ph)
            for k, do in zip(deliverable, choice):
                if do:
                    for i, j in self.members[k]:
                        mid[i] += 1
            pickable = []
            for k, mem in self.members.items():
                pick = problem.tasks[k].pickup
                if all(mid[i] == 2 * j and pos[i] == pick for i, j in mem) and \
                        all(self.delivered(u, mid) for u in self.preds[k]):
                    pickable.append(k)
            for choice2 in itertools.product((False, True), repeat=len(pickable)):
                out = list(mid)
                for k, do in zip(pickable, choice2):
                    if do:
                        for i, j in self.members[k]:
                            out[i] += 1
                yield tuple(out)

    def vertex_ok(self, pos, pre, post) -> bool:
        seen = {}
        for i, v in enumerate(pos):
            seen.setdefault(v, []).append(i)
        for group in seen.values():
            for a, b in itertools.combinations(group, 2):
                act_a = {self.carrying(a, pre[a]), self.carrying(a, post[a])} - {None}
                act_b = {self.carrying(b, pre[b]), self.carrying(b, post[b])} - {None}
                if is_vertex_collision(pos[a], pos[b], bool(act_a & act_b)):
                    return False
        return True

    def moves(self, pos, ph):
        """Joint position tuples for the next timestep; carrying coalitions move as one."""
        units: list[list[int]] = []
        by_task = {}
        for i in range(self.n):
            k = self.carrying(i, ph[i])
            if k is None:
                units.append([i])
            elif k in by_task:
                by_task[k].append(i)
            else:
                by_task[k] = [i]
                units.append(by_task[k])
        new = list(pos)
        taken: dict = {}

        def goal_of(i):
            return self.problem.tasks[self.tasks[i][ph[i] // 2]].pickup if ph[i] % 2 == 0 \
                and ph[i] < 2 * self.K[i] else None

        def rec(u):
            if u == len(units):
                yield tuple(new)
                return
            unit = units[u]
            here = pos[unit[0]]
            for nxt in (here,) + self.graph.neighbors(here):
                clash = False
                for w in range(u):
                    other = units[w]
                    if is_edge_collision((here, nxt), (pos[other[0]], new[other[0]]), False):
                        clash = True
                        break
                    if new[other[0]] == nxt:
                        # co-location is only legal as a joint pickup
                        if len(unit) > 1 or len(other) > 1:
                            clash = True
                            break
                        k_a = self.tasks[unit[0]][ph[unit[0]] // 2] if goal_of(unit[0]) else None
                        k_b = self.tasks[other[0]][ph[other[0]] // 2] if goal_of(other[0]) else None
                        if k_a is None or k_a != k_b or nxt != goal_of(unit[0]):
                            clash = True
                            break
                if clash:
                    continue
                for i in unit:
                    new[i] = nxt
                yield from rec(u + 1)
            for i in unit:
                new[i] = pos[i]

        yield from rec(0)


def oracle_makespan(problem: Problem, graph: MotionGraph, budget: int = 10 ** 7,
                    dist: DistanceTable | None = None, with_solution: bool = False) -> OracleResult:
    """Exact minimum makespan by A* over joint (positions, task progress) states.

    The heuristic is the largest single-agent remaining distance, which is
    consistent, so the first goal popped is optimal.  Raises
    OracleBudgetExceeded after ``budget`` expansions.
    """
    dist = dist or all_pairs_shortest_paths(graph)
    J = _Joint(problem, graph, dist)
    starts = tuple(problem.agents[a].start for a in J.agents)
    zero = tuple(0 for _ in J.agents)
    heap = []
    g_best: dict = {}
    parent: dict = {}
    counter = itertools.count()
    for ph in J.event_closures(starts, zero):
        if J.vertex_ok(starts, zero, ph):
            state = (starts, ph)
            g_best[state] = 0
            parent[state] = None
            heapq.heappush(heap, (J.h(starts, ph), 0, next(counter), state))
    done = tuple(2 * k for k in J.K)
    park = tuple(J.park)
    closed = set()
    expansions = 0
    while heap:
        f, g, _, state = heapq.heappop(heap)
        if state in closed:
            continue
        closed.add(state)
        pos, ph = state
        if ph == done and pos == park:
            sol = _reconstruct(J, state, parent) if with_solution else None
            return OracleResult(g, expansions, sol)
        expansions += 1
        if expansions > budget:
            raise OracleBudgetExceeded(f"more than {budget} joint states expanded")
        for npos in J.moves(pos, ph):
            for nph in J.event_closures(npos, ph):
                if not J.vertex_ok(npos, ph, nph):
                    continue
                nstate = (npos, nph)
                if nstate in closed or g_best.get(nstate, g + 2) <= g + 1:
                    continue
                g_best[nstate] = g + 1
                parent[nstate] = state
                heapq.heappush(heap, (g + 1 + J.h(npos, nph), g + 1, next(counter), nstate))
    return OracleResult(None, expansions)


def _reconstruct(J: _Joint, state, parent) -> Solution:
    chain = []
    while state is not None:
        chain.append(state)
        state = parent[state]
    chain.reverse()
    paths = {}
    for i, a in enumerate(J.agents):
        positions = [s[0][i] for s in chain]
        times = {}
        prev = 0
        for t, (_, ph) in enumerate(chain):
            for e in range(prev, ph[i]):
                times[e] = t
            prev = ph[i]
        events = {k: (times[2 * j], times[2 * j + 1]) for j, k in enumerate(J.tasks[i])}
        last_event = max((d for _, d in events.values()), default=0)
        end = len(positions) - 1
        while end > last_event and positions[end - 1] == positions[end]:
            end -= 1
        paths[a] = AgentPath(a, positions[:end + 1], events)
    return Solution(paths, {"algorithm": "oracle"})
