"""Task graph of GO/CARRY nodes, valid time intervals and their propagation."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .gridworld import DistanceTable, Vertex
from .problem import Problem

GO = "GO"
CARRY = "CARRY"
INF = math.inf


class CycleError(ValueError):
    pass


class EmptyIntervalError(ValueError):
    """Raised when propagation leaves some interval with min > max."""


class UnreachableError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    min_time: float = 0
    max_time: float = INF

    @property
    def empty(self) -> bool:
        return self.min_time > self.max_time

    def __contains__(self, t) -> bool:
        return self.min_time <= t <= self.max_time

    def __and__(self, other: "Interval") -> "Interval":
        return Interval(max(self.min_time, other.min_time), min(self.max_time, other.max_time))

    def __str__(self):
        hi = "inf" if self.max_time == INF else str(self.max_time)
        return f"[{self.min_time},{hi}]"


@dataclass(frozen=True)
class TaskNode:
    index: int
    kind: str
    task: str
    agent: str | None  # None for CARRY nodes
    start: Vertex
    end: Vertex

    @property
    def id(self) -> str:
        return f"{self.kind}:{self.task}" if self.kind == CARRY else f"GO:{self.task}:{self.agent}"


class TaskGraph:
    def __init__(self, problem: Problem, nodes: list[TaskNode], edges: list[tuple[int, int]],
                 min_cost: list[int]):
        self.problem = problem
        self.nodes = nodes
        self.edges = edges
        self.min_cost = min_cost
        self.preds: list[list[int]] = [[] for _ in nodes]
        self.succs: list[list[int]] = [[] for _ in nodes]
        for u, v in edges:
            self.preds[v].append(u)
            self.succs[u].append(v)
        self.carry = {n.task: n.index for n in nodes if n.kind == CARRY}
        self.go = {(n.agent, n.task): n.index for n in nodes if n.kind == GO}
        self.order = topological_sort(self)

    @property
    def allotments(self) -> dict[str, tuple[str, ...]]:
        return self.problem.allotments

    def node(self, node_id: str) -> TaskNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def owners(self, index: int) -> tuple[str, ...]:
        n = self.nodes[index]
        if n.kind == GO:
            return (n.agent,)
        return self.problem.tasks[n.task].coalition


def build_task_graph(problem: Problem, dist: DistanceTable) -> TaskGraph:
    """GO nodes per agent per allotted task, one CARRY per task, edges between them.

    Explicit ``problem.edges`` connect CARRY(a) -> CARRY(b).
    """
    for k, task in problem.tasks.items():
        if not any(k in problem.allotments[a] for a in task.coalition):
            raise ValueError(f"task {k} is allotted to no agent")
    nodes: list[TaskNode] = []
    carry = {}
    for k, task in problem.tasks.items():
        carry[k] = len(nodes)
        nodes.append(TaskNode(len(nodes), CARRY, k, None, task.pickup, task.delivery))
    edges = []
    for a, tasks in problem.allotments.items():
        loc = problem.agents[a].start
        prev = None
        for k in tasks:
            task = problem.tasks[k]
            go = TaskNode(len(nodes), GO, k, a, loc, task.pickup)
            nodes.append(go)
            if prev is not None:
                edges.append((carry[prev], go.index))
            edges.append((go.index, carry[k]))
            loc, prev = task.delivery, k
    for u, v in problem.edges:
        edges.append((carry[u], carry[v]))
    min_cost = []
    for n in nodes:
        d = dist(n.start, n.end)
        if d == INF:
            raise UnreachableError(f"{n.id}: {n.end} is unreachable from {n.start}")
        min_cost.append(d)
    return TaskGraph(problem, nodes, sorted(set(edges)), min_cost)


def topological_sort(g: TaskGraph) -> list[int]:
    """Kahn's algorithm; ready nodes are released in index order."""
    indeg = [len(p) for p in g.preds]
    ready = [i for i, d in enumerate(indeg) if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for v in g.succs[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, v)
    if len(order) != len(g.nodes):
        raise CycleError("task graph contains a cycle")
    return order


@dataclass(frozen=True)
class IntervalTable:
    start: tuple[Interval, ...]
    end: tuple[Interval, ...]

    def replace(self, index: int, start: Interval | None = None,
                end: Interval | None = None) -> "IntervalTable":
        s, e = list(self.start), list(self.end)
        if start is not None:
            s[index] = start
        if end is not None:
            e[index] = end
        return IntervalTable(tuple(s), tuple(e))

    def changed(self, other: "IntervalTable") -> list[int]:
        return [i for i in range(len(self.start))
                if self.start[i] != other.start[i] or self.end[i] != other.end[i]]

    @property
    def feasible(self) -> bool:
        return not any(iv.empty for iv in self.start + self.end)


def _sweep(g: TaskGraph, smin, smax, emin, emax) -> None:
    for i in g.order:
        for p in g.preds[i]:
            if emin[p] > smin[i]:
                smin[i] = emin[p]
        if smin[i] + g.min_cost[i] > emin[i]:
            emin[i] = smin[i] + g.min_cost[i]
    for i in reversed(g.order):
        for s in g.succs[i]:
            if smax[s] < emax[i]:
                emax[i] = smax[s]
        if emax[i] - g.min_cost[i] < smax[i]:
            smax[i] = emax[i] - g.min_cost[i]


def update_intervals(g: TaskGraph, table: IntervalTable) -> IntervalTable:
    """Forward min-time pass in topological order, then backward max-time pass.

    Returns a new table; raises EmptyIntervalError if an interval empties.
    """
    smin = [iv.min_time for iv in table.start]
    smax = [iv.max_time for iv in table.start]
    emin = [iv.min_time for iv in table.end]
    emax = [iv.max_time for iv in table.end]
    for _ in range(4):
        before = (smin[:], smax[:], emin[:], emax[:])
        _sweep(g, smin, smax, emin, emax)
        if before == (smin, smax, emin, emax):
            break
    else:  # pragma: no cover - a single sweep pair is already a fixpoint
        raise RuntimeError("interval propagation did not converge")
    out = IntervalTable(tuple(Interval(a, b) for a, b in zip(smin, smax)),
                        tuple(Interval(a, b) for a, b in zip(emin, emax)))
    if not out.feasible:
        raise EmptyIntervalError("propagation produced an empty interval")
    return out


def initialize_intervals(g: TaskGraph) -> IntervalTable:
    n = len(g.nodes)
    blank = IntervalTable((Interval(),) * n, (Interval(),) * n)
    return update_intervals(g, blank)


def completion_estimates(g: TaskGraph, intervals: IntervalTable,
                         dist: DistanceTable) -> dict[str, int]:
    """Earliest collision-free parking arrival per agent."""
    problem = g.problem
    out = {}
    for a, agent in problem.agents.items():
        tasks = problem.allotments[a]
        if tasks:
            last = g.carry[tasks[-1]]
            out[a] = intervals.end[last].min_time + dist(problem.tasks[tasks[-1]].delivery, agent.park)
        else:
            out[a] = dist(agent.start, agent.park)
    return out


def search_horizon(problem: Problem, g_vertices: int) -> int:
    """Timestep bound H; every finite timestep of an accepted solution is below it."""
    return g_vertices * (len(problem.tasks) + 1) * (problem.coalition_degree() + 1)
