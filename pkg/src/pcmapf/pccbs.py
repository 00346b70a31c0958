"""PC-CBS: conflict-tree search over collision constraints and task intervals."""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

from .gridworld import (DistanceTable, MotionGraph, all_pairs_shortest_paths,
                        is_edge_collision, is_vertex_collision)
from .lowlevel import (ConstraintSet, PlanContext, SearchTimeout, Waypoint,
                       occupancy_levels, plan_agent_path)
from .problem import AgentPath, Problem, Solution
from .taskgraph import (CARRY, GO, INF, EmptyIntervalError, Interval, IntervalTable,
                        TaskGraph, TaskNode, UnreachableError, build_task_graph,
                        completion_estimates, initialize_intervals, search_horizon,
                        update_intervals)


@dataclass
class ConflictTreeNode:
    constraints: ConstraintSet
    intervals: IntervalTable
    solution: dict[str, AgentPath]
    cost: int = 0
    conflicts: int = 0
    branch: tuple = ()  # interval restrictions / constraints that created this node

    @property
    def makespan(self) -> int:
        return max(p.arrival for p in self.solution.values())


@dataclass(frozen=True)
class PrecedenceConflict:
    """A CARRY node whose observed timing is inconsistent with the task graph.

    kind "start": pickups disagree or precede a predecessor's delivery.
    kind "end": coalition deliveries disagree.
    kind "unison": coalition members occupy different cells mid-carry.
    """

    task: TaskNode
    kind: str
    violating_times: dict
    split_timestep: int | None = None
    timestep: int | None = None
    agents: tuple[str, str] | None = None
    cells: tuple | None = None


@dataclass(frozen=True)
class CollisionConflict:
    agents: tuple[str, str]
    location: tuple  # (v,) for vertex conflicts, (u, v) for the first agent's move
    timestep: int

    @property
    def is_edge(self) -> bool:
        return len(self.location) == 2


@dataclass
class SolveResult:
    status: str  # solved | timeout | exhausted | infeasible
    solution: Solution | None = None
    ct_nodes: int = 0
    ll_expansions: int = 0
    runtime_ms: int = 0

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    @property
    def makespan(self) -> int | None:
        return self.solution.makespan if self.solution else None


def replan_priority(agents: list[str], estimates: dict[str, float]) -> list[str]:
    """Longest estimated execution first; ties keep the input (id) order."""
    rank = {a: i for i, a in enumerate(agents)}
    return sorted(agents, key=lambda a: (-estimates[a], rank[a]))


def split_interval(old: Interval, split_timestep: int) -> tuple[Interval, Interval]:
    if split_timestep > old.max_time:
        split_timestep = old.max_time
    return Interval(old.min_time, split_timestep - 1), Interval(split_timestep, old.max_time)


def detect_precedence_conflict(node: ConflictTreeNode, g: TaskGraph) -> PrecedenceConflict | None:
    sol = node.solution
    problem = g.problem
    for i in g.order:
        n = g.nodes[i]
        if n.kind == GO:
            continue  # GO start/end coincide with the agent's own events
        members = problem.tasks[n.task].coalition
        events = {m: sol[m].events[n.task] for m in members}
        pickups = {m: e[0] for m, e in events.items()}
        pred_ends = {}
        for p in g.preds[i]:
            pn = g.nodes[p]
            if pn.kind == GO:
                pred_ends[pn.id] = sol[pn.agent].events[n.task][0]
            else:
                owner = problem.tasks[pn.task].coalition[0]
                pred_ends[pn.id] = sol[owner].events[pn.task][1]
        if len(set(pickups.values())) > 1:
            return PrecedenceConflict(n, "start", pickups, max(pred_ends.values()))
        start = next(iter(pickups.values()))
        late = {k: t for k, t in pred_ends.items() if t > start}
        if late:
            return PrecedenceConflict(n, "start", late, max(pred_ends.values()))
        deliveries = {m: e[1] for m, e in events.items()}
        if len(set(deliveries.values())) > 1:
            return PrecedenceConflict(n, "end", deliveries, max(deliveries.values()))
        end = next(iter(deliveries.values()))
        ref = members[0]
        for t in range(start + 1, end):
            for m in members[1:]:
                if sol[m].at(t) != sol[ref].at(t):
                    return PrecedenceConflict(n, "unison", {ref: t, m: t}, timestep=t,
                                              agents=(ref, m),
                                              cells=(sol[ref].at(t), sol[m].at(t)))
    return None


def _branches(parent: ConflictTreeNode, conflict: PrecedenceConflict) -> list[tuple[list, list]]:
    """Child specs as (interval restrictions, new vertex constraints)."""
    i = conflict.task.index
    if conflict.kind in ("start", "end"):
        which = "start" if conflict.kind == "start" else "end"
        old = getattr(parent.intervals, which)[i]
        lo, hi = split_interval(old, conflict.split_timestep)
        return [([(i, which, lo)], []), ([(i, which, hi)], [])]
    # unison: the carry either starts after t, ends before t, or spans t with
    # both members on one cell (so at least one of them is off its current cell)
    t = conflict.timestep
    a, b = conflict.agents
    va, vb = conflict.cells
    spans = [(i, "start", Interval(0, t)), (i, "end", Interval(t, INF))]
    return [
        ([(i, "start", Interval(t + 1, INF))], []),
        ([(i, "start", Interval(0, t)), (i, "end", Interval(0, t - 1))], []),
        (spans, [(a, va, t)]),
        (spans, [(b, vb, t)]),
    ]


def _restrict(table: IntervalTable, restrictions: list) -> IntervalTable:
    for i, which, iv in restrictions:
        if which == "start":
            table = table.replace(i, start=table.start[i] & iv)
        else:
            table = table.replace(i, end=table.end[i] & iv)
    return table


def resolve_precedence_conflict(parent: ConflictTreeNode, conflict: PrecedenceConflict,
                                g: TaskGraph, planner: "PCCBS | None" = None) -> list[ConflictTreeNode]:
    """Split the conflicting interval; propagate; drop empty or unplannable children.

    Without a ``planner`` the children keep the parent's (stale) solution.
    """
    children = []
    for restrictions, new_cons in _branches(parent, conflict):
        try:
            intervals = update_intervals(g, _restrict(parent.intervals, restrictions))
        except EmptyIntervalError:
            continue
        constraints = parent.constraints
        for a, v, t in new_cons:
            constraints = constraints.with_vertex(a, v, t)
        branch = tuple(restrictions) + tuple(new_cons)
        if planner is None:
            children.append(ConflictTreeNode(constraints, intervals, dict(parent.solution),
                                             parent.cost, branch=branch))
            continue
        child = planner.make_child(parent, intervals, constraints, [a for a, _, _ in new_cons], branch)
        if child is not None:
            children.append(child)
    return children


def _shares_task(a: AgentPath, b: AgentPath, t: int) -> bool:
    return bool(a.active_tasks(t) & b.active_tasks(t))


def collision_conflicts(solution: dict[str, AgentPath], agents: list[str]):
    """Yield collision conflicts in (timestep, vertex-before-edge, pair) order."""
    horizon = max(p.arrival for p in solution.values())
    pairs = list(itertools.combinations(agents, 2))
    for t in range(horizon + 1):
        for a, b in pairs:
            pa, pb = solution[a], solution[b]
            if is_vertex_collision(pa.at(t), pb.at(t), _shares_task(pa, pb, t)):
                yield CollisionConflict((a, b), (pa.at(t),), t)
        if t == horizon:
            break
        for a, b in pairs:
            pa, pb = solution[a], solution[b]
            same = _shares_task(pa, pb, t) and _shares_task(pa, pb, t + 1)
            if is_edge_collision((pa.at(t), pa.at(t + 1)), (pb.at(t), pb.at(t + 1)), same):
                yield CollisionConflict((a, b), (pa.at(t), pa.at(t + 1)), t)


def detect_collision_conflict(node: ConflictTreeNode, problem: Problem) -> CollisionConflict | None:
    return next(collision_conflicts(node.solution, list(problem.agents)), None)


def unavoidable_for(levels: list[set], conflict: CollisionConflict, second: bool) -> bool:
    """True if every itinerary within the node's cost hits the conflict."""
    t = conflict.timestep
    if conflict.is_edge:
        u, v = conflict.location
        if second:
            u, v = v, u
        return t + 1 < len(levels) and levels[t] == {u} and levels[t + 1] == {v}
    return t < len(levels) and levels[t] == {conflict.location[0]}


def resolve_collision_conflict(parent: ConflictTreeNode, conflict: CollisionConflict,
                               planner: "PCCBS") -> list[ConflictTreeNode]:
    a, b = conflict.agents
    t = conflict.timestep
    if conflict.is_edge:
        u, v = conflict.location
        specs = [(a, parent.constraints.with_edge(a, u, v, t)),
                 (b, parent.constraints.with_edge(b, v, u, t))]
    else:
        (v,) = conflict.location
        specs = [(a, parent.constraints.with_vertex(a, v, t)),
                 (b, parent.constraints.with_vertex(b, v, t))]
    children = []
    for agent, constraints in specs:
        child = planner.make_child(parent, parent.intervals, constraints, [agent],
                                   ((agent, conflict.location, t),))
        if child is not None:
            children.append(child)
    return children


def waypoints_for(g: TaskGraph, intervals: IntervalTable, agent: str) -> list[Waypoint]:
    """Event windows: pickup in CARRY.start and GO.end, delivery in CARRY.end and next GO.start."""
    tasks = g.allotments[agent]
    out = []
    for j, k in enumerate(tasks):
        c = g.carry[k]
        pick = intervals.start[c] & intervals.end[g.go[(agent, k)]]
        drop = intervals.end[c]
        if j + 1 < len(tasks):
            drop = drop & intervals.start[g.go[(agent, tasks[j + 1])]]
        task = g.problem.tasks[k]
        out.append(Waypoint(k, task.pickup, pick, task.delivery, drop))
    return out


class PCCBS:
    def __init__(self, problem: Problem, graph: MotionGraph, dist: DistanceTable | None = None,
                 timeout: float | None = None, bypass: bool = True, prioritize: bool = True):
        problem.check(graph.map)
        self.problem = problem
        self.bypass = bypass
        self.prioritize = prioritize
        self.max_classified = 64
        self.graph = graph
        self.dist = dist or all_pairs_shortest_paths(graph)
        self.timeout = timeout
        self.deadline = None
        self.tg: TaskGraph | None = None
        self.ctx = PlanContext(problem, graph, self.dist,
                               search_horizon(problem, len(graph.vertices)))
        self.ct_nodes = 0
        self.popped_costs: list[int] = []

    def count_conflicts(self, solution: dict[str, AgentPath]) -> int:
        node = ConflictTreeNode(ConstraintSet(), None, solution)
        n = 0
        if detect_precedence_conflict(node, self.tg) is not None:
            n += 1
        for _ in collision_conflicts(solution, list(self.problem.agents)):
            n += 1
        return n

    def replan(self, solution: dict[str, AgentPath], order: list[str], intervals: IntervalTable,
               constraints: ConstraintSet, estimates: dict[str, float]) -> dict | None:
        sol = dict(solution)
        for a in order:
            sol.pop(a, None)
        for a in order:
            bound = max([p.arrival for b, p in sol.items()] +
                        [estimates[b] for b in self.problem.agents if b not in sol and b != a],
                        default=0)
            path = plan_agent_path(self.ctx, a, waypoints_for(self.tg, intervals, a),
                                   constraints, sol, bound, self.deadline)
            if path is None:
                return None
            sol[a] = path
        return {a: sol[a] for a in self.problem.agents}

    def make_child(self, parent: ConflictTreeNode, intervals: IntervalTable,
                   constraints: ConstraintSet, extra_agents: list[str],
                   branch: tuple = ()) -> ConflictTreeNode | None:
        affected = set(extra_agents)
        for i in parent.intervals.changed(intervals):
            affected.update(self.tg.owners(i))
        agents = [a for a in self.problem.agents if a in affected]
        estimates = {a: p.arrival for a, p in parent.solution.items()}
        order = replan_priority(agents, estimates)
        sol = self.replan(parent.solution, order, intervals, constraints, estimates)
        if sol is None:
            return None
        self.ct_nodes += 1
        makespan = max(p.arrival for p in sol.values())
        # cost stays a lower bound: a child's valid solutions are a subset of its parent's
        return ConflictTreeNode(constraints, intervals, sol, max(makespan, parent.cost),
                                self.count_conflicts(sol), branch)

    def select_collision_conflict(self, node: ConflictTreeNode) -> CollisionConflict | None:
        """Cardinal before semi-cardinal before other conflicts, earliest first within a class."""
        conflicts = list(itertools.islice(
            collision_conflicts(node.solution, list(self.problem.agents)), self.max_classified))
        if len(conflicts) <= 1 or not self.prioritize:
            return conflicts[0] if conflicts else None
        levels = {}

        def hits(agent, c, second):
            if agent not in levels:
                levels[agent] = occupancy_levels(
                    self.ctx, agent, waypoints_for(self.tg, node.intervals, agent),
                    node.constraints, node.cost)
            return unavoidable_for(levels[agent], c, second)

        best, best_rank = None, -1
        for c in conflicts:
            rank = hits(c.agents[0], c, False) + hits(c.agents[1], c, True)
            if rank > best_rank:
                best, best_rank = c, rank
                if rank == 2:
                    break
        return best

    def root(self) -> ConflictTreeNode | None:
        self.tg = build_task_graph(self.problem, self.dist)
        intervals = initialize_intervals(self.tg)
        estimates = completion_estimates(self.tg, intervals, self.dist)
        order = replan_priority(list(self.problem.agents), estimates)
        sol = self.replan({}, order, intervals, ConstraintSet(), estimates)
        if sol is None:
            return None
        self.ct_nodes += 1
        return ConflictTreeNode(ConstraintSet(), intervals, sol,
                                max(p.arrival for p in sol.values()), self.count_conflicts(sol))

    def solve(self) -> SolveResult:
        t0 = time.monotonic()
        self.deadline = t0 + self.timeout if self.timeout else None
        result = SolveResult("exhausted")
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
                                         runtime_ms=result.runtime_ms, algorithm="pc-cbs")
        return result

    def _search(self) -> SolveResult:
        root = self.root()
        if root is None:
            return SolveResult("exhausted")
        counter = itertools.count()
        open_list = [(root.cost, root.conflicts, next(counter), root)]
        while open_list:
            if self.deadline is not None and time.monotonic() > self.deadline:
                raise SearchTimeout
            _, _, _, node = heapq.heappop(open_list)
            self.popped_costs.append(node.cost)
            conflict = detect_precedence_conflict(node, self.tg)
            if conflict is not None:
                children = resolve_precedence_conflict(node, conflict, self.tg, self)
            else:
                collision = self.select_collision_conflict(node)
                if collision is None:
                    return SolveResult("solved", Solution(dict(node.solution)))
                children = resolve_collision_conflict(node, collision, self)
            bypass = self.bypass and min(
                (c for c in children if c.cost == node.cost and c.conflicts < node.conflicts),
                key=lambda c: c.conflicts, default=None)
            if bypass:
                # same cost, fewer conflicts: the child's plan also satisfies this node
                node.solution, node.conflicts = bypass.solution, bypass.conflicts
                heapq.heappush(open_list, (node.cost, node.conflicts, next(counter), node))
                continue
            for child in children:
                heapq.heappush(open_list, (child.cost, child.conflicts, next(counter), child))
        return SolveResult("exhausted")


def solve(problem: Problem, graph: MotionGraph, timeout: float | None = None,
          dist: DistanceTable | None = None) -> SolveResult:
    return PCCBS(problem, graph, dist, timeout).solve()
