"""PC-MAPF problem description and the problem/solution text formats."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .gridworld import GridMap, Vertex


class ProblemFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass(frozen=True)
class Agent:
    id: str
    start: Vertex
    park: Vertex


@dataclass(frozen=True)
class Task:
    id: str
    coalition: tuple[str, ...]
    pickup: Vertex
    delivery: Vertex

    def __post_init__(self):
        if not self.coalition:
            raise ValueError(f"task {self.id} has an empty coalition")
        if self.pickup == self.delivery:
            raise ValueError(f"task {self.id} picks up and delivers at the same cell")


@dataclass
class Problem:
    """Agents, tasks, ordered per-agent allotments and explicit task edges.

    Dict insertion order is the canonical agent/task order used for all
    deterministic tie-breaks.
    """

    agents: dict[str, Agent]
    tasks: dict[str, Task]
    allotments: dict[str, tuple[str, ...]]
    edges: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        for a in self.agents:
            self.allotments.setdefault(a, ())
        self.check()

    def check(self, grid: GridMap | None = None) -> None:
        for a, tasks in self.allotments.items():
            if a not in self.agents:
                raise ValueError(f"allotment for unknown agent {a}")
            if len(set(tasks)) != len(tasks):
                raise ValueError(f"agent {a} is allotted the same task twice")
            for t in tasks:
                if t not in self.tasks:
                    raise ValueError(f"agent {a} is allotted unknown task {t}")
                if a not in self.tasks[t].coalition:
                    raise ValueError(f"agent {a} is allotted task {t} but is not in its coalition")
        for t, task in self.tasks.items():
            for a in task.coalition:
                if a not in self.agents:
                    raise ValueError(f"task {t} names unknown agent {a}")
                if t not in self.allotments[a]:
                    raise ValueError(f"coalition member {a} has no allotment entry for task {t}")
        for u, v in self.edges:
            if u not in self.tasks or v not in self.tasks:
                raise ValueError(f"edge {u}->{v} references an unknown task")
        starts = [ag.start for ag in self.agents.values()]
        parks = [ag.park for ag in self.agents.values()]
        if len(set(starts)) != len(starts):
            raise ValueError("agent start cells must be distinct")
        if len(set(parks)) != len(parks):
            raise ValueError("agent parking cells must be distinct")
        if grid is not None:
            cells = starts + parks
            for task in self.tasks.values():
                cells += [task.pickup, task.delivery]
            for v in cells:
                if not grid.is_free(v):
                    raise ValueError(f"cell {v} is not a free cell of the map")

    @property
    def agent_ids(self) -> list[str]:
        return list(self.agents)

    def coalition_degree(self) -> int:
        return max((len(t.coalition) for t in self.tasks.values()), default=1)


_COMMENT = re.compile(r"#.*")


def _int_pair(tokens: list[str], i: int, lineno: int) -> Vertex:
    try:
        return int(tokens[i]), int(tokens[i + 1])
    except (IndexError, ValueError):
        raise ProblemFormatError(lineno, "expected two integer coordinates") from None


def parse_problem(text: str) -> Problem:
    agents: dict[str, Agent] = {}
    tasks: dict[str, Task] = {}
    allot: dict[str, tuple[str, ...]] = {}
    edges: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        tok = _COMMENT.sub("", raw).split()
        if not tok:
            continue
        kind = tok[0]
        if kind == "agent":
            if len(tok) != 8 or tok[2] != "start" or tok[5] != "park":
                raise ProblemFormatError(lineno, "expected 'agent <id> start <r> <c> park <r> <c>'")
            if tok[1] in agents:
                raise ProblemFormatError(lineno, f"duplicate agent {tok[1]}")
            agents[tok[1]] = Agent(tok[1], _int_pair(tok, 3, lineno), _int_pair(tok, 6, lineno))
        elif kind == "task":
            if len(tok) < 10 or tok[2] != "pickup" or tok[5] != "deliver" or tok[8] != "coalition":
                raise ProblemFormatError(
                    lineno, "expected 'task <id> pickup <r> <c> deliver <r> <c> coalition <id>...'")
            if tok[1] in tasks:
                raise ProblemFormatError(lineno, f"duplicate task {tok[1]}")
            try:
                tasks[tok[1]] = Task(tok[1], tuple(tok[9:]), _int_pair(tok, 3, lineno),
                                     _int_pair(tok, 6, lineno))
            except ValueError as exc:
                raise ProblemFormatError(lineno, str(exc)) from None
        elif kind == "edge":
            if len(tok) != 3:
                raise ProblemFormatError(lineno, "expected 'edge <taskA> <taskB>'")
            edges.append((tok[1], tok[2]))
        elif kind == "allot":
            if len(tok) < 2:
                raise ProblemFormatError(lineno, "expected 'allot <agent> <task>...'")
            if tok[1] in allot:
                raise ProblemFormatError(lineno, f"second allot line for agent {tok[1]}")
            allot[tok[1]] = tuple(tok[2:])
        else:
            raise ProblemFormatError(lineno, f"unknown record {kind!r}")
    try:
        return Problem(agents, tasks, allot, edges)
    except ValueError as exc:
        raise ProblemFormatError(0, str(exc)) from None


def format_problem(problem: Problem) -> str:
    out = []
    for a in problem.agents.values():
        out.append(f"agent {a.id} start {a.start[0]} {a.start[1]} park {a.park[0]} {a.park[1]}")
    for t in problem.tasks.values():
        out.append(f"task {t.id} pickup {t.pickup[0]} {t.pickup[1]} "
                   f"deliver {t.delivery[0]} {t.delivery[1]} coalition {' '.join(t.coalition)}")
    for u, v in problem.edges:
        out.append(f"edge {u} {v}")
    for a, tasks in problem.allotments.items():
        out.append(" ".join(["allot", a, *tasks]))
    return "\n".join(out) + "\n"


@dataclass
class AgentPath:
    """Positions from t=0 until the agent's final arrival at its parking cell.

    ``events`` maps each allotted task to its (pickup, delivery) timesteps.
    After the last position the agent stays parked forever.
    """

    agent: str
    positions: list[Vertex]
    events: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def arrival(self) -> int:
        return len(self.positions) - 1

    def at(self, t: int) -> Vertex:
        return self.positions[t] if t < len(self.positions) else self.positions[-1]

    def active_tasks(self, t: int) -> set[str]:
        return {k for k, (p, d) in self.events.items() if p <= t <= d}


@dataclass
class Solution:
    paths: dict[str, AgentPath]
    stats: dict[str, int | str] = field(default_factory=dict)

    @property
    def makespan(self) -> int:
        return max((p.arrival for p in self.paths.values()), default=0)


_POS = re.compile(r"^\((-?\d+),(-?\d+)\)@(\d+)$")


def format_solution(solution: Solution, problem: Problem, runtime: bool = True) -> str:
    out = [f"makespan {solution.makespan}"]
    for a in problem.agents:
        path = solution.paths[a]
        cells = " ".join(f"({r},{c})@{t}" for t, (r, c) in enumerate(path.positions))
        out.append(f"path {a} {cells}")
    for k, task in problem.tasks.items():
        p, d = solution.paths[task.coalition[0]].events[k]
        out.append(f"event {k} pickup {p} deliver {d}")
    for key in ("ct_nodes", "ll_expansions", "runtime_ms", "algorithm"):
        if key in solution.stats and (runtime or key != "runtime_ms"):
            out.append(f"{key} {solution.stats[key]}")
    return "\n".join(out) + "\n"


def parse_solution(text: str, problem: Problem) -> Solution:
    positions: dict[str, list[Vertex]] = {}
    task_events: dict[str, tuple[int, int]] = {}
    stats: dict[str, int | str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        tok = raw.split()
        if not tok:
            continue
        if tok[0] == "makespan":
            continue
        if tok[0] == "path":
            cells = []
            for t, item in enumerate(tok[2:]):
                m = _POS.match(item)
                if not m or int(m.group(3)) != t:
                    raise ProblemFormatError(lineno, f"bad path entry {item!r}")
                cells.append((int(m.group(1)), int(m.group(2))))
            if not cells:
                raise ProblemFormatError(lineno, "empty path")
            positions[tok[1]] = cells
        elif tok[0] == "event":
            if len(tok) != 6 or tok[2] != "pickup" or tok[4] != "deliver":
                raise ProblemFormatError(lineno, "expected 'event <task> pickup <t> deliver <t>'")
            task_events[tok[1]] = (int(tok[3]), int(tok[5]))
        elif tok[0] in ("ct_nodes", "ll_expansions", "runtime_ms"):
            stats[tok[0]] = int(tok[1])
        elif tok[0] == "algorithm":
            stats[tok[0]] = tok[1]
        else:
            raise ProblemFormatError(lineno, f"unknown record {tok[0]!r}")
    paths = {}
    for a in problem.agents:
        if a not in positions:
            raise ProblemFormatError(0, f"no path for agent {a}")
        events = {k: task_events[k] for k in problem.allotments[a] if k in task_events}
        paths[a] = AgentPath(a, positions[a], events)
    return Solution(paths, stats)
