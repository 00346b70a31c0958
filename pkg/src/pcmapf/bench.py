"""Random instance generation, greedy task assignment and benchmark metrics."""
from __future__ import annotations

import csv
import random
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .gridworld import (GridMap, MotionGraph, Vertex, all_pairs_shortest_paths,
                        format_map, motion_graph, parse_map)
from .hcbs import solve_hcbs
from .pccbs import solve
from .problem import Agent, Problem, Task, format_problem, parse_problem
from .taskgraph import build_task_graph
from .verify import validate_solution

ASSEMBLY = "assembly"
CMAPD = "cmapd"
SOLVERS = {"pc-cbs": solve, "h-cbs": solve_hcbs}


class GenerationError(ValueError):
    pass


class BenchmarkValidationError(RuntimeError):
    """A solver returned a plan the validator rejects."""


@dataclass
class GeneratorConfig:
    map: GridMap
    agent_count: int = 2
    mean_tasks: int = 2
    coalition_degree: int = 1
    explicit_edge_probability: float = 0.3
    seed: int = 0
    mode: str = ASSEMBLY

    def __post_init__(self):
        if not self.agent_count >= self.coalition_degree >= 1:
            raise ValueError("need agent_count >= coalition_degree >= 1")
        if self.mean_tasks < 1:
            raise ValueError("mean_tasks must be at least 1")
        if self.mode not in (ASSEMBLY, CMAPD):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == CMAPD and self.coalition_degree < 2:
            raise ValueError("cmapd instances need coalition_degree >= 2")


def largest_component(g: MotionGraph) -> list[Vertex]:
    seen: set[Vertex] = set()
    best: list[Vertex] = []
    for v in g.vertices:
        if v in seen:
            continue
        comp, queue = [v], deque([v])
        seen.add(v)
        while queue:
            for u in g.neighbors(queue.popleft()):
                if u not in seen:
                    seen.add(u)
                    comp.append(u)
                    queue.append(u)
        if len(comp) > len(best):
            best = comp
    return sorted(best)


def nearest_unclaimed(g: MotionGraph, source: Vertex, claimed: set) -> Vertex:
    """BFS from ``source``; neighbours expand in adjacency order."""
    seen = {source}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        if v not in claimed:
            return v
        for u in g.neighbors(v):
            if u not in seen:
                seen.add(u)
                queue.append(u)
    raise GenerationError("no free cell left for parking")


def greedy_assign(tasks: dict[str, Task], degree: int, agents: dict[str, Agent],
                  edges: list[tuple[str, str]], dist) -> tuple[dict, dict]:
    """Repeatedly allocate the ready task that can start earliest.

    A task is ready once its explicit predecessors are allocated.  Its start is
    the latest arrival among the ``degree`` earliest-arriving agents, and no
    earlier than its predecessors' finish.  Collisions are ignored.
    """
    free_at = {a: 0 for a in agents}
    loc = {a: agents[a].start for a in agents}
    preds = {k: [u for u, v in edges if v == k] for k in tasks}
    finish: dict[str, int] = {}
    coalitions: dict[str, tuple[str, ...]] = {}
    order = list(tasks)
    while len(finish) < len(tasks):
        best = None
        for k in order:
            if k in finish or any(p not in finish for p in preds[k]):
                continue
            task = tasks[k]
            arrivals = sorted(((free_at[a] + dist(loc[a], task.pickup), i, a)
                               for i, a in enumerate(agents)))[:degree]
            begin = max([arrivals[-1][0]] + [finish[p] for p in preds[k]])
            if best is None or begin < best[0]:
                best = (begin, k, [a for _, _, a in arrivals])
        begin, k, chosen = best
        end = begin + dist(tasks[k].pickup, tasks[k].delivery)
        finish[k] = end
        coalitions[k] = tuple(a for a in agents if a in chosen)
        for a in chosen:
            free_at[a] = end
            loc[a] = tasks[k].delivery
    allot = {a: [] for a in agents}
    for k in sorted(finish, key=lambda k: (finish[k], order.index(k))):
        for a in coalitions[k]:
            allot[a].append(k)
    return allot, coalitions


def generate_instance(cfg: GeneratorConfig, index: int = 0) -> Problem:
    """A pure function of (cfg, index)."""
    rng = random.Random(f"{cfg.seed}:{index}")
    g = motion_graph(cfg.map)
    cells = largest_component(g)
    if len(cells) < max(cfg.agent_count, 2):
        raise GenerationError("map too small for the requested agents")
    dist = all_pairs_shortest_paths(g)
    ids = [f"a{i}" for i in range(cfg.agent_count)]
    starts = rng.sample(cells, cfg.agent_count)
    draws = [max(1, cfg.mean_tasks + rng.choice((-1, 0, 1))) for _ in ids]
    n_tasks = max(1, round(sum(draws) / cfg.coalition_degree))
    raw = {}
    for k in range(n_tasks):
        pickup, delivery = rng.sample(cells, 2)
        raw[f"t{k}"] = Task(f"t{k}", tuple(ids[:cfg.coalition_degree]), pickup, delivery)
    edges = []
    if cfg.mode == ASSEMBLY:
        for i in range(n_tasks):
            for j in range(i + 1, n_tasks):
                if rng.random() < cfg.explicit_edge_probability:
                    edges.append((f"t{i}", f"t{j}"))
    placeholder = {a: Agent(a, s, s) for a, s in zip(ids, starts)}
    allot, coalitions = greedy_assign(raw, cfg.coalition_degree, placeholder, edges, dist)
    tasks = {k: Task(k, coalitions[k], t.pickup, t.delivery) for k, t in raw.items()}
    # idle agents keep their start; busy agents park at their last delivery when free
    claimed = {s for a, s in zip(ids, starts) if not allot[a]}
    parks = {a: s for a, s in zip(ids, starts) if not allot[a]}
    for a in ids:
        if allot[a]:
            park = nearest_unclaimed(g, tasks[allot[a][-1]].delivery, claimed)
            parks[a] = park
            claimed.add(park)
    agents = {a: Agent(a, s, parks[a]) for a, s in zip(ids, starts)}
    problem = Problem(agents, tasks, {a: tuple(allot[a]) for a in ids}, edges)
    problem.check(cfg.map)
    build_task_graph(problem, dist)  # static screen: reachable endpoints, acyclic graph
    return problem


def generate_suite(cfg: GeneratorConfig, count: int) -> list[Problem]:
    return [generate_instance(cfg, i) for i in range(count)]


def random_grid(rng: random.Random, max_width: int = 5, max_height: int = 5,
                obstacle_probability: float = 0.15, min_free: int = 6) -> GridMap:
    """Small random map whose free cells form one connected region."""
    while True:
        w, h = rng.randint(3, max_width), rng.randint(3, max_height)
        grid = GridMap(w, h, tuple(rng.random() < obstacle_probability for _ in range(w * h)))
        g = motion_graph(grid)
        if len(g.vertices) >= min_free and len(largest_component(g)) == len(g.vertices):
            return grid


def random_small_instance(rng: random.Random, coalition_degree: int = 1,
                          max_agents: int = 3, max_tasks_per_agent: int = 2) -> tuple[GridMap, Problem]:
    """Oracle-sized instance: tiny grid, few agents, short allotments."""
    while True:
        grid = random_grid(rng)
        g = motion_graph(grid)
        cells = list(g.vertices)
        n_agents = rng.randint(max(coalition_degree, 1), max_agents)
        ids = [f"a{i}" for i in range(n_agents)]
        starts = rng.sample(cells, n_agents)
        parks = rng.sample(cells, n_agents)
        tasks, allot = {}, {a: [] for a in ids}
        for k in range(rng.randint(1, max_tasks_per_agent * n_agents // coalition_degree)):
            members = tuple(sorted(rng.sample(ids, coalition_degree), key=ids.index))
            if any(len(allot[a]) >= max_tasks_per_agent for a in members):
                continue
            pickup, delivery = rng.sample(cells, 2)
            tasks[f"t{k}"] = Task(f"t{k}", members, pickup, delivery)
            for a in members:
                allot[a].append(f"t{k}")
        if not tasks:
            continue
        names = list(tasks)
        edges = [(u, v) for i, u in enumerate(names) for v in names[i + 1:]
                 if rng.random() < 0.2]
        agents = {a: Agent(a, s, p) for a, s, p in zip(ids, starts, parks)}
        return grid, Problem(agents, tasks, {a: tuple(x) for a, x in allot.items()}, edges)


@dataclass
class MetricsReport:
    solved_pc: float
    solved_h: float
    pct_subopt: float
    avg_regret: float
    jointly_solved: int = 0
    total: int = 0

    def __str__(self):
        return (f"solved pc-cbs {self.solved_pc:.2f}  solved h-cbs {self.solved_h:.2f}  "
                f"sub-optimal {self.pct_subopt:.1f}%  avg regret {self.avg_regret:.3f}  "
                f"({self.jointly_solved}/{self.total} jointly solved)")


def compute_metrics(pc: list[int | None], h: list[int | None]) -> MetricsReport:
    """Makespans per instance, None when unsolved."""
    if len(pc) != len(h):
        raise ValueError("makespan lists differ in length")
    total = len(pc)
    joint = [(a, b) for a, b in zip(pc, h) if a is not None and b is not None]
    worse = sum(1 for a, b in joint if b > a)
    return MetricsReport(
        solved_pc=sum(x is not None for x in pc) / total if total else 0.0,
        solved_h=sum(x is not None for x in h) / total if total else 0.0,
        pct_subopt=100.0 * worse / len(joint) if joint else 0.0,
        avg_regret=sum(b - a for a, b in joint) / len(joint) if joint else 0.0,
        jointly_solved=len(joint), total=total)


@dataclass
class BenchInstance:
    name: str
    grid: GridMap
    problem: Problem


@dataclass
class RunRecord:
    instance: str
    algorithm: str
    status: str
    makespan: int | None
    runtime_ms: int
    ct_nodes: int
    ll_expansions: int
    valid: bool | None = None
    violations: list = field(default_factory=list)


CSV_FIELDS = ["instance", "algorithm", "status", "makespan", "runtime_ms", "ct_nodes",
              "ll_expansions", "valid"]


def run_one(inst: BenchInstance, algorithm: str, timeout: float) -> RunRecord:
    g = motion_graph(inst.grid)
    result = SOLVERS[algorithm](inst.problem, g, timeout=timeout)
    rec = RunRecord(inst.name, algorithm, result.status, result.makespan, result.runtime_ms,
                    result.ct_nodes, result.ll_expansions)
    if result.solution is not None:
        report = validate_solution(inst.problem, g, result.solution)
        rec.valid = report.ok
        rec.violations = [str(v) for v in report.violations]
    return rec


def _run_job(args):
    return run_one(*args)


def run_benchmark(instances: list[BenchInstance], algorithms=("pc-cbs", "h-cbs"),
                  timeout: float = 300, csv_path: str | Path | None = None,
                  workers: int = 1) -> tuple[MetricsReport | None, list[RunRecord]]:
    """Solve every instance with every algorithm; abort on any invalid plan."""
    jobs = [(inst, alg, timeout) for inst in instances for alg in algorithms]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(_run_job, jobs))
    else:
        records = [run_one(*job) for job in jobs]
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            writer.writeheader()
            for r in records:
                writer.writerow({k: getattr(r, k) for k in CSV_FIELDS})
    for r in records:
        if r.valid is False:
            raise BenchmarkValidationError(
                f"{r.algorithm} produced an invalid plan for {r.instance}: {r.violations[:3]}")
    report = None
    if "pc-cbs" in algorithms and "h-cbs" in algorithms:
        by = {(r.instance, r.algorithm): r.makespan if r.status == "solved" else None
              for r in records}
        names = [inst.name for inst in instances]
        report = compute_metrics([by[(n, "pc-cbs")] for n in names],
                                 [by[(n, "h-cbs")] for n in names])
    return report, records


def write_suite(directory: str | Path, grid: GridMap, problems: list[Problem]) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "map.map").write_text(format_map(grid))
    out = []
    for i, p in enumerate(problems):
        path = directory / f"instance-{i:03d}.problem"
        path.write_text(format_problem(p))
        out.append(path)
    return out


def read_suite(directory: str | Path) -> list[BenchInstance]:
    directory = Path(directory)
    grid = parse_map((directory / "map.map").read_text())
    return [BenchInstance(p.stem, grid, parse_problem(p.read_text()))
            for p in sorted(directory.glob("*.problem"))]
