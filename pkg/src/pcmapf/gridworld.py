"""Grid maps, the 4-connected motion graph and shortest-path distances."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

Vertex = tuple[int, int]

FREE = "."
OBSTACLE = "@"
MOVES = ((-1, 0), (0, -1), (0, 1), (1, 0))


class MapFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    cells: tuple[bool, ...]  # row-major, True means obstacle

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")
        if len(self.cells) != self.width * self.height:
            raise ValueError("cell count does not match width * height")
        if all(self.cells):
            raise ValueError("grid has no free cell")

    def in_bounds(self, v: Vertex) -> bool:
        return 0 <= v[0] < self.height and 0 <= v[1] < self.width

    def is_free(self, v: Vertex) -> bool:
        return self.in_bounds(v) and not self.cells[v[0] * self.width + v[1]]

    def free_cells(self) -> list[Vertex]:
        return [(r, c) for r in range(self.height) for c in range(self.width)
                if not self.cells[r * self.width + c]]

    def rows(self) -> list[str]:
        return ["".join(OBSTACLE if self.cells[r * self.width + c] else FREE
                        for c in range(self.width)) for r in range(self.height)]

    @classmethod
    def from_rows(cls, rows: list[str]) -> "GridMap":
        return parse_map(format_map_rows(rows))


def format_map_rows(rows: list[str]) -> str:
    return f"height {len(rows)}\nwidth {len(rows[0])}\n" + "\n".join(rows) + "\n"


def format_map(grid: GridMap) -> str:
    return format_map_rows(grid.rows())


def _header(line: str, key: str, lineno: int) -> int:
    parts = line.split()
    if len(parts) != 2 or parts[0] != key:
        raise MapFormatError(lineno, f"expected '{key} <n>', got {line!r}")
    try:
        value = int(parts[1])
    except ValueError:
        raise MapFormatError(lineno, f"'{key}' value is not an integer") from None
    if value < 1:
        raise MapFormatError(lineno, f"'{key}' must be positive")
    return value


def parse_map(text: str) -> GridMap:
    lines = text.splitlines()
    if len(lines) < 2:
        raise MapFormatError(len(lines) + 1, "missing height/width header")
    height = _header(lines[0], "height", 1)
    width = _header(lines[1], "width", 2)
    body = lines[2:]
    # tolerate trailing blank lines only
    while len(body) > height and not body[-1].strip():
        body.pop()
    if len(body) != height:
        raise MapFormatError(len(lines) + 1, f"expected {height} rows, found {len(body)}")
    cells = []
    for i, row in enumerate(body):
        lineno = i + 3
        if len(row) != width:
            raise MapFormatError(lineno, f"row has {len(row)} cells, expected {width}")
        for ch in row:
            if ch == FREE:
                cells.append(False)
            elif ch == OBSTACLE:
                cells.append(True)
            else:
                raise MapFormatError(lineno, f"unknown cell character {ch!r}")
    try:
        return GridMap(width, height, tuple(cells))
    except ValueError as exc:
        raise MapFormatError(3, str(exc)) from None


@dataclass(frozen=True)
class MotionGraph:
    map: GridMap
    adjacency: dict[Vertex, tuple[Vertex, ...]] = field(repr=False)

    @property
    def vertices(self) -> list[Vertex]:
        return list(self.adjacency)

    def neighbors(self, v: Vertex) -> tuple[Vertex, ...]:
        return self.adjacency[v]

    def __contains__(self, v) -> bool:
        return v in self.adjacency


def motion_graph(grid: GridMap) -> MotionGraph:
    adjacency = {}
    for v in grid.free_cells():
        adjacency[v] = tuple((v[0] + dr, v[1] + dc) for dr, dc in MOVES
                             if grid.is_free((v[0] + dr, v[1] + dc)))
    return MotionGraph(grid, adjacency)


class DistanceTable:
    """All-pairs move counts; ``math.inf`` for disconnected pairs."""

    def __init__(self, vertices: list[Vertex], matrix: np.ndarray):
        self.vertices = vertices
        self.index = {v: i for i, v in enumerate(vertices)}
        self._rows = {u: {v: (int(d) if math.isfinite(d) else math.inf)
                          for v, d in zip(vertices, row)}
                      for u, row in zip(vertices, matrix)}

    def __call__(self, u: Vertex, v: Vertex):
        return self._rows[u][v]

    def row(self, u: Vertex) -> dict[Vertex, int]:
        return self._rows[u]


def all_pairs_shortest_paths(g: MotionGraph) -> DistanceTable:
    vertices = g.vertices
    index = {v: i for i, v in enumerate(vertices)}
    rows, cols = [], []
    for v, nbrs in g.adjacency.items():
        for u in nbrs:
            rows.append(index[v])
            cols.append(index[u])
    n = len(vertices)
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    matrix = shortest_path(adj, method="FW", directed=False, unweighted=True)
    return DistanceTable(vertices, matrix)


def is_vertex_collision(a: Vertex, b: Vertex, same_task: bool) -> bool:
    return a == b and not same_task


def is_edge_collision(a: tuple[Vertex, Vertex], b: tuple[Vertex, Vertex], same_task: bool) -> bool:
    """``a`` and ``b`` are (from, to) moves over the same timestep."""
    if same_task or a[0] == a[1]:
        return False
    return a[0] == b[1] and a[1] == b[0]


def load_map(name: str) -> GridMap:
    """Load one of the bundled 9x9 environments by file stem."""
    text = resources.files("pcmapf.maps").joinpath(f"{name}.map").read_text()
    return parse_map(text)


BUNDLED_MAPS = ("empty", "warehouse", "maze-gap", "maze-tunnel")
