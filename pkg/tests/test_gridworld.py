import math

import pytest
from hypothesis import given, settings, strategies as st

from pcmapf.gridworld import (BUNDLED_MAPS, GridMap, MapFormatError, all_pairs_shortest_paths,
                              format_map, is_edge_collision, is_vertex_collision, load_map,
                              motion_graph, parse_map)

from helpers import bfs_distances, grid_from


def test_empty_nine_by_nine_has_81_free_cells():
    grid = parse_map("height 9\nwidth 9\n" + ".........\n" * 9)
    assert len(motion_graph(grid).vertices) == 81


def test_single_obstacle_leaves_three_vertices():
    g = motion_graph(grid_from("..", ".@"))
    assert sorted(g.vertices) == [(0, 0), (0, 1), (1, 0)]
    assert (1, 1) not in g


@pytest.mark.parametrize("text, line", [
    ("width 3\nheight 3\n...\n...\n...\n", 1),
    ("height 2\nwidth 3\n...\n..\n", 4),
    ("height 2\nwidth 2\n..\n.x\n", 4),
    ("height 3\nwidth 2\n..\n..\n", 5),
    ("height two\nwidth 2\n..\n", 1),
])
def test_malformed_maps_report_line(text, line):
    with pytest.raises(MapFormatError) as info:
        parse_map(text)
    assert info.value.line == line


def test_format_round_trip():
    grid = load_map("warehouse")
    assert parse_map(format_map(grid)) == grid


def test_corner_to_corner_on_3x3():
    dist = all_pairs_shortest_paths(motion_graph(grid_from("...", "...", "...")))
    assert dist((0, 0), (2, 2)) == 4
    assert dist((1, 1), (1, 1)) == 0


def test_unreachable_is_infinite():
    dist = all_pairs_shortest_paths(motion_graph(grid_from(".@.")))
    assert dist((0, 0), (0, 2)) == math.inf


@pytest.mark.parametrize("name", BUNDLED_MAPS)
def test_bundled_maps_match_bfs(name):
    grid = load_map(name)
    assert (grid.width, grid.height) == (9, 9)
    g = motion_graph(grid)
    dist = all_pairs_shortest_paths(g)
    for u in g.vertices:
        ref = bfs_distances(grid, u)
        for v in g.vertices:
            assert dist(u, v) == ref.get(v, math.inf)


def test_tunnel_map_quadrants_meet_only_through_tunnels():
    grid = load_map("maze-tunnel")
    reach = bfs_distances(grid, (0, 0))
    assert len(reach) == len(grid.free_cells())
    tunnels = [(r, c) for r in range(3, 6) for c in range(9) if grid.is_free((r, c))]
    blocked = GridMap(9, 9, tuple(grid.cells[i] or divmod(i, 9) in tunnels for i in range(81)))
    assert (8, 8) not in bfs_distances(blocked, (0, 0))


grids = st.integers(2, 6).flatmap(lambda w: st.integers(2, 6).flatmap(
    lambda h: st.lists(st.booleans(), min_size=w * h, max_size=w * h).filter(
        lambda cells: not all(cells)).map(lambda cells: GridMap(w, h, tuple(cells)))))


@settings(max_examples=60, deadline=None)
@given(grids)
def test_distances_equal_bfs(grid):
    g = motion_graph(grid)
    dist = all_pairs_shortest_paths(g)
    for u in g.vertices:
        ref = bfs_distances(grid, u)
        assert all(dist(u, v) == ref.get(v, math.inf) for v in g.vertices)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6))
def test_open_grid_distance_is_manhattan(w, h):
    dist = all_pairs_shortest_paths(motion_graph(GridMap(w, h, (False,) * (w * h))))
    for u in [(r, c) for r in range(h) for c in range(w)]:
        for v in [(r, c) for r in range(h) for c in range(w)]:
            assert dist(u, v) == abs(u[0] - v[0]) + abs(u[1] - v[1])


def test_vertex_collision_rules():
    assert is_vertex_collision((1, 1), (1, 1), same_task=False)
    assert not is_vertex_collision((1, 1), (1, 1), same_task=True)
    assert not is_vertex_collision((1, 1), (1, 2), same_task=False)


def test_edge_collision_rules():
    a, b = ((0, 0), (0, 1)), ((0, 1), (0, 0))
    assert is_edge_collision(a, b, same_task=False)
    assert is_edge_collision(b, a, same_task=False)
    assert not is_edge_collision(a, ((0, 2), (0, 1)), same_task=False)
    assert not is_edge_collision(a, b, same_task=True)
