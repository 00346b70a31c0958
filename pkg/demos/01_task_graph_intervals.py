"""Walk through how precedence edges shape the valid intervals of a task graph.

Two agents each carry one object.  The second carry may only start once the
first object has been delivered, so agent r2, which could reach its pickup at
t=2, has to wait until t=4.
"""
from pcmapf.gridworld import all_pairs_shortest_paths, motion_graph, parse_map
from pcmapf.pccbs import solve
from pcmapf.problem import format_solution, parse_problem
from pcmapf.taskgraph import build_task_graph, initialize_intervals

MAP = "height 5\nwidth 5\n" + ".....\n" * 5
PROBLEM = """agent r1 start 0 0 park 0 4
agent r2 start 2 0 park 4 2
task t1 pickup 0 1 deliver 0 4 coalition r1
task t2 pickup 2 2 deliver 4 2 coalition r2
allot r1 t1
allot r2 t2
edge t1 t2
"""

grid = parse_map(MAP)
problem = parse_problem(PROBLEM)
graph = motion_graph(grid)
tg = build_task_graph(problem, all_pairs_shortest_paths(graph))
table = initialize_intervals(tg)

print("Task graph nodes in topological order, with their start and end windows:")
for i in tg.order:
    print(f"  {tg.nodes[i].id:10s} start {table.start[i]}  end {table.end[i]}")

print("\nGO:t2:r2 can end at t=2, but CARRY:t2 cannot start before t1 is delivered at t=4.")

result = solve(problem, graph)
print(f"\nPC-CBS plan, makespan {result.makespan}:")
print(format_solution(result.solution, problem, runtime=False))
