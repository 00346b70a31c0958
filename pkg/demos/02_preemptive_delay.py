"""Why planning one task segment at a time can cost makespan.

Row 1 to the right of column 1 is a one-wide dead-end corridor.  Agent ra
delivers to its middle cell and agent rb to its far end, and both must come
back out.  The optimal plan has ra step aside at t=1, before any collision is
in sight, so rb can enter first and ra follows right behind.  H-CBS fixes
each segment as soon as it is planned: ra goes in first and rb is left waiting
for the corridor to clear.
"""
from pcmapf.gridworld import motion_graph, parse_map
from pcmapf.hcbs import solve_hcbs
from pcmapf.pccbs import solve
from pcmapf.problem import parse_problem
from pcmapf.verify import oracle_makespan, validate_solution

MAP = """height 3
width 5
..@@@
.....
..@@@
"""
PROBLEM = """agent ra start 1 1 park 0 1
agent rb start 0 0 park 1 0
task t1 pickup 1 1 deliver 1 3 coalition ra
task t2 pickup 0 0 deliver 1 4 coalition rb
allot ra t1
allot rb t2
"""


def show(label, result, problem, graph):
    ok = validate_solution(problem, graph, result.solution).ok
    print(f"{label:7s} makespan {result.makespan:3d}  CT nodes {result.ct_nodes:4d}  valid {ok}")
    for a, path in result.solution.paths.items():
        print(f"        {a}: {' '.join(f'{r},{c}' for r, c in path.positions)}")


grid = parse_map(MAP)
graph = motion_graph(grid)
problem = parse_problem(PROBLEM)
print(MAP)
show("PC-CBS", solve(problem, graph, timeout=60), problem, graph)
show("H-CBS", solve_hcbs(problem, graph, timeout=60), problem, graph)
print(f"oracle  makespan {oracle_makespan(problem, graph).makespan:3d}")
