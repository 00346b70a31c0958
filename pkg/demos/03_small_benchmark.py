"""Generate a few random instances per bundled map and compare both solvers.

Prints the solved rates, the share of instances where H-CBS is worse, and the
average extra makespan it pays.  Every plan is checked by the validator.
"""
import argparse

from pcmapf.bench import BenchInstance, GeneratorConfig, generate_suite, run_benchmark
from pcmapf.gridworld import BUNDLED_MAPS, load_map

parser = argparse.ArgumentParser()
parser.add_argument("--count", type=int, default=10)
parser.add_argument("--agents", type=int, default=2)
parser.add_argument("--tasks", type=int, default=2)
parser.add_argument("--timeout", type=float, default=20)
args = parser.parse_args()

for name in BUNDLED_MAPS:
    grid = load_map(name)
    cfg = GeneratorConfig(grid, agent_count=args.agents, mean_tasks=args.tasks, seed=1)
    instances = [BenchInstance(f"{name}-{i}", grid, p)
                 for i, p in enumerate(generate_suite(cfg, args.count))]
    report, _ = run_benchmark(instances, timeout=args.timeout)
    print(f"{name:12s} {report}")
