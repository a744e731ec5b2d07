"""The three power-allocation goals on one coupling instance.

Total-power maximization silences weakly-coupled-constraint BSs, max-min
keeps everything on at a common floor, and the log goal balances the two.
The grid oracle cross-checks each solution.
"""

import numpy as np

from remshare import PowerProblem, brute_force_power_oracle, solve_power_problem
from remshare.optim import LOG_SUM, MAX_MIN, SUM_POWER, dump_problem

rng = np.random.default_rng(7)
w = np.array([[1.0, 0.15, 0.02],
              [0.05, 0.8, 0.3]])
i_max = np.array([1.0, 1.5])
p_max = 8.0  # device cap; a finer oracle grid step at demo scale

for goal in (SUM_POWER, MAX_MIN, LOG_SUM):
    problem = PowerProblem(w=w, i_max_mw=i_max, p_max_mw=p_max, goal=goal)
    alloc = solve_power_problem(problem)
    oracle = brute_force_power_oracle(problem, 200)
    print(f"{goal:>10}: p = {np.round(alloc.p_tx_mw, 4)} mW  "
          f"objective {alloc.objective_value:.6f} (grid oracle {oracle.objective_value:.6f})")

problem = PowerProblem(w=w, i_max_mw=i_max, p_max_mw=p_max, goal=SUM_POWER)
dump_problem(problem, "demo_power_problem.json")
print("\ninstance written to demo_power_problem.json "
      "(try: remshare oracle --problem demo_power_problem.json)")
