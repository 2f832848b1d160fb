"""Solve a slippery 4x4 grid world with policy and value iteration.

Run with ``python demos/grid_world.py``.
"""
import numpy as np

from sspmdp import GridSpec, grid_to_mdp, policy_iteration, value_iteration
from sspmdp.domains import ACTIONS

# %% Deterministic moves: the optimal cost is the shortest path length.
spec = GridSpec(4, 4, start=(0, 0), goals={(3, 3)})
mdp = grid_to_mdp(spec)
report = policy_iteration(mdp)
print(f"{mdp.num_states} states, V*(start) = {report.values[mdp.start]:g}")

# %% With slip 0.2 the intended move succeeds 80% of the time.
spec = GridSpec(4, 4, start=(0, 0), goals={(3, 3)}, obstacles={(1, 1), (2, 2)}, p_slip=0.2)
mdp = grid_to_mdp(spec)
pi = policy_iteration(mdp)
v_vi, _ = value_iteration(mdp, 1e-12)
print(f"PI rounds {pi.improvement_rounds}, sweeps {pi.sweeps_total}")
print(f"max |V_pi - V_vi| = {np.max(np.abs(pi.values - v_vi)):.1e}")

# %% Lay the policy and values back onto the grid.
free = spec.free_cells()
arrows = np.full((spec.height, spec.width), "#", dtype=object)
values = np.full((spec.height, spec.width), np.nan)
for s, (r, c) in enumerate(free):
    arrows[r, c] = "G" if (r, c) in spec.goals else ACTIONS[pi.policy[s]]
    values[r, c] = pi.values[s]
print("\n".join(" ".join(row) for row in arrows))
with np.printoptions(precision=2, suppress=True):
    print(values)
