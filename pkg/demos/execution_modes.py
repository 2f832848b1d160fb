"""Offline policy, online replanning, probabilistic plans and
determinize-and-replan on a slip grid, with and without a cost change
part-way through the episode."""
from sspmdp import GridSpec, grid_to_mdp, policy_iteration
from sspmdp.domains import cell_index
from sspmdp.harness import (CostEvent, DeterminizeReplan, OfflinePolicy, ProbabilisticPlan,
                            ReplanPolicy, evaluate_mode, stats_to_csv)

spec = GridSpec(5, 4, (0, 0), {(0, 4)}, obstacles={(1, 1), (1, 2), (1, 3)}, p_slip=0.1)
mdp = grid_to_mdp(spec)
modes = [OfflinePolicy(policy_iteration(mdp).policy), ReplanPolicy(),
         ProbabilisticPlan(4 * mdp.num_states), DeterminizeReplan()]

# %% Static costs: every mode follows much the same route.
rows = [evaluate_mode(mdp, m, mdp.start, n=200, seed=1) for m in modes]
print(stats_to_csv(rows))

# %% At step 1 the top corridor becomes ten times as expensive. Only the
# online modes notice.
idx = cell_index(spec)
corridor = frozenset(idx[(0, c)] for c in (1, 2, 3))
events = (CostEvent(1, corridor, 10.0),)
rows = [evaluate_mode(mdp, m, mdp.start, n=200, seed=1, events=events) for m in modes]
print(stats_to_csv(rows))
