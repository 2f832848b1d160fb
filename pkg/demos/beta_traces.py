"""Backward messages and forward state marginals on a small chain.

Emits CSV on stdout for plotting elsewhere: one row per horizon step with
the beta message at every state, followed by the action marginals of the
probabilistic plan.
"""
import csv
import sys

import numpy as np

from sspmdp import (SspMdp, TimePrior, action_marginals, e_step, em_solve, forward_marginals,
                    scale_costs)

# Four states in a row, goal at the end. "walk" costs 1 and advances with
# prob. 0.7; "run" costs 2 and always advances.
entries = []
for s in range(3):
    entries += [(s, 0, s + 1, 0.7, 1.0), (s, 0, s, 0.3, 1.0), (s, 1, s + 1, 1.0, 2.0)]
entries += [(3, 0, 3, 1.0, 0.0), (3, 1, 3, 1.0, 0.0)]
mdp = SspMdp.from_entries(4, 2, entries, goals={3}, start=0)

t_max = 12
report = em_solve(mdp, t_max)
beta, q_prob = e_step(mdp, scale_costs(mdp), report.policy, TimePrior.flat(t_max))

out = csv.writer(sys.stdout)
out.writerow(["tau"] + [f"beta_{s}" for s in range(mdp.num_states)])
for tau, row in enumerate(beta):
    out.writerow([tau] + [f"{x:.6f}" for x in row])

probs = np.eye(mdp.num_actions)[report.policy]
p_a = action_marginals(probs, forward_marginals(mdp, probs, mdp.start, t_max))
out.writerow(["t", "p_walk", "p_run"])
for t, row in enumerate(p_a):
    out.writerow([t] + [f"{x:.6f}" for x in row])
