"""Planning as inference on a slip grid, checked against truncated policy
iteration.

The summed backward messages are the truncated cost-to-go, and EM with a
greedy M-step walks through the same policies as truncated policy
iteration. With a short horizon both can settle on a policy that is not
optimal.
"""
import numpy as np

from sspmdp import (GridSpec, PolicyCycleError, TimePrior, Truncated, e_step, em_solve,
                    grid_to_mdp, initial_policy, policy_evaluation, policy_iteration,
                    scale_costs, value_from_betas)

mdp = grid_to_mdp(GridSpec(5, 5, (0, 0), {(4, 4)}, obstacles={(2, 1), (2, 2), (2, 3)},
                           p_slip=0.2))
scaled = scale_costs(mdp)
policy = initial_policy(mdp)

# %% One E-step from the starting policy.
for t_max in (1, 8, 32):
    prior = TimePrior.flat(t_max)
    beta, q_prob = e_step(mdp, scaled, policy, prior)
    v_em = value_from_betas(beta, scaled, prior)
    v_pe = policy_evaluation(mdp, policy, Truncated(t_max + 1))
    print(f"t_max {t_max:>3}: max |V_beta - V_trunc| = {np.max(np.abs(v_em - v_pe)):.1e}, "
          f"V(start) = {v_em[mdp.start]:.4f}")

# %% Full EM against the exact optimum.
opt = policy_iteration(mdp)
print(f"optimal V(start) = {opt.values[mdp.start]:.4f}")
for t_max in (4, 16, 64):
    try:
        em = em_solve(mdp, t_max)
    except PolicyCycleError as exc:
        print(f"t_max {t_max:>3}: cycled after {len(exc.history)} rounds")
        continue
    pi_k = policy_iteration(mdp, term=Truncated(t_max))
    exact = policy_evaluation(mdp, em.policy, Truncated(10_000))
    print(f"t_max {t_max:>3}: {em.improvement_rounds} rounds, same as truncated PI: "
          f"{np.array_equal(em.policy, pi_k.policy)}, "
          f"states off-optimal: {int((em.policy != opt.policy).sum())}, "
          f"true V(start) {exact[mdp.start]:.4f}")
