"""Stochastic shortest-path MDP solvers: dynamic programming and planning as inference."""

from .dp import (DivergenceError, EpsilonGreedy, PolicyCycleError, SolveReport, Truncated,
                 compute_q, initial_policy, policy_evaluation, policy_improvement,
                 policy_iteration, value_iteration)
from .domains import (GridSpec, format_grid, grid_to_mdp, parse_grid, random_proper_policy,
                      random_ssp)
from .inference import (DegenerateMdpError, ScaledCostModel, TimePrior, action_marginals, e_step,
                        em_solve, forward_marginals, m_step_greedy, scale_costs, value_from_betas)
from .mdp import (SspMdp, Violation, as_stochastic, expected_cost, greedy_extract, is_proper,
                  validate)
from .textformat import MdpFormatError, parse_mdp, write_mdp

__version__ = "0.1.0"
