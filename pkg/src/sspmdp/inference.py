"""Planning as inference for SSP MDPs.

Costs are mapped affinely to the probability of a binary "maximal cost"
event. The indefinite horizon is a mixture of finite-horizon models with a
prior over the horizon length. The E-step propagates backward messages

    beta_0(i)   = sum_a P(c=1 | a, i) pi[i, a]
    beta_tau(i) = sum_j p(j | i; pi) beta_{tau-1}(j)

and time-marginalizes the per-horizon action values into a state-action
cost probability. The M-step picks, per state, the action with the lowest
cost probability.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dp import PolicyCycleError, RoundRecord, SolveReport, greedy_argmin, initial_policy
from .mdp import SspMdp, as_stochastic, check_stochastic_policy, greedy_extract, policy_matrix


class DegenerateMdpError(ValueError):
    """All expected costs are equal, so the cost-probability map is undefined."""


@dataclass(frozen=True, eq=False)
class ScaledCostModel:
    p_cost: np.ndarray  # (S, A): P(c=1 | a, s)
    max_cost: float
    min_cost: float

    def unscale(self) -> np.ndarray:
        return self.p_cost * (self.max_cost - self.min_cost) + self.min_cost


@dataclass(frozen=True, eq=False)
class TimePrior:
    """Horizon-length prior truncated to ``0..t_max``."""

    kind: str
    t_max: int
    gamma: Optional[float] = None

    def __post_init__(self):
        if int(self.t_max) != self.t_max or self.t_max < 0:
            raise ValueError("t_max must be a non-negative integer")
        if self.kind == "flat":
            if self.gamma is not None:
                raise ValueError("gamma is only meaningful for a discounted prior")
        elif self.kind == "discounted":
            if self.gamma is None or not 0 < self.gamma < 1:
                raise ValueError("discounted prior needs gamma in (0, 1)")
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    @classmethod
    def flat(cls, t_max: int) -> "TimePrior":
        return cls("flat", t_max)

    @classmethod
    def discounted(cls, gamma: float, t_max: int) -> "TimePrior":
        return cls("discounted", t_max, gamma)

    @property
    def weights(self) -> np.ndarray:
        tau = np.arange(self.t_max + 1)
        if self.kind == "flat":
            w = np.ones(tau.size)
        else:
            w = self.gamma ** tau
        return w / w.sum()


def scale_costs(mdp: SspMdp) -> ScaledCostModel:
    """Map expected costs onto ``[0, 1]`` by ``(C̄ - min) / (max - min)``.

    The extremes run over every state-action pair, goals included, so the
    minimum is 0 for any MDP with a goal.
    """
    cbar = mdp.expected_costs
    lo, hi = float(cbar.min()), float(cbar.max())
    if hi == lo:
        raise DegenerateMdpError("all expected costs are equal; cannot scale to probabilities")
    p = (cbar - lo) / (hi - lo)
    p[mdp.goal_mask] = 0.0
    return ScaledCostModel(p, hi, lo)


def backward_messages(mdp: SspMdp, scaled: ScaledCostModel, probs: np.ndarray,
                      t_max: int) -> np.ndarray:
    """Beta messages for ``tau = 0..t_max``, shape ``(t_max + 1, S)``."""
    p_pi = policy_matrix(mdp, probs)
    beta = np.empty((t_max + 1, mdp.num_states))
    beta[0] = np.einsum("sa,sa->s", scaled.p_cost, probs)
    for tau in range(1, t_max + 1):
        beta[tau] = p_pi @ beta[tau - 1]
    beta[:, mdp.goal_mask] = 0.0
    return beta


def action_messages(mdp: SspMdp, scaled: ScaledCostModel, beta: np.ndarray) -> np.ndarray:
    """Per-horizon action values ``q_tau(a, i)``, shape ``(t_max + 1, S, A)``.

    ``q_0`` is the immediate cost probability; for every ``tau >= 1`` the
    action is followed by ``tau - 1`` steps under the policy.
    """
    q = np.empty((beta.shape[0],) + scaled.p_cost.shape)
    q[0] = scaled.p_cost
    q[1:] = np.einsum("sat,kt->ksa", mdp.transitions, beta[:-1])
    q[:, mdp.goal_mask, :] = 0.0
    return q


def marginalize_time(q_layers: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Prior-weighted mixture of ``q_tau``, normalized by the summed weight."""
    weights = np.asarray(weights, dtype=float)
    return np.tensordot(weights, q_layers, axes=1) / weights.sum()


def e_step(mdp: SspMdp, scaled: ScaledCostModel, policy: np.ndarray,
           prior: TimePrior) -> tuple[np.ndarray, np.ndarray]:
    """Backward pass over all finite-horizon models.

    Parameters
    ----------
    policy : array (S, A) of action probabilities, or (S,) of action ids
    prior : TimePrior
        Its ``t_max`` sets how many messages are computed.

    Returns
    -------
    beta : array (t_max + 1, S)
        ``beta[tau, i] = P(c=1 | s_{T-tau} = i; pi)``.
    q_prob : array (S, A)
        Time-marginalized ``P(c=1 | a_t = a, s_t = i; pi)``.
    """
    probs = np.asarray(policy, dtype=float)
    if probs.ndim == 1:
        probs = as_stochastic(probs.astype(int), mdp.num_actions)
    check_stochastic_policy(probs, mdp.num_states, mdp.num_actions)
    if scaled.p_cost.shape != (mdp.num_states, mdp.num_actions):
        raise ValueError("scaled cost model does not match the MDP")
    beta = backward_messages(mdp, scaled, probs, prior.t_max)
    q_prob = marginalize_time(action_messages(mdp, scaled, beta), prior.weights)
    return beta, q_prob


def m_step_greedy(q_prob: np.ndarray, current: Optional[np.ndarray] = None) -> np.ndarray:
    """Deterministic policy minimizing the cost probability per state.

    Ties go to the lowest action id, or to ``current`` when it is tied.
    """
    return greedy_argmin(q_prob, current)


def value_from_betas(beta: np.ndarray, scaled: ScaledCostModel, prior: TimePrior) -> np.ndarray:
    """Recover the expected cost-to-go from the backward messages.

    Under the flat prior the sum of messages, un-scaled to cost units, equals
    ``t_max + 1`` synchronous evaluation sweeps from zero. Under the
    discounted prior the prior-weighted mixture is divided by ``1 - gamma``.
    """
    span = scaled.max_cost - scaled.min_cost
    # min_cost is 0 whenever a goal exists
    per_step = beta * span + scaled.min_cost
    if prior.kind == "flat":
        return per_step.sum(axis=0)
    return prior.weights @ per_step / (1.0 - prior.gamma)


def em_solve(mdp: SspMdp, t_max: int, prior: Optional[TimePrior] = None,
             init: Optional[np.ndarray] = None, max_rounds: int = 10_000) -> SolveReport:
    """Expectation-maximization with a greedy M-step.

    Iterates E-step and M-step until the policy stops changing. With the
    flat prior each round matches one round of truncated policy iteration
    with ``t_max`` evaluation sweeps. The returned values come from the
    final policy's messages.

    Raises
    ------
    PolicyCycleError
        If a non-fixed-point policy recurs.
    """
    prior = TimePrior.flat(t_max) if prior is None else prior
    if prior.t_max != t_max:
        raise ValueError(f"prior truncated at {prior.t_max}, expected {t_max}")
    scaled = scale_costs(mdp)
    if init is None:
        policy = initial_policy(mdp)
    else:
        init = np.asarray(init)
        policy = greedy_extract(init) if init.ndim == 2 else init.astype(int)
    seen = {policy.tobytes()}
    history = []
    for rounds in range(1, max_rounds + 1):
        beta, q_prob = e_step(mdp, scaled, policy, prior)
        values = value_from_betas(beta, scaled, prior)
        history.append(RoundRecord(policy.copy(), values, t_max + 1))
        improved = m_step_greedy(q_prob, current=policy)
        if np.array_equal(improved, policy):
            return SolveReport(policy, values, rounds * (t_max + 1), rounds, True, history, beta)
        key = improved.tobytes()
        if key in seen:
            raise PolicyCycleError(f"EM revisited a policy after {rounds} rounds", history)
        seen.add(key)
        policy = improved
    return SolveReport(policy, values, max_rounds * (t_max + 1), max_rounds, False, history, beta)


def forward_marginals(mdp: SspMdp, policy: np.ndarray, initial: np.ndarray,
                      horizon: int) -> np.ndarray:
    """Temporal-state posterior ``p(s_t)`` for ``t = 0..horizon``, shape (horizon + 1, S).

    ``initial`` is a distribution over world states or a single state id.
    """
    probs = np.asarray(policy, dtype=float)
    if probs.ndim == 1:
        probs = as_stochastic(probs.astype(int), mdp.num_actions)
    if np.ndim(initial) == 0:
        p0 = np.zeros(mdp.num_states)
        p0[int(initial)] = 1.0
    else:
        p0 = np.asarray(initial, dtype=float)
    p_pi = policy_matrix(mdp, probs)
    dist = np.empty((horizon + 1, mdp.num_states))
    dist[0] = p0
    for t in range(1, horizon + 1):
        dist[t] = dist[t - 1] @ p_pi
    return dist


def action_marginals(policy: np.ndarray, state_marginals: np.ndarray) -> np.ndarray:
    """``p(a_t) = sum_s p(a_t | s_t) p(s_t)`` for every time slice."""
    return np.asarray(state_marginals) @ np.asarray(policy, dtype=float)
