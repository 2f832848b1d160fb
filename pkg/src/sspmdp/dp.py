"""Dynamic-programming solvers: policy evaluation, improvement, iteration,
and a value-iteration oracle.

All sweeps are synchronous (Jacobi): every state is backed up from the
previous sweep's vector, so ``k`` truncated sweeps from zero equal the
expected cost of the first ``k`` steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .mdp import SspMdp, as_stochastic, check_stochastic_policy, goal_distances, policy_matrix

DEFAULT_SWEEP_CAP = 10**6
DIVERGENCE_VALUE = 1e12
TIE_RTOL = 1e-10


class DivergenceError(RuntimeError):
    """Evaluation blew up or hit the sweep cap: the policy is improper."""


class PolicyCycleError(RuntimeError):
    """Greedy improvement revisited a policy that is not a fixed point.

    Truncated evaluation is not monotone, so short horizons can cycle.
    ``history`` holds the rounds run before the repeat.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class EpsilonGreedy:
    epsilon: float
    max_sweeps: int = DEFAULT_SWEEP_CAP

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


@dataclass(frozen=True)
class Truncated:
    t_max: int

    def __post_init__(self):
        if int(self.t_max) != self.t_max or self.t_max < 1:
            raise ValueError("t_max must be a positive integer")


EvalTermination = Union[EpsilonGreedy, Truncated]


@dataclass
class RoundRecord:
    policy: np.ndarray
    values: np.ndarray
    sweeps: int


@dataclass
class SolveReport:
    policy: np.ndarray
    values: np.ndarray
    sweeps_total: int
    improvement_rounds: int
    converged: bool
    history: list = field(default_factory=list)
    betas: Optional[np.ndarray] = None


def _evaluate(mdp: SspMdp, probs: np.ndarray, term: EvalTermination,
              v0: Optional[np.ndarray] = None) -> tuple[np.ndarray, int]:
    check_stochastic_policy(probs, mdp.num_states, mdp.num_actions)
    goal = mdp.goal_mask
    p_pi = policy_matrix(mdp, probs)
    c_pi = np.einsum("sa,sa->s", probs, mdp.expected_costs)
    c_pi[goal] = 0.0
    v = np.zeros(mdp.num_states) if v0 is None else np.array(v0, dtype=float)
    v[goal] = 0.0

    if isinstance(term, Truncated):
        for _ in range(term.t_max):
            v = c_pi + p_pi @ v
            v[goal] = 0.0
        return v, term.t_max

    for sweep in range(1, term.max_sweeps + 1):
        v_new = c_pi + p_pi @ v
        v_new[goal] = 0.0
        delta = np.max(np.abs(v_new - v))
        v = v_new
        if delta < term.epsilon:
            return v, sweep
        if not np.isfinite(delta) or v.max() > DIVERGENCE_VALUE:
            raise DivergenceError(f"values exceeded {DIVERGENCE_VALUE:g} after {sweep} sweeps; "
                                  "policy is improper")
    raise DivergenceError(f"no convergence after {term.max_sweeps} sweeps; policy is improper")


def policy_evaluation(mdp: SspMdp, policy: np.ndarray, term: EvalTermination,
                      v0: Optional[np.ndarray] = None) -> np.ndarray:
    """Expected cost-to-go of ``policy``.

    Parameters
    ----------
    policy : array (S,) of action ids or array (S, A) of action probabilities
    term : EpsilonGreedy or Truncated
        ``EpsilonGreedy`` stops once the largest per-state change of a sweep
        drops below epsilon; ``Truncated`` runs exactly ``t_max`` sweeps.
    v0 : array (S,), optional
        Starting values, zeros by default. Goal entries are forced to 0.

    Raises
    ------
    DivergenceError
        If epsilon-greedy evaluation exceeds the value or sweep cap.
    """
    probs = np.asarray(policy)
    if probs.ndim == 1:
        probs = as_stochastic(probs, mdp.num_actions)
    return _evaluate(mdp, probs, term, v0)[0]


def compute_q(mdp: SspMdp, v: np.ndarray) -> np.ndarray:
    """``Q[s, a] = sum_s2 T(s, a, s2) (C(s, a, s2) + V(s2))``, zero on goals."""
    v = np.asarray(v, dtype=float)
    if v.shape != (mdp.num_states,):
        raise ValueError(f"value vector shape {v.shape} != ({mdp.num_states},)")
    q = mdp.expected_costs + np.einsum("sat,t->sa", mdp.transitions, v)
    q[mdp.goal_mask] = 0.0
    return q


def greedy_argmin(q: np.ndarray, current: Optional[np.ndarray] = None,
                  rtol: float = TIE_RTOL) -> np.ndarray:
    """Row-wise argmin treating values within ``rtol * |min|`` as ties.

    Ties go to the lowest action id, unless ``current`` is given and its
    action is among the tied minimisers, in which case it is kept. The tie
    band is relative, so the result is unchanged by positive rescaling of q.
    """
    q = np.asarray(q, dtype=float)
    qmin = q.min(axis=1, keepdims=True)
    tied = q <= qmin + rtol * np.abs(qmin)
    choice = np.argmax(tied, axis=1)
    if current is not None:
        current = np.asarray(current, dtype=int)
        keep = tied[np.arange(q.shape[0]), current]
        choice = np.where(keep, current, choice)
    return choice


def policy_improvement(q: np.ndarray, current: Optional[np.ndarray] = None) -> np.ndarray:
    """Greedy policy ``argmin_a Q(s, a)``; lowest action id wins ties."""
    return greedy_argmin(q, current)


def initial_policy(mdp: SspMdp) -> np.ndarray:
    """Proper starting policy built backwards from the goals.

    Each non-goal state takes the action with the largest one-step
    probability of moving strictly closer (in BFS steps) to a goal. Every
    state then has positive probability of progress, so the policy is proper
    whenever all states can reach a goal. Goal states get action 0.
    """
    dist = goal_distances(mdp)
    policy = np.zeros(mdp.num_states, dtype=int)
    for s in range(mdp.num_states):
        if s in mdp.goals or dist[s] < 0:
            continue
        closer = (dist >= 0) & (dist < dist[s])
        progress = mdp.transitions[s][:, closer].sum(axis=1)
        policy[s] = int(np.argmax(progress))
    return policy


def policy_iteration(mdp: SspMdp, init: Optional[np.ndarray] = None,
                     term: EvalTermination = EpsilonGreedy(1e-10),
                     max_rounds: int = 10_000) -> SolveReport:
    """Alternate evaluation and greedy improvement until the policy is stable.

    Each evaluation starts from zero values, so with ``Truncated(k)`` this is
    truncated policy iteration with a ``k``-step lookahead. The current
    action is kept whenever it ties the best one.
    """
    policy = initial_policy(mdp) if init is None else np.array(init, dtype=int)
    seen = {policy.tobytes()}
    history = []
    sweeps_total = 0
    for rounds in range(1, max_rounds + 1):
        v, sweeps = _evaluate(mdp, as_stochastic(policy, mdp.num_actions), term)
        sweeps_total += sweeps
        history.append(RoundRecord(policy.copy(), v, sweeps))
        improved = policy_improvement(compute_q(mdp, v), current=policy)
        if np.array_equal(improved, policy):
            return SolveReport(policy, v, sweeps_total, rounds, True, history)
        key = improved.tobytes()
        if key in seen:
            raise PolicyCycleError(f"policy iteration cycled after {rounds} rounds", history)
        seen.add(key)
        policy = improved
    return SolveReport(policy, v, sweeps_total, max_rounds, False, history)


def value_iteration(mdp: SspMdp, epsilon: float,
                    max_sweeps: int = DEFAULT_SWEEP_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Bellman-optimality sweeps until the residual drops below ``epsilon``.

    Returns ``(values, greedy_policy)``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    v = np.zeros(mdp.num_states)
    for sweep in range(1, max_sweeps + 1):
        v_new = compute_q(mdp, v).min(axis=1)
        delta = np.max(np.abs(v_new - v))
        v = v_new
        if delta < epsilon:
            return v, policy_improvement(compute_q(mdp, v))
        if v.max() > DIVERGENCE_VALUE:
            break
    raise DivergenceError(f"value iteration did not converge within {sweep} sweeps")
