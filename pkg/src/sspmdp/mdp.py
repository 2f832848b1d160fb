"""Stochastic shortest-path MDP model, policy containers and validation.

An :class:`SspMdp` stores its transition and cost functions as dense
``(S, A, S)`` arrays indexed ``[s, a, s']``. States and actions are dense
integer ids; every action is available in every state. Values and
Q-functions are plain numpy arrays of shape ``(S,)`` and ``(S, A)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Optional

import numpy as np

ROW_SUM_TOL = 1e-9
MIN_POSITIVE_COST = 1e-12


@dataclass(frozen=True, eq=False)
class SspMdp:
    """Immutable SSP MDP.

    Parameters
    ----------
    transitions : array (S, A, S)
        ``transitions[s, a, s2]`` is the probability of reaching ``s2`` after
        taking ``a`` in ``s``.
    costs : array (S, A, S)
        Cost charged on the transition ``(s, a, s2)``.
    goals : iterable of int
        Absorbing zero-cost goal states.
    start : int, optional
        Start state used by grid domains and the execution harness.
    """

    transitions: np.ndarray
    costs: np.ndarray
    goals: frozenset = field(default_factory=frozenset)
    start: Optional[int] = None

    def __post_init__(self):
        t = np.array(self.transitions, dtype=float)
        c = np.array(self.costs, dtype=float)
        if t.ndim != 3 or t.shape[0] != t.shape[2]:
            raise ValueError(f"transitions must have shape (S, A, S), got {t.shape}")
        if c.shape != t.shape:
            raise ValueError(f"costs shape {c.shape} does not match transitions {t.shape}")
        goals = frozenset(int(g) for g in self.goals)
        n = t.shape[0]
        for g in goals:
            if not 0 <= g < n:
                raise ValueError(f"goal {g} out of range [0, {n})")
        if self.start is not None and not 0 <= int(self.start) < n:
            raise ValueError(f"start {self.start} out of range [0, {n})")
        t.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "transitions", t)
        object.__setattr__(self, "costs", c)
        object.__setattr__(self, "goals", goals)
        if self.start is not None:
            object.__setattr__(self, "start", int(self.start))

    @classmethod
    def from_entries(cls, num_states: int, num_actions: int,
                     entries: Iterable[tuple], goals: Iterable[int] = (),
                     start: Optional[int] = None) -> "SspMdp":
        """Build from sparse ``(s, a, s2, prob, cost)`` tuples.

        Repeated entries for the same triple accumulate probability; the
        last cost wins.
        """
        t = np.zeros((num_states, num_actions, num_states))
        c = np.zeros_like(t)
        for s, a, s2, p, cost in entries:
            t[s, a, s2] += p
            c[s, a, s2] = cost
        return cls(t, c, frozenset(goals), start)

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]

    @cached_property
    def goal_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_states, dtype=bool)
        mask[list(self.goals)] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def expected_costs(self) -> np.ndarray:
        """``C̄[s, a] = sum_s2 T(s, a, s2) C(s, a, s2)``, shape (S, A)."""
        cbar = np.einsum("sat,sat->sa", self.transitions, self.costs)
        cbar.setflags(write=False)
        return cbar

    def successors(self, s: int, a: int) -> list[tuple[int, float, float]]:
        """Sparse view of one row: ``[(s2, prob, cost), ...]`` with prob > 0."""
        row = self.transitions[s, a]
        return [(int(j), float(row[j]), float(self.costs[s, a, j]))
                for j in np.flatnonzero(row > 0)]

    def with_costs(self, costs: np.ndarray) -> "SspMdp":
        return SspMdp(self.transitions, costs, self.goals, self.start)

    def scale_costs_by(self, k: float) -> "SspMdp":
        return self.with_costs(self.costs * k)

    def same_as(self, other: "SspMdp", atol: float = 0.0) -> bool:
        return (self.goals == other.goals and self.start == other.start
                and self.transitions.shape == other.transitions.shape
                and np.allclose(self.transitions, other.transitions, rtol=0, atol=atol)
                and np.allclose(self.costs, other.costs, rtol=0, atol=atol))


class Violation(NamedTuple):
    kind: str
    message: str
    where: tuple = ()


def goal_distances(mdp: SspMdp) -> np.ndarray:
    """BFS step distance to the nearest goal over all positive-probability
    edges of every action; ``-1`` where no goal is reachable."""
    n = mdp.num_states
    adj = (mdp.transitions > 0).any(axis=1)  # (S, S) edge s -> s2
    dist = np.full(n, -1, dtype=int)
    queue = deque()
    for g in sorted(mdp.goals):
        dist[g] = 0
        queue.append(g)
    while queue:
        j = queue.popleft()
        for i in np.flatnonzero(adj[:, j]):
            if dist[i] < 0:
                dist[i] = dist[j] + 1
                queue.append(i)
    return dist


def validate(mdp: SspMdp) -> list[Violation]:
    """Check every mechanically testable SSP assumption.

    Returns a list of violations; an empty list means the MDP is valid.
    Never raises on a well-shaped MDP.
    """
    out: list[Violation] = []
    t, c = mdp.transitions, mdp.costs
    n, m = mdp.num_states, mdp.num_actions

    if not mdp.goals:
        out.append(Violation("no-goal", "MDP has no goal states"))

    for s, a, s2 in zip(*np.nonzero((t < 0) | (t > 1) | ~np.isfinite(t))):
        out.append(Violation("prob-range",
                             f"probability {t[s, a, s2]} out of range at ({s},{a},{s2})",
                             (int(s), int(a), int(s2))))
    for s, a, s2 in zip(*np.nonzero((c < 0) | ~np.isfinite(c))):
        out.append(Violation("cost-range",
                             f"cost {c[s, a, s2]} is negative or non-finite at ({s},{a},{s2})",
                             (int(s), int(a), int(s2))))

    sums = t.sum(axis=2)
    for s, a in zip(*np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)):
        out.append(Violation("row-sum", f"row sum {sums[s, a]:.12g} ≠ 1 at ({s},{a})",
                             (int(s), int(a))))

    for g in sorted(mdp.goals):
        for a in range(m):
            others = [int(j) for j in np.flatnonzero(t[g, a] > 0) if j != g]
            if t[g, a, g] != 1.0 or others:
                out.append(Violation("goal-absorbing",
                                     f"goal {g} is not absorbing under action {a}",
                                     (g, a, g)))
            if c[g, a, g] != 0.0:
                out.append(Violation("goal-cost", f"goal {g} has nonzero cost under action {a}",
                                     (g, a, g)))

    nongoal = ~mdp.goal_mask
    bad = (t > 0) & (c < MIN_POSITIVE_COST) & nongoal[:, None, None]
    for s, a, s2 in zip(*np.nonzero(bad)):
        out.append(Violation("cost-positive",
                             f"non-goal transition ({s},{a},{s2}) has cost {c[s, a, s2]} < {MIN_POSITIVE_COST}",
                             (int(s), int(a), int(s2))))

    if mdp.goals:
        dist = goal_distances(mdp)
        for s in np.flatnonzero(dist < 0):
            out.append(Violation("unreachable", f"no goal reachable from state {s}", (int(s),)))
    return out


def is_valid(mdp: SspMdp) -> bool:
    return not validate(mdp)


def expected_cost(mdp: SspMdp, s: int, a: int) -> float:
    if not 0 <= s < mdp.num_states:
        raise IndexError(f"state {s} out of range [0, {mdp.num_states})")
    if not 0 <= a < mdp.num_actions:
        raise IndexError(f"action {a} out of range [0, {mdp.num_actions})")
    return float(mdp.expected_costs[s, a])


def as_stochastic(policy: np.ndarray, num_actions: int) -> np.ndarray:
    """Point-mass rows ``(S, A)`` for a deterministic policy."""
    policy = np.asarray(policy, dtype=int)
    probs = np.zeros((policy.size, num_actions))
    probs[np.arange(policy.size), policy] = 1.0
    return probs


def greedy_extract(probs: np.ndarray) -> np.ndarray:
    """Most probable action per state, lowest action id on ties."""
    return np.argmax(np.asarray(probs), axis=1)


def check_stochastic_policy(probs: np.ndarray, num_states: int, num_actions: int) -> None:
    probs = np.asarray(probs)
    if probs.shape != (num_states, num_actions):
        raise ValueError(f"policy shape {probs.shape} != ({num_states}, {num_actions})")
    if (probs < 0).any() or (probs > 1).any():
        raise ValueError("policy entries must lie in [0, 1]")
    if np.abs(probs.sum(axis=1) - 1).max() > ROW_SUM_TOL:
        raise ValueError("policy rows must sum to 1")


def policy_matrix(mdp: SspMdp, probs: np.ndarray) -> np.ndarray:
    """State-to-state transition matrix ``p(j | i; pi)`` under a stochastic policy."""
    return np.einsum("sa,sat->st", probs, mdp.transitions)


def is_proper(mdp: SspMdp, policy: np.ndarray) -> bool:
    """True when a goal is reachable from every state in the chain induced by
    ``policy``; for a finite chain that is reaching a goal with probability 1."""
    probs = policy if np.ndim(policy) == 2 else as_stochastic(policy, mdp.num_actions)
    adj = policy_matrix(mdp, probs) > 0
    reach = mdp.goal_mask.copy()
    while True:
        new = reach | (adj & reach[None, :]).any(axis=1)
        if (new == reach).all():
            return bool(reach.all())
        reach = new
