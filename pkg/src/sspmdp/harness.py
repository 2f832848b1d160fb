"""Monte-Carlo execution of offline policies and online replanning modes.

Four ways to act in an SSP MDP:

* ``OfflinePolicy``: look up a precomputed policy.
* ``ReplanPolicy``: rerun policy iteration on the current model every step.
* ``ProbabilisticPlan``: rerun inference from the known current state and
  act on the action marginal ``p(a_0)``.
* ``DeterminizeReplan``: plan a shortest path in the most-likely-outcome
  determinization, replanning when the observed state leaves the plan.

Scripted :class:`CostEvent` changes let the environment drift during a
rollout; offline policies ignore them, online modes plan on the current model.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np

from .dp import EpsilonGreedy, EvalTermination, policy_iteration
from .inference import TimePrior, action_marginals, em_solve, forward_marginals
from .mdp import SspMdp, as_stochastic


class PlanningError(RuntimeError):
    """No goal is reachable in the determinized graph."""


@dataclass(frozen=True, eq=False)
class OfflinePolicy:
    policy: np.ndarray
    name: str = "offline"


@dataclass(frozen=True)
class ReplanPolicy:
    term: EvalTermination = EpsilonGreedy(1e-10)
    name: str = "replan"


@dataclass(frozen=True)
class ProbabilisticPlan:
    """Online inference. ``sample=True`` draws from ``p(a_0)`` instead of
    taking its argmax; meant for demonstrations only."""

    t_max: int
    prior: Optional[TimePrior] = None
    sample: bool = False
    name: str = "probplan"

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.prior is not None and self.prior.t_max != self.t_max:
            raise ValueError("prior truncation must equal t_max")


@dataclass(frozen=True)
class DeterminizeReplan:
    name: str = "determinize"


ExecutionMode = Union[OfflinePolicy, ReplanPolicy, ProbabilisticPlan, DeterminizeReplan]


@dataclass(frozen=True)
class CostEvent:
    """From step ``step`` on, costs of transitions entering ``states`` are
    multiplied by ``multiplier``."""

    step: int
    states: frozenset
    multiplier: float

    def apply(self, mdp: SspMdp) -> SspMdp:
        factor = np.ones(mdp.num_states)
        factor[list(self.states)] = self.multiplier
        costs = mdp.costs * factor[None, None, :]
        costs[mdp.goal_mask] = 0.0
        return mdp.with_costs(costs)


class Step(NamedTuple):
    state: int
    action: int
    cost: float
    next_state: int


@dataclass
class Trajectory:
    steps: list
    total_cost: float
    reached_goal: bool
    seed: int
    failed: bool = False
    decision_seconds: list = field(default_factory=list)
    table_entries: int = 0

    def states(self) -> list[int]:
        return [st.state for st in self.steps]


@dataclass
class RolloutStats:
    mode: str
    n: int
    mean_cost: float
    std_error: float
    goal_rate: float
    peak_table_entries: int
    mean_wallclock_per_decision: float = field(default=float("nan"), compare=False)


class DeterministicModel(NamedTuple):
    successor: np.ndarray  # (S, A) int
    cost: np.ndarray  # (S, A)


def determinize(mdp: SspMdp) -> DeterministicModel:
    """Keep only the most likely outcome of each ``(s, a)``, lowest id on ties."""
    succ = np.argmax(mdp.transitions, axis=2)
    s_idx, a_idx = np.indices(succ.shape)
    return DeterministicModel(succ, mdp.costs[s_idx, a_idx, succ])


def shortest_path_plan(model: DeterministicModel, s0: int, goals) -> list[int]:
    """Cheapest action sequence from ``s0`` to any goal.

    Dijkstra over labels ``(cost, actions)``; with positive costs the first
    goal popped carries the lexicographically smallest minimal-cost plan.
    """
    goals = frozenset(goals)
    if s0 in goals:
        return []
    heap = [(0.0, (), s0)]
    done = set()
    while heap:
        cost, plan, s = heapq.heappop(heap)
        if s in done:
            continue
        if s in goals:
            return list(plan)
        done.add(s)
        for a in range(model.successor.shape[1]):
            nxt = int(model.successor[s, a])
            if nxt not in done and nxt != s:
                heapq.heappush(heap, (cost + float(model.cost[s, a]), plan + (a,), nxt))
    raise PlanningError(f"no goal reachable from state {s0} in the determinized model")


def probabilistic_plan(mdp: SspMdp, s0: int, t_max: int,
                       prior: Optional[TimePrior] = None) -> np.ndarray:
    """Action marginals ``p(a_t)`` for ``t = 0..t_max`` starting from ``s0``."""
    report = em_solve(mdp, t_max, prior)
    probs = as_stochastic(report.policy, mdp.num_actions)
    return action_marginals(probs, forward_marginals(mdp, probs, s0, t_max))


class _Agent:
    """Per-rollout decision state for one execution mode."""

    def __init__(self, mode: ExecutionMode, rng: np.random.Generator):
        self.mode = mode
        self.rng = rng
        self.plan: list[int] = []
        self.expected: list[int] = []
        self.model_version = -1
        self.table_entries = 0

    def act(self, mdp: SspMdp, s: int, version: int) -> int:
        mode = self.mode
        n, m = mdp.num_states, mdp.num_actions
        if isinstance(mode, OfflinePolicy):
            self.table_entries = max(self.table_entries, n)
            return int(mode.policy[s])
        if isinstance(mode, ReplanPolicy):
            report = policy_iteration(mdp, term=mode.term)
            self.table_entries = max(self.table_entries, n * m + n)
            return int(report.policy[s])
        if isinstance(mode, ProbabilisticPlan):
            p_a = probabilistic_plan(mdp, s, mode.t_max, mode.prior)[0]
            self.table_entries = max(self.table_entries, (mode.t_max + 1) * (n + m))
            if mode.sample:
                return int(self.rng.choice(m, p=p_a / p_a.sum()))
            return int(np.argmax(p_a))
        if isinstance(mode, DeterminizeReplan):
            if version != self.model_version or not self.expected or self.expected[0] != s:
                model = determinize(mdp)
                self.table_entries = max(self.table_entries, 2 * n * m)
                self.plan = shortest_path_plan(model, s, mdp.goals)
                self.expected = [s]
                for a in self.plan[:-1]:
                    self.expected.append(int(model.successor[self.expected[-1], a]))
                self.model_version = version
            self.expected.pop(0)
            return self.plan.pop(0)
        raise TypeError(f"unknown execution mode {mode!r}")


def simulate(mdp: SspMdp, mode: ExecutionMode, s0: int, seed: int, max_steps: int,
             events: tuple = ()) -> Trajectory:
    """Roll out one episode.

    Successors are sampled from the (possibly event-modified) true model with
    ``numpy.random.default_rng(seed)``. A trajectory that exhausts
    ``max_steps`` ends with ``reached_goal=False``; a determinized planning
    failure ends it with ``failed=True``.
    """
    if not 0 <= s0 < mdp.num_states:
        raise ValueError(f"start state {s0} out of range")
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if isinstance(mode, OfflinePolicy) and np.shape(mode.policy) != (mdp.num_states,):
        raise ValueError("offline policy does not match the MDP")
    rng = np.random.default_rng(seed)
    agent = _Agent(mode, rng)
    events = sorted(events, key=lambda e: e.step)
    current, version = mdp, 0
    steps, timings = [], []
    s, total, failed = s0, 0.0, False
    for k in range(max_steps):
        if s in mdp.goals:
            break
        while events and events[0].step <= k:
            current = events.pop(0).apply(current)
            version += 1
        tic = time.perf_counter()
        try:
            a = agent.act(current, s, version)
        except PlanningError:
            failed = True
            break
        timings.append(time.perf_counter() - tic)
        nxt = int(rng.choice(mdp.num_states, p=current.transitions[s, a]))
        cost = float(current.costs[s, a, nxt])
        steps.append(Step(s, a, cost, nxt))
        total += cost
        s = nxt
    return Trajectory(steps, total, s in mdp.goals, seed, failed, timings, agent.table_entries)


def rollout_seed(seed: int, index: int) -> int:
    """Seed of rollout ``index``, independent of how many rollouts are run."""
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


def mode_name(mode: ExecutionMode) -> str:
    return mode.name


def evaluate_mode(mdp: SspMdp, mode: ExecutionMode, s0: int, n: int, seed: int,
                  max_steps: int = 1000, events: tuple = ()) -> RolloutStats:
    """Statistics of ``n`` independent rollouts, reduced in rollout order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    trajs = [simulate(mdp, mode, s0, rollout_seed(seed, k), max_steps, events) for k in range(n)]
    costs = np.array([tr.total_cost for tr in trajs])
    std_error = float(costs.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    timings = [t for tr in trajs for t in tr.decision_seconds]
    return RolloutStats(
        mode=mode_name(mode),
        n=n,
        mean_cost=float(costs.mean()),
        std_error=std_error,
        goal_rate=float(np.mean([tr.reached_goal for tr in trajs])),
        peak_table_entries=max(tr.table_entries for tr in trajs),
        mean_wallclock_per_decision=float(np.mean(timings)) if timings else 0.0,
    )


STATS_COLUMNS = ["mode", "n", "mean_cost", "std_error", "goal_rate",
                 "mean_wallclock_per_decision", "peak_table_entries"]


def stats_to_csv(rows: list[RolloutStats], timing: bool = False) -> str:
    """CSV with one row per mode. Wall-clock is blank unless ``timing`` is set,
    so default output is reproducible byte for byte."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(STATS_COLUMNS)
    for r in rows:
        wall = repr(r.mean_wallclock_per_decision) if timing else ""
        writer.writerow([r.mode, r.n, repr(r.mean_cost), repr(r.std_error), repr(r.goal_rate),
                         wall, r.peak_table_entries])
    return buf.getvalue()


def trajectory_to_json(traj: Trajectory) -> str:
    doc = {"seed": traj.seed, "total_cost": traj.total_cost, "reached_goal": traj.reached_goal,
           "failed": traj.failed, "steps": [list(st) for st in traj.steps]}
    return json.dumps(doc) + "\n"


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(Step._fields)
    writer.writerows(traj.steps)
    return buf.getvalue()


def stats_to_json(rows: list[RolloutStats], timing: bool = False) -> str:
    docs = []
    for r in rows:
        d = asdict(r)
        if not timing:
            d["mean_wallclock_per_decision"] = None
        docs.append(d)
    return json.dumps(docs, indent=1) + "\n"
