import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sspmdp import EpsilonGreedy, GridSpec, grid_to_mdp, policy_iteration, random_ssp
from sspmdp.harness import (CostEvent, DeterminizeReplan, OfflinePolicy, PlanningError,
                            ProbabilisticPlan, ReplanPolicy, determinize, evaluate_mode,
                            probabilistic_plan, rollout_seed, shortest_path_plan, simulate,
                            stats_to_csv, stats_to_json, trajectory_to_csv, trajectory_to_json)

from conftest import grid4
from oracles import bfs_shortest_steps


def check_chain(traj, mdp):
    for a, b in zip(traj.steps, traj.steps[1:]):
        assert a.next_state == b.state
    assert traj.total_cost == pytest.approx(sum(st.cost for st in traj.steps))
    if traj.reached_goal:
        assert traj.steps[-1].next_state in mdp.goals


class TestSimulate:
    def test_det_grid_offline(self, grid_det):
        pi = policy_iteration(grid_det).policy
        for seed in range(5):
            traj = simulate(grid_det, OfflinePolicy(pi), grid_det.start, seed, 100)
            assert traj.total_cost == 6 and traj.reached_goal
            check_chain(traj, grid_det)

    def test_start_in_goal(self, slip):
        traj = simulate(slip, OfflinePolicy(np.array([0, 0])), 1, 0, 10)
        assert traj.steps == [] and traj.total_cost == 0.0 and traj.reached_goal

    def test_step_budget_exhausted(self, slip):
        traj = simulate(slip, OfflinePolicy(np.array([0, 0])), 0, 3, 1)
        assert len(traj.steps) == 1
        if not traj.reached_goal:
            assert traj.steps[-1].next_state == 0

    def test_usage_errors(self, slip):
        with pytest.raises(ValueError):
            simulate(slip, OfflinePolicy(np.array([0, 0])), 5, 0, 10)
        with pytest.raises(ValueError):
            simulate(slip, OfflinePolicy(np.array([0, 0])), 0, 0, 0)
        with pytest.raises(ValueError):
            simulate(slip, OfflinePolicy(np.array([0])), 0, 0, 10)
        with pytest.raises(ValueError):
            ProbabilisticPlan(0)

    def test_all_modes_on_slip_grid(self):
        mdp = grid4(0.2)
        pi = policy_iteration(mdp).policy
        modes = [OfflinePolicy(pi), ReplanPolicy(), ProbabilisticPlan(32), DeterminizeReplan()]
        for mode in modes:
            traj = simulate(mdp, mode, mdp.start, 42, 500)
            assert traj.reached_goal
            check_chain(traj, mdp)

    def test_sampling_probabilistic_plan(self, twoact):
        traj = simulate(twoact, ProbabilisticPlan(10, sample=True), 0, 1, 50)
        assert traj.reached_goal and {st.action for st in traj.steps} == {1}

    def test_cost_event_changes_online_choice(self):
        # two routes to the goal; the event makes the shorter one expensive
        spec = GridSpec(3, 3, (0, 0), {(0, 2)}, obstacles={(1, 1)})
        mdp = grid_to_mdp(spec)
        pi = policy_iteration(mdp).policy
        top = frozenset({1})  # cell (0, 1)
        event = (CostEvent(0, top, 100.0),)
        offline = simulate(mdp, OfflinePolicy(pi), mdp.start, 0, 50, event)
        online = simulate(mdp, ReplanPolicy(), mdp.start, 0, 50, event)
        determ = simulate(mdp, DeterminizeReplan(), mdp.start, 0, 50, event)
        assert offline.total_cost == 101.0
        assert online.total_cost == determ.total_cost == 6.0

    def test_cost_event_keeps_goal_costs_zero(self, slip):
        changed = CostEvent(0, frozenset({0, 1}), 5.0).apply(slip)
        assert changed.costs[1].sum() == 0.0 and changed.costs[0, 0, 0] == 5.0


class TestDeterminize:
    def test_tie_goes_to_lower_state(self, slip):
        assert determinize(slip).successor[0, 0] == 0

    def test_slip_grid_most_likely(self):
        mdp = grid4(0.2)
        model = determinize(mdp)
        # state 5 is cell (1, 1); north lands on (0, 1) = state 1
        assert model.successor[5, 0] == 1 and model.cost[5, 0] == 1.0

    def test_plans(self, grid_det, chain):
        plan = shortest_path_plan(determinize(grid_det), grid_det.start, grid_det.goals)
        assert len(plan) == bfs_shortest_steps(grid_det.transitions, grid_det.goals, 0) == 6
        assert plan == [1, 1, 1, 2, 2, 2]  # lexicographically smallest: S S S E E E
        assert shortest_path_plan(determinize(grid_det), 15, grid_det.goals) == []
        assert shortest_path_plan(determinize(chain), 0, chain.goals) == [0]

    def test_unreachable(self, slip):
        with pytest.raises(PlanningError):
            shortest_path_plan(determinize(slip), 0, slip.goals)

    def test_failure_accounting(self, slip):
        traj = simulate(slip, DeterminizeReplan(), 0, 0, 10)
        assert traj.failed and not traj.reached_goal and traj.steps == []
        stats = evaluate_mode(slip, DeterminizeReplan(), 0, 5, 0)
        assert stats.goal_rate == 0.0

    def test_det_replan_equals_offline_optimum(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            spec = GridSpec(5, 4, (0, 0), {(int(rng.integers(1, 4)), 4)},
                            obstacles={(1, 2)}, step_cost=float(rng.uniform(0.5, 2)))
            mdp = grid_to_mdp(spec)
            opt = policy_iteration(mdp)
            traj = simulate(mdp, DeterminizeReplan(), mdp.start, 0, 100)
            assert traj.total_cost == pytest.approx(opt.values[mdp.start], rel=1e-12)


class TestEvaluateMode:
    def test_deterministic_stats(self, grid_det):
        pi = policy_iteration(grid_det).policy
        stats = evaluate_mode(grid_det, OfflinePolicy(pi), grid_det.start, 100, 0)
        assert (stats.mean_cost, stats.std_error, stats.goal_rate) == (6.0, 0.0, 1.0)

    def test_repeatable(self, slip):
        mode = OfflinePolicy(np.array([0, 0]))
        assert evaluate_mode(slip, mode, 0, 200, 9) == evaluate_mode(slip, mode, 0, 200, 9)

    @pytest.mark.slow
    def test_slip_chain_estimate(self, slip):
        stats = evaluate_mode(slip, OfflinePolicy(np.array([0, 0])), 0, 10_000, 2024)
        assert stats.goal_rate == 1.0
        assert abs(stats.mean_cost - 2.0) <= 3 * stats.std_error

    def test_seed_isolation(self, slip):
        mode = OfflinePolicy(np.array([0, 0]))
        short = [simulate(slip, mode, 0, rollout_seed(5, k), 100) for k in range(3)]
        assert rollout_seed(5, 2) == rollout_seed(5, 2)
        long = [simulate(slip, mode, 0, rollout_seed(5, k), 100) for k in range(10)]
        assert [t.steps for t in short] == [t.steps for t in long[:3]]

    def test_serialization(self, slip):
        mode = OfflinePolicy(np.array([0, 0]))
        rows = [evaluate_mode(slip, mode, 0, 10, 1)]
        csv_text = stats_to_csv(rows)
        header, line = csv_text.splitlines()
        assert header.split(",")[:5] == ["mode", "n", "mean_cost", "std_error", "goal_rate"]
        assert line.split(",")[5] == ""
        assert stats_to_json(rows).startswith("[")
        traj = simulate(slip, mode, 0, 3, 100)
        assert trajectory_to_csv(traj).startswith("state,action,cost,next_state")
        assert '"total_cost"' in trajectory_to_json(traj)


class TestModeAgreement:
    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_online_modes_match_offline_where_unique(self, seed):
        rng = np.random.default_rng(seed)
        mdp = random_ssp(rng, int(rng.integers(2, 9)), int(rng.integers(1, 4)))
        opt = policy_iteration(mdp, term=EpsilonGreedy(1e-10))
        s0 = int(np.flatnonzero(~mdp.goal_mask)[0])
        traj = simulate(mdp, ReplanPolicy(), s0, 0, 200)
        assert all(st.action == opt.policy[st.state] for st in traj.steps)

    def test_probabilistic_plan_marginals(self, grid_det):
        p_a = probabilistic_plan(grid_det, grid_det.start, 12)
        np.testing.assert_allclose(p_a.sum(axis=1), 1.0)
        assert np.argmax(p_a[0]) == policy_iteration(grid_det).policy[grid_det.start]
