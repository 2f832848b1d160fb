import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sspmdp import (DivergenceError, EpsilonGreedy, SspMdp, Truncated, as_stochastic, compute_q,
                    initial_policy, is_proper, policy_evaluation, policy_improvement,
                    policy_iteration, random_proper_policy, random_ssp, value_iteration)

from oracles import (bfs_shortest_steps, optimal_by_enumeration, policy_value_linear,
                     truncated_cost_by_paths)

seeds = st.integers(0, 2**32 - 1)


def small_mdp(seed, max_states=20, max_actions=4):
    rng = np.random.default_rng(seed)
    return rng, random_ssp(rng, int(rng.integers(2, max_states + 1)),
                           int(rng.integers(1, max_actions + 1)))


class TestPolicyEvaluation:
    def test_chain_one_sweep(self, chain):
        v = policy_evaluation(chain, as_stochastic([0, 0], 1), Truncated(1))
        np.testing.assert_array_equal(v, [1.0, 0.0])

    def test_slip_chain_epsilon(self, slip):
        expected = policy_value_linear(slip.transitions, slip.costs, slip.goals, [0, 0])
        assert expected[0] == pytest.approx(2.0, abs=1e-12)
        v = policy_evaluation(slip, np.array([0, 0]), EpsilonGreedy(1e-10))
        assert v[0] == pytest.approx(2.0, abs=1e-8)

    def test_slip_chain_two_sweeps(self, slip):
        v = policy_evaluation(slip, np.array([0, 0]), Truncated(2))
        assert v[0] == 1.5

    def test_v0_and_goal_pinning(self, slip):
        v = policy_evaluation(slip, np.array([0, 0]), Truncated(1), v0=np.array([4.0, 7.0]))
        np.testing.assert_array_equal(v, [1.0 + 0.5 * 4.0, 0.0])

    def test_improper_policy_diverges(self):
        loop = SspMdp.from_entries(2, 2, [(0, 0, 0, 1.0, 1.0), (0, 1, 1, 1.0, 1.0),
                                          (1, 0, 1, 1.0, 0.0), (1, 1, 1, 1.0, 0.0)], goals=[1])
        with pytest.raises(DivergenceError):
            policy_evaluation(loop, np.array([0, 0]), EpsilonGreedy(1e-6, max_sweeps=500))

    def test_rejects_unnormalized_policy(self, chain):
        with pytest.raises(ValueError):
            policy_evaluation(chain, np.array([[0.5], [1.0]]), Truncated(1))

    def test_termination_validation(self):
        with pytest.raises(ValueError):
            EpsilonGreedy(0.0)
        with pytest.raises(ValueError):
            Truncated(0)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, k=st.integers(1, 5))
    def test_truncated_equals_path_enumeration(self, seed, k):
        rng, mdp = small_mdp(seed, max_states=6, max_actions=3)
        policy = rng.integers(mdp.num_actions, size=mdp.num_states)
        v = policy_evaluation(mdp, policy, Truncated(k))
        for s in range(mdp.num_states):
            assert v[s] == pytest.approx(
                truncated_cost_by_paths(mdp.transitions, mdp.costs, mdp.goals, policy, s, k),
                rel=1e-12, abs=1e-12)


class TestQAndImprovement:
    def test_two_action_q(self, twoact):
        q = compute_q(twoact, np.array([2.0, 0.0]))
        np.testing.assert_allclose(q, [[3.0, 2.0], [0.0, 0.0]])

    def test_zero_values_give_expected_cost(self):
        _, mdp = small_mdp(7)
        q = compute_q(mdp, np.zeros(mdp.num_states))
        np.testing.assert_allclose(q, mdp.expected_costs)

    def test_chain_q(self, chain):
        assert compute_q(chain, np.array([1.0, 0.0]))[0, 0] == 1.0

    def test_argmin_and_ties(self):
        np.testing.assert_array_equal(policy_improvement(np.array([[3.0, 2.0]])), [1])
        np.testing.assert_array_equal(policy_improvement(np.array([[2.0, 2.0]])), [0])
        np.testing.assert_array_equal(policy_improvement(np.array([[0.0, 0.0]])), [0])

    def test_current_action_kept_on_tie(self):
        q = np.array([[2.0, 2.0, 3.0], [1.0, 0.5, 0.5]])
        np.testing.assert_array_equal(policy_improvement(q, current=np.array([1, 0])), [1, 1])


class TestPolicyIteration:
    def test_two_action(self, twoact):
        best_v, best = optimal_by_enumeration(twoact.transitions, twoact.costs, twoact.goals)
        assert {p[0] for p in best} == {1} and best_v[0] == pytest.approx(2.0)
        report = policy_iteration(twoact, term=EpsilonGreedy(1e-10))
        assert report.policy[0] == 1
        assert report.values[0] == pytest.approx(2.0, abs=1e-8)
        assert report.converged

    def test_grid_det(self, grid_det):
        assert bfs_shortest_steps(grid_det.transitions, grid_det.goals, grid_det.start) == 6
        report = policy_iteration(grid_det)
        assert report.values[grid_det.start] == 6.0

    def test_chain_single_round(self, chain):
        report = policy_iteration(chain, init=np.array([0, 0]))
        assert report.policy[0] == 0 and report.improvement_rounds == 1
        assert report.sweeps_total >= report.improvement_rounds >= 1

    def test_initial_policy_is_proper(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            mdp = random_ssp(rng, int(rng.integers(2, 21)), int(rng.integers(1, 5)))
            assert is_proper(mdp, initial_policy(mdp))

    def test_random_proper_policy(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            mdp = random_ssp(rng, int(rng.integers(2, 21)), int(rng.integers(1, 5)))
            assert is_proper(mdp, random_proper_policy(mdp, rng))

    @settings(max_examples=25, deadline=None)
    @given(seed=seeds)
    def test_monotone_improvement(self, seed):
        _, mdp = small_mdp(seed)
        report = policy_iteration(mdp, term=EpsilonGreedy(1e-10))
        for prev, nxt in zip(report.history, report.history[1:]):
            assert (nxt.values <= prev.values + 1e-6).all()

    @settings(max_examples=25, deadline=None)
    @given(seed=seeds)
    def test_fixed_point_is_greedy(self, seed):
        _, mdp = small_mdp(seed)
        report = policy_iteration(mdp, term=EpsilonGreedy(1e-10))
        q = compute_q(mdp, report.values)
        chosen = q[np.arange(mdp.num_states), report.policy]
        assert (chosen <= q.min(axis=1) * (1 + 1e-10)).all()
        # where the minimiser is unique the tie rule is irrelevant
        np.testing.assert_array_equal(policy_improvement(q, current=report.policy), report.policy)

    @settings(max_examples=25, deadline=None)
    @given(seed=seeds)
    def test_vi_pi_agree(self, seed):
        _, mdp = small_mdp(seed)
        eps = 1e-10
        v_vi, _ = value_iteration(mdp, eps)
        report = policy_iteration(mdp, term=EpsilonGreedy(eps))
        np.testing.assert_allclose(v_vi, report.values, rtol=0, atol=10 * eps)

    def test_optimal_against_enumeration(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            mdp = random_ssp(rng, int(rng.integers(2, 6)), int(rng.integers(1, 4)))
            best_v, _ = optimal_by_enumeration(mdp.transitions, mdp.costs, mdp.goals)
            report = policy_iteration(mdp, term=EpsilonGreedy(1e-12))
            np.testing.assert_allclose(report.values, best_v, rtol=1e-8, atol=1e-8)


class TestValueIteration:
    def test_slip_chain(self, slip):
        v, policy = value_iteration(slip, 1e-12)
        assert v[0] == pytest.approx(2.0, abs=1e-8)

    def test_chain_exact(self, chain):
        v, policy = value_iteration(chain, 1e-12)
        assert v[0] == 1.0

    def test_grid_matches_pi(self, grid_det):
        v, _ = value_iteration(grid_det, 1e-12)
        np.testing.assert_allclose(v, policy_iteration(grid_det).values, atol=1e-8)
