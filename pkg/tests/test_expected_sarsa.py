"""Tabular expected-SARSA against an exact linear solve of the Bellman system."""

import numpy as np
import pytest

from fleetlab.marl import TabularMdp, tabular_expected_sarsa


def solve_bellman_q(mdp: TabularMdp, policy: np.ndarray, gamma: float) -> np.ndarray:
    """Independent oracle: solve Q = R + gamma * T Pi Q exactly on (s, a) space."""
    n_s, n_a = mdp.n_states, mdp.n_actions
    dim = n_s * n_a
    # T maps (s,a) -> distribution over s'; Pi maps s' -> distribution over (s',a')
    t = mdp.transitions.reshape(dim, n_s)
    pi = np.zeros((n_s, dim))
    for s in range(n_s):
        for a in range(n_a):
            pi[s, s * n_a + a] = policy[s, a]
    lhs = np.eye(dim) - gamma * (t @ pi)
    q = np.linalg.solve(lhs, mdp.rewards.reshape(dim))
    return q.reshape(n_s, n_a)


def deterministic_mdp(rng, n_states, n_actions) -> TabularMdp:
    transitions = np.zeros((n_states, n_actions, n_states))
    next_state = rng.integers(n_states, size=(n_states, n_actions))
    for s in range(n_states):
        for a in range(n_actions):
            transitions[s, a, next_state[s, a]] = 1.0
    rewards = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
    return TabularMdp(transitions, rewards)


def random_policy(rng, n_states, n_actions) -> np.ndarray:
    p = rng.uniform(0.1, 1.0, size=(n_states, n_actions))
    return p / p.sum(axis=1, keepdims=True)


class TestSpecCases:
    def test_single_state_single_action_geometric_series(self):
        mdp = TabularMdp(np.ones((1, 1, 1)), np.ones((1, 1)))
        policy = np.ones((1, 1))
        q = tabular_expected_sarsa(mdp, policy, alpha_schedule=1.0, gamma=0.9, steps=300)
        assert q[0, 0] == pytest.approx(10.0, abs=1e-3)

    def test_two_state_deterministic_chain_matches_linear_solve(self):
        # state 0 -(either action)-> state 1, state 1 loops to itself
        transitions = np.zeros((2, 2, 2))
        transitions[0, :, 1] = 1.0
        transitions[1, :, 1] = 1.0
        rewards = np.array([[1.0, 0.5], [0.0, 0.25]])
        mdp = TabularMdp(transitions, rewards)
        policy = np.full((2, 2), 0.5)
        q = tabular_expected_sarsa(mdp, policy, alpha_schedule=1.0, gamma=0.9, steps=2000)
        expected = solve_bellman_q(mdp, policy, 0.9)
        assert np.abs(q - expected).max() < 1e-3

    def test_gamma_zero_recovers_immediate_reward_after_one_sweep(self, rng):
        mdp = deterministic_mdp(rng, 4, 3)
        policy = random_policy(rng, 4, 3)
        q = tabular_expected_sarsa(mdp, policy, alpha_schedule=1.0, gamma=0.0, steps=12)
        np.testing.assert_allclose(q, mdp.rewards)


class TestRandomMdps:
    def test_deterministic_mdps_converge_to_linear_solution(self, rng):
        for _ in range(8):
            n_s = int(rng.integers(2, 11))
            n_a = int(rng.integers(1, 5))
            mdp = deterministic_mdp(rng, n_s, n_a)
            policy = random_policy(rng, n_s, n_a)
            q = tabular_expected_sarsa(
                mdp, policy, alpha_schedule=1.0, gamma=0.9, steps=200 * n_s * n_a
            )
            expected = solve_bellman_q(mdp, policy, 0.9)
            assert np.abs(q - expected).max() < 1e-3

    def test_stochastic_transitions_with_decaying_alpha(self, rng):
        # noisy Robbins-Monro regime: polynomial step decay, coarser tolerance
        n_s, n_a = 3, 2
        transitions = rng.uniform(0.05, 1.0, size=(n_s, n_a, n_s))
        transitions /= transitions.sum(axis=2, keepdims=True)
        mdp = TabularMdp(transitions, rng.uniform(size=(n_s, n_a)))
        policy = random_policy(rng, n_s, n_a)
        q = tabular_expected_sarsa(
            mdp,
            policy,
            alpha_schedule=lambda visits: visits**-0.6,
            gamma=0.9,
            steps=120_000,
            seed=5,
        )
        expected = solve_bellman_q(mdp, policy, 0.9)
        assert np.abs(q - expected).max() < 0.05
