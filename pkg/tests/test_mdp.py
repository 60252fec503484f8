"""Core MDP machinery: simulation, exact evaluation, trajectory probabilities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envdesign.errors import ConfigError, EvaluationError
from envdesign.duality import enumerate_trajectories
from envdesign.hard_maze import MazeMap, maze_mdp, shortest_path_length
from envdesign.mdp import (
    StochasticPolicy,
    TabularMdp,
    Trajectory,
    episode_return,
    exact_policy_value,
    expected_return,
    sample_episode,
    trajectory_probability,
)
from envdesign.soft_maze import optimal_agent_policy


def chain_mdp(discount=1.0):
    """Deterministic 3-state chain s0 -> s1 -> s2 (terminal), reward -1 per step."""
    p = np.zeros((3, 1, 3))
    p[0, 0, 1] = 1.0
    p[1, 0, 2] = 1.0
    p[2, 0, 2] = 1.0
    return TabularMdp(
        transition=p,
        reward=np.full((3, 1), -1.0),
        discount=discount,
        start_dist=np.array([1.0, 0.0, 0.0]),
        terminal_states=frozenset({2}),
    )


def chain_policy():
    return StochasticPolicy(np.ones((3, 1)))


def random_pair(seed, ns=5, na=3, discount=0.9, terminal=()):
    rng = np.random.default_rng(seed)
    p = rng.random((ns, na, ns)) + 0.1
    p /= p.sum(axis=2, keepdims=True)
    start = rng.random(ns) + 0.1
    start /= start.sum()
    pol = rng.random((ns, na)) + 0.1
    pol /= pol.sum(axis=1, keepdims=True)
    mdp = TabularMdp(
        transition=p,
        reward=rng.normal(size=(ns, na)),
        discount=discount,
        start_dist=start,
        terminal_states=frozenset(terminal),
    )
    return mdp, StochasticPolicy(pol)


class TestConstructors:
    def test_rejects_bad_row_sum(self):
        p = np.zeros((2, 1, 2))
        p[0, 0, 0] = 0.9
        p[1, 0, 1] = 1.0
        with pytest.raises(ConfigError):
            TabularMdp(p, np.zeros((2, 1)), 0.9, np.array([1.0, 0.0]))

    def test_rejects_negative_entry(self):
        p = np.zeros((2, 1, 2))
        p[0, 0] = [1.5, -0.5]
        p[1, 0, 1] = 1.0
        with pytest.raises(ConfigError):
            TabularMdp(p, np.zeros((2, 1)), 0.9, np.array([1.0, 0.0]))

    def test_rejects_bad_start_dist(self):
        p = np.zeros((2, 1, 2))
        p[:, 0, 1] = 1.0
        with pytest.raises(ConfigError):
            TabularMdp(p, np.zeros((2, 1)), 0.9, np.array([0.7, 0.7]))

    def test_rejects_terminal_out_of_range(self):
        p = np.zeros((2, 1, 2))
        p[:, 0, 1] = 1.0
        with pytest.raises(ConfigError):
            TabularMdp(p, np.zeros((2, 1)), 0.9, np.array([1.0, 0.0]), frozenset({5}))

    def test_rejects_policy_row_sum(self):
        with pytest.raises(ConfigError):
            StochasticPolicy(np.array([[0.5, 0.4]]))

    def test_arrays_frozen(self):
        mdp = chain_mdp()
        with pytest.raises(ValueError):
            mdp.transition[0, 0, 0] = 1.0


class TestSampleEpisode:
    def test_start_in_terminal_gives_empty_trajectory(self):
        p = np.ones((1, 1, 1))
        mdp = TabularMdp(p, np.zeros((1, 1)), 1.0, np.array([1.0]), frozenset({0}))
        traj = sample_episode(mdp, StochasticPolicy(np.ones((1, 1))), 0, 10)
        assert traj.steps == ()
        assert traj.terminated
        assert traj.final_state == 0

    def test_deterministic_chain(self):
        traj = sample_episode(chain_mdp(), chain_policy(), 0, 100)
        assert traj.steps == ((0, 0, -1.0), (1, 0, -1.0))
        assert traj.terminated
        assert traj.final_state == 2

    def test_opt_policy_on_empty_hard_maze_takes_shortest_path(self):
        maze = MazeMap(5)
        oracle_length = shortest_path_length(maze)  # BFS oracle: 8
        assert oracle_length == 8
        mdp = maze_mdp(maze)
        policy = optimal_agent_policy(mdp)
        traj = sample_episode(mdp, policy, 0, 500)
        assert traj.terminated
        assert len(traj) == oracle_length

    def test_step_cap(self):
        mdp, policy = random_pair(0)
        traj = sample_episode(mdp, policy, 1, 7)
        assert len(traj) == 7
        assert not traj.terminated

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            sample_episode(chain_mdp(), StochasticPolicy(np.ones((2, 1))), 0, 5)


class TestEpisodeReturn:
    def test_empty(self):
        assert episode_return(Trajectory((), terminated=True, final_state=0), 1.0) == 0.0

    def test_direct_sum(self):
        traj = Trajectory(((0, 0, -1.0), (1, 0, -1.0), (0, 0, -1.0)), terminated=False)
        assert episode_return(traj, 1.0) == -3.0

    def test_maze_trajectory_return_is_negated_length(self):
        maze = MazeMap(5)
        mdp = maze_mdp(maze)
        policy = optimal_agent_policy(mdp)
        traj = sample_episode(mdp, policy, 3, 500)
        assert episode_return(traj, 1.0) == -len(traj)

    @given(scale=st.floats(-5, 5), seed=st.integers(0, 100))
    @settings(max_examples=25, deadline=None)
    def test_linear_in_rewards(self, scale, seed):
        rng = np.random.default_rng(seed)
        rewards = rng.normal(size=4)
        base = Trajectory(tuple((0, 0, r) for r in rewards), terminated=False)
        scaled = Trajectory(tuple((0, 0, scale * r) for r in rewards), terminated=False)
        assert episode_return(scaled, 0.9) == pytest.approx(
            scale * episode_return(base, 0.9), abs=1e-12
        )


def value_iteration_oracle(mdp, policy, sweeps=100_000, tol=1e-12):
    """Independent fixed-point iteration for policy evaluation."""
    v = np.zeros(mdp.num_states)
    terminal = np.array([mdp.is_terminal(s) for s in range(mdp.num_states)])
    for _ in range(sweeps):
        q = mdp.reward + mdp.discount * mdp.transition @ v
        v_new = np.where(terminal, 0.0, np.einsum("sa,sa->s", policy.probs, q))
        if np.max(np.abs(v_new - v)) < tol:
            return v_new
        v = v_new
    return v


class TestExactPolicyValue:
    def test_zero_rewards_give_zero_values(self):
        mdp, policy = random_pair(1)
        zeroed = TabularMdp(
            mdp.transition, np.zeros_like(mdp.reward), mdp.discount,
            mdp.start_dist, mdp.terminal_states,
        )
        assert np.allclose(exact_policy_value(zeroed, policy), 0.0)

    def test_chain_backward_induction(self):
        v = exact_policy_value(chain_mdp(), chain_policy())
        assert np.allclose(v, [-2.0, -1.0, 0.0])

    def test_matches_value_iteration_oracle(self):
        mdp, policy = random_pair(2, ns=5, na=3, discount=0.9)
        v = exact_policy_value(mdp, policy)
        oracle = value_iteration_oracle(mdp, policy)
        assert np.max(np.abs(v - oracle)) < 1e-9

    def test_non_absorbing_at_gamma_one_raises(self):
        p = np.zeros((2, 1, 2))
        p[0, 0, 0] = 1.0  # state 0 loops forever
        p[1, 0, 1] = 1.0
        mdp = TabularMdp(p, -np.ones((2, 1)), 1.0, np.array([1.0, 0.0]), frozenset({1}))
        with pytest.raises(EvaluationError) as err:
            exact_policy_value(mdp, StochasticPolicy(np.ones((2, 1))))
        assert "0" in str(err.value)


def sample_returns_vectorized(mdp, policy, n_episodes, horizon, seed):
    """Batched Monte-Carlo episode returns; independent of sample_episode."""
    rng = np.random.default_rng(seed)
    states = rng.choice(mdp.num_states, size=n_episodes, p=mdp.start_dist)
    returns = np.zeros(n_episodes)
    alive = np.ones(n_episodes, dtype=bool)
    terminal = np.zeros(mdp.num_states, dtype=bool)
    for t in list(mdp.terminal_states):
        terminal[t] = True
    pol_cdf = np.cumsum(policy.probs, axis=1)
    trans_cdf = np.cumsum(mdp.transition, axis=2)
    weight = 1.0
    for _ in range(horizon):
        alive = alive & ~terminal[states]
        if not alive.any():
            break
        u = rng.random(n_episodes)
        actions = (u[:, None] > pol_cdf[states]).sum(axis=1)
        returns[alive] += weight * mdp.reward[states[alive], actions[alive]]
        u2 = rng.random(n_episodes)
        successors = (u2[:, None] > trans_cdf[states, actions]).sum(axis=1)
        states = np.where(alive, successors, states)
        weight *= mdp.discount
    return returns


class TestExpectedReturn:
    def test_chain_start(self):
        assert expected_return(chain_mdp(), chain_policy()) == pytest.approx(-2.0)

    def test_uniform_start_over_non_terminal(self):
        mdp = chain_mdp()
        shifted = TabularMdp(
            mdp.transition, mdp.reward, mdp.discount,
            np.array([0.5, 0.5, 0.0]), mdp.terminal_states,
        )
        assert expected_return(shifted, chain_policy()) == pytest.approx(-1.5)

    def test_monte_carlo_oracle(self):
        mdp, policy = random_pair(3, ns=5, na=2, discount=0.9)
        n = 1_000_000
        returns = sample_returns_vectorized(mdp, policy, n, horizon=250, seed=0)
        exact = expected_return(mdp, policy)
        se = returns.std(ddof=1) / np.sqrt(n)
        assert abs(returns.mean() - exact) < 3 * se

    def test_monte_carlo_consistency_with_terminals(self):
        mdp, policy = random_pair(4, ns=4, na=2, discount=0.95, terminal=(3,))
        n = 100_000
        returns = sample_returns_vectorized(mdp, policy, n, horizon=400, seed=1)
        exact = expected_return(mdp, policy)
        se = returns.std(ddof=1) / np.sqrt(n)
        assert abs(returns.mean() - exact) < 4 * se


class TestTrajectoryProbability:
    def test_deterministic_trajectory_has_probability_one(self):
        traj = sample_episode(chain_mdp(), chain_policy(), 0, 10)
        assert trajectory_probability(chain_mdp(), chain_policy(), traj) == 1.0

    def test_zero_probability_transition_annihilates(self):
        traj = Trajectory(((0, 0, -1.0), (2, 0, -1.0)), terminated=False, final_state=2)
        assert trajectory_probability(chain_mdp(), chain_policy(), traj) == 0.0

    def test_two_step_prefixes_sum_to_one(self):
        mdp, policy = random_pair(5, ns=3, na=2, discount=0.9)
        total = 0.0
        for s1 in range(3):
            for a1 in range(2):
                for s2 in range(3):
                    for a2 in range(2):
                        for s3 in range(3):
                            traj = Trajectory(
                                ((s1, a1, 0.0), (s2, a2, 0.0)),
                                terminated=False,
                                final_state=s3,
                            )
                            total += trajectory_probability(mdp, policy, traj)
        assert total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_bounded_length_mass_plus_survival_is_one(self, seed):
        max_len = 4
        mdp, policy = random_pair(seed, ns=4, na=2, discount=0.9, terminal=(3,))
        total = 0.0
        for traj in enumerate_trajectories(mdp, policy, max_len):
            completed = traj.terminated
            if completed or len(traj) == max_len:
                total += trajectory_probability(mdp, policy, traj)
        # Survivor prefixes of exactly max_len steps carry the remaining mass.
        assert total == pytest.approx(1.0, abs=1e-12)
