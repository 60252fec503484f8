"""The dual MDP-policy construction and its numeric verification.

Swapping roles turns the environment's transition function into a policy:
dual states are (state, action) pairs of the original process, dual
actions are original successor states, dual transitions encode the
original agent's policy, and the original transition rows become the
dual policy. Trajectory distributions, per-trajectory returns and
expected returns all coincide across the pair, which is what
verify_duality checks; dual_policy_gradient exploits the construction to
differentiate the agent's expected return with respect to transition
parameters.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, MappingError
from .mdp import (
    StochasticPolicy,
    TabularMdp,
    Trajectory,
    exact_policy_value,
    expected_return,
    episode_return,
    state_occupancy,
    trajectory_probability,
)


@dataclass(frozen=True)
class DualPair:
    """Dual MDP over composite (state, action) pairs, plus the index bookkeeping.

    Composite indexing is row-major: pair (s, a) maps to s * num_actions + a.
    terminal_action_set holds the dual actions (original states) that end an
    episode when chosen.
    """

    dual_mdp: TabularMdp
    dual_policy: StochasticPolicy
    num_orig_states: int
    num_orig_actions: int
    terminal_action_set: frozenset[int]

    def composite_index(self, state: int, action: int) -> int:
        return state * self.num_orig_actions + action

    def composite_pair(self, index: int) -> tuple[int, int]:
        return divmod(index, self.num_orig_actions)


def build_dual(mdp: TabularMdp, policy: StochasticPolicy) -> DualPair:
    """Materialize the full dual tensor; intended for small MDPs only.

    Composite states whose original-state component is terminal are marked
    terminal in the dual MDP: an episode that takes a terminal dual action
    stops before any further reward, matching the original process.
    """
    if (mdp.num_states, mdp.num_actions) != (policy.num_states, policy.num_actions):
        raise ConfigError("policy dimensions do not match the MDP")
    if not mdp.terminal_states and mdp.discount >= 1.0:
        raise ConfigError("dual construction needs a terminal state or discount < 1")
    ns, na = mdp.num_states, mdp.num_actions
    n_dual = ns * na

    # P^E[(s,a), s', (s'',a')] = pi(a'|s') if s' == s'' else 0
    dual_p = np.zeros((n_dual, ns, n_dual))
    for s in range(ns):
        for a in range(na):
            i = s * na + a
            for s2 in range(ns):
                dual_p[i, s2, s2 * na : (s2 + 1) * na] = policy.probs[s2]

    # R^E[(s,a), any] = R(s,a); start p1^E(s,a) = p1(s) pi(a|s)
    dual_r = np.repeat(mdp.reward.reshape(n_dual, 1), ns, axis=1)
    dual_start = (mdp.start_dist[:, None] * policy.probs).reshape(n_dual)
    dual_terminals = frozenset(
        s * na + a for s in mdp.terminal_states for a in range(na)
    )
    dual_mdp = TabularMdp(
        transition=dual_p,
        reward=dual_r,
        discount=mdp.discount,
        start_dist=dual_start,
        terminal_states=dual_terminals,
    )
    dual_policy = StochasticPolicy(mdp.transition.reshape(n_dual, ns).copy())
    return DualPair(
        dual_mdp=dual_mdp,
        dual_policy=dual_policy,
        num_orig_states=ns,
        num_orig_actions=na,
        terminal_action_set=frozenset(mdp.terminal_states),
    )


def map_trajectory(traj: Trajectory, pair: DualPair) -> Trajectory:
    """Map a completed original trajectory to its dual counterpart.

    The dual episode ends by taking a terminal action, so no dual successor
    state is drawn: final_state is None on the dual side.
    """
    if not traj.terminated:
        raise MappingError("bijection is defined on completed episodes only")
    return _map_any(traj, pair)


def _map_any(traj: Trajectory, pair: DualPair) -> Trajectory:
    """Trajectory mapping without the completed-episode requirement."""
    steps = []
    for t, (s, a, r) in enumerate(traj.steps):
        if t + 1 < len(traj.steps):
            successor = traj.steps[t + 1][0]
        else:
            successor = traj.final_state
        if successor is None:
            raise MappingError("original trajectory lacks a recorded successor")
        steps.append((pair.composite_index(s, a), successor, r))
    return Trajectory(tuple(steps), terminated=traj.terminated, final_state=None)


def inverse_map_trajectory(traj: Trajectory, pair: DualPair) -> Trajectory:
    """Recover the original trajectory from a dual one, checking support."""
    steps = []
    prev_action = None
    for dual_state, dual_action, r in traj.steps:
        s, a = pair.composite_pair(dual_state)
        if prev_action is not None and prev_action != s:
            raise MappingError(
                f"composite state {dual_state} does not continue from "
                f"previous dual action {prev_action}"
            )
        if pair.dual_policy.probs[dual_state, dual_action] == 0.0:
            raise MappingError(
                f"dual action {dual_action} has zero probability in composite "
                f"state {dual_state}"
            )
        steps.append((s, a, r))
        prev_action = dual_action
    return Trajectory(tuple(steps), terminated=traj.terminated, final_state=prev_action)


def enumerate_trajectories(
    mdp: TabularMdp, policy: StochasticPolicy, max_len: int
):
    """Yield every positive-probability trajectory with at most max_len steps.

    Completed episodes (successor terminal) are yielded with terminated=True;
    all other sequences are prefixes, yielded with terminated=False. Only
    meant for tiny MDPs.
    """
    ns = mdp.num_states
    for s0 in range(ns):
        if mdp.start_dist[s0] == 0.0:
            continue
        if mdp.is_terminal(s0):
            yield Trajectory((), terminated=True, final_state=s0)
            continue
        stack = [((), s0)]
        while stack:
            steps, state = stack.pop()
            if len(steps) >= max_len:
                continue
            for a in range(mdp.num_actions):
                if policy.probs[state, a] == 0.0:
                    continue
                r = mdp.reward[state, a]
                for s2 in range(ns):
                    if mdp.transition[state, a, s2] == 0.0:
                        continue
                    new_steps = steps + ((state, a, r),)
                    done = mdp.is_terminal(s2)
                    yield Trajectory(new_steps, terminated=done, final_state=s2)
                    if not done:
                        stack.append((new_steps, s2))


@dataclass(frozen=True)
class DualityReport:
    """Maximum deviations for the three duality properties, plus pass/fail."""

    max_probability_gap: float
    max_return_gap: float
    expected_return_gap: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return (
            self.max_probability_gap <= self.tolerance
            and self.max_return_gap <= self.tolerance
            and self.expected_return_gap <= self.tolerance
        )

    def as_records(self) -> list[tuple[str, float, bool]]:
        """(check name, max deviation, pass) rows for serialization."""
        return [
            ("trajectory_probability", self.max_probability_gap,
             self.max_probability_gap <= self.tolerance),
            ("trajectory_return", self.max_return_gap,
             self.max_return_gap <= self.tolerance),
            ("expected_return", self.expected_return_gap,
             self.expected_return_gap <= self.tolerance),
        ]


def verify_duality(
    mdp: TabularMdp, policy: StochasticPolicy, tolerance: float = 1e-9
) -> DualityReport:
    """Check the three duality properties numerically.

    Trajectory probabilities and returns are compared exhaustively over all
    positive-probability trajectories of up to 4 steps (completed episodes
    and prefixes alike); expected returns are compared via exact linear
    solves on both MDPs.
    """
    pair = build_dual(mdp, policy)
    max_prob_gap = 0.0
    max_return_gap = 0.0
    for traj in enumerate_trajectories(mdp, policy, max_len=4):
        dual_traj = _map_any(traj, pair) if traj.steps else Trajectory(
            (), terminated=traj.terminated, final_state=None
        )
        p_orig = trajectory_probability(mdp, policy, traj)
        p_dual = trajectory_probability(pair.dual_mdp, pair.dual_policy, dual_traj)
        if not traj.steps:
            # Start-in-terminal episode: dual mass is the summed start weight
            # over composite pairs built on that state.
            s0 = traj.final_state
            p_dual = float(
                sum(
                    pair.dual_mdp.start_dist[pair.composite_index(s0, a)]
                    for a in range(pair.num_orig_actions)
                )
            )
        max_prob_gap = max(max_prob_gap, abs(p_orig - p_dual))
        g_orig = episode_return(traj, mdp.discount)
        g_dual = episode_return(dual_traj, mdp.discount)
        max_return_gap = max(max_return_gap, abs(g_orig - g_dual))
    exp_gap = abs(
        expected_return(mdp, policy)
        - expected_return(pair.dual_mdp, pair.dual_policy)
    )
    return DualityReport(max_prob_gap, max_return_gap, exp_gap, tolerance)


@dataclass(frozen=True)
class ParametrizedMdp:
    """MDP whose transition tensor is a differentiable function of theta.

    transition_fn(theta) returns the (S, A, S) tensor; jacobian_fn(theta)
    returns its derivative with shape (S, A, S, K) where K = len(theta).
    Reward, discount, start distribution and terminals are fixed.
    """

    reward: np.ndarray
    discount: float
    start_dist: np.ndarray
    terminal_states: frozenset[int]
    theta: np.ndarray
    transition_fn: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Callable[[np.ndarray], np.ndarray]

    def build(self) -> TabularMdp:
        return TabularMdp(
            transition=self.transition_fn(self.theta),
            reward=self.reward,
            discount=self.discount,
            start_dist=self.start_dist,
            terminal_states=self.terminal_states,
        )


def dual_policy_gradient(
    parametrized: ParametrizedMdp, agent_policy: StochasticPolicy
) -> np.ndarray:
    """Gradient of the agent's expected return w.r.t. transition parameters,
    computed as the policy gradient of the dual policy in the explicitly
    constructed dual MDP.

    Uses the exact form: sum over dual states of occupancy times
    grad pi^E(a^E | s^E) Q^E(s^E, a^E), with occupancy and Q^E obtained
    from dense linear solves. The environment descends this gradient.
    """
    mdp = parametrized.build()
    jac = np.asarray(parametrized.jacobian_fn(parametrized.theta), dtype=float)
    ns, na = mdp.num_states, mdp.num_actions
    k = parametrized.theta.shape[0]
    if jac.shape != (ns, na, ns, k):
        raise ConfigError(
            f"jacobian shape {jac.shape} does not match (S, A, S, K)="
            f"({ns}, {na}, {ns}, {k})"
        )
    pair = build_dual(mdp, agent_policy)
    dual = pair.dual_mdp
    n_dual = dual.num_states

    v_dual = exact_policy_value(dual, pair.dual_policy)
    # Q^E(s^E, a^E) = R^E(s^E, a^E) + gamma * sum_{s^E'} P^E v^E
    q_dual = dual.reward + dual.discount * np.einsum(
        "iaj,j->ia", dual.transition, v_dual
    )
    occupancy = state_occupancy(dual, pair.dual_policy)
    # grad pi^E((s,a) -> s') is exactly the transition jacobian row (s,a,s').
    grad_pi = jac.reshape(n_dual, ns, k)
    return np.einsum("i,ia,iak->k", occupancy, q_dual, grad_pi)
