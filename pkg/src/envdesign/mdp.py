"""Finite tabular MDPs: simulation and exact evaluation primitives.

Everything downstream (duality checks, maze environments, gradient
computations) works on the explicit tensor representation defined here:
a transition tensor indexed (s, a, s'), a reward matrix indexed (s, a),
a start distribution and a terminal set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EvaluationError

ROW_SUM_TOL = 1e-12


def _as_rng(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class TabularMdp:
    """Explicit finite MDP <S, A, P, R, gamma> with start distribution and terminals.

    transition has shape (S, A, S) with rows summing to 1; reward has shape
    (S, A); start_dist has shape (S,). Arrays are treated as immutable after
    construction.
    """

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    start_dist: np.ndarray
    terminal_states: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=float)
        r = np.asarray(self.reward, dtype=float)
        mu = np.asarray(self.start_dist, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise ConfigError(f"transition must have shape (S, A, S), got {p.shape}")
        s, a, _ = p.shape
        if r.shape != (s, a):
            raise ConfigError(f"reward shape {r.shape} does not match (S, A)=({s}, {a})")
        if mu.shape != (s,):
            raise ConfigError(f"start_dist shape {mu.shape} does not match S={s}")
        if not (0.0 < self.discount <= 1.0):
            raise ConfigError(f"discount must be in (0, 1], got {self.discount}")
        if np.any(p < 0) or np.any(p > 1):
            raise ConfigError("transition entries must lie in [0, 1]")
        row_sums = p.sum(axis=2)
        if np.max(np.abs(row_sums - 1.0)) > ROW_SUM_TOL:
            bad = np.unravel_index(np.argmax(np.abs(row_sums - 1.0)), row_sums.shape)
            raise ConfigError(f"transition row {bad} sums to {row_sums[bad]!r}, not 1")
        if np.any(mu < 0) or abs(mu.sum() - 1.0) > ROW_SUM_TOL:
            raise ConfigError("start_dist must be a probability vector")
        terminals = frozenset(int(t) for t in self.terminal_states)
        if any(t < 0 or t >= s for t in terminals):
            raise ConfigError(f"terminal state out of range [0, {s})")
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "start_dist", mu)
        object.__setattr__(self, "terminal_states", terminals)
        for arr in (p, r, mu):
            arr.setflags(write=False)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    def is_terminal(self, state: int) -> bool:
        return state in self.terminal_states


@dataclass(frozen=True)
class StochasticPolicy:
    """Action distribution per state: probs has shape (S, A), rows sum to 1."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2:
            raise ConfigError(f"policy probs must be 2-d, got shape {p.shape}")
        if np.any(p < 0) or np.any(p > 1):
            raise ConfigError("policy entries must lie in [0, 1]")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ConfigError("policy rows must sum to 1")
        object.__setattr__(self, "probs", p)
        p.setflags(write=False)

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered (state, action, reward) record of one episode.

    final_state is the state reached after the last recorded step (the
    terminal state for completed episodes); None when the successor was
    never drawn, as for dual-side trajectories that end with a terminal
    action.
    """

    steps: tuple[tuple[int, int, float], ...]
    terminated: bool
    final_state: int | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "steps", tuple((int(s), int(a), float(r)) for s, a, r in self.steps)
        )

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def states(self) -> list[int]:
        return [s for s, _, _ in self.steps]

    @property
    def rewards(self) -> list[float]:
        return [r for _, _, r in self.steps]


def _check_dims(mdp: TabularMdp, policy: StochasticPolicy) -> None:
    if (mdp.num_states, mdp.num_actions) != (policy.num_states, policy.num_actions):
        raise ConfigError(
            f"policy shape {policy.probs.shape} does not match MDP "
            f"({mdp.num_states} states, {mdp.num_actions} actions)"
        )


def sample_episode(mdp: TabularMdp, policy: StochasticPolicy, seed, max_steps: int) -> Trajectory:
    """Roll out one episode; stops at a terminal state or after max_steps steps."""
    _check_dims(mdp, policy)
    if max_steps < 1:
        raise ConfigError(f"max_steps must be positive, got {max_steps}")
    rng = _as_rng(seed)
    n = mdp.num_states
    state = int(rng.choice(n, p=mdp.start_dist))
    steps = []
    for _ in range(max_steps):
        if mdp.is_terminal(state):
            return Trajectory(tuple(steps), terminated=True, final_state=state)
        action = int(rng.choice(mdp.num_actions, p=policy.probs[state]))
        successor = int(rng.choice(n, p=mdp.transition[state, action]))
        steps.append((state, action, mdp.reward[state, action]))
        state = successor
    terminated = mdp.is_terminal(state)
    return Trajectory(tuple(steps), terminated=terminated, final_state=state)


def episode_return(traj: Trajectory, discount: float) -> float:
    """Discounted sum of the recorded rewards; 0 for an empty trajectory."""
    if not (0.0 < discount <= 1.0):
        raise ConfigError(f"discount must be in (0, 1], got {discount}")
    total = 0.0
    weight = 1.0
    for _, _, r in traj.steps:
        total += weight * r
        weight *= discount
    return total


def _policy_kernel(mdp: TabularMdp, policy: StochasticPolicy):
    """Policy-averaged transition matrix (S, S) and reward vector (S,)."""
    p_pi = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    r_pi = np.einsum("sa,sa->s", policy.probs, mdp.reward)
    return p_pi, r_pi


def _find_non_absorbing(mdp: TabularMdp, policy: StochasticPolicy) -> list[int]:
    """States from which no terminal state is reachable under the policy support."""
    p_pi, _ = _policy_kernel(mdp, policy)
    support = p_pi > 0
    n = mdp.num_states
    can_reach = np.zeros(n, dtype=bool)
    for t in mdp.terminal_states:
        can_reach[t] = True
    changed = True
    while changed:
        changed = False
        newly = support @ can_reach
        for s in range(n):
            if newly[s] and not can_reach[s]:
                can_reach[s] = True
                changed = True
    return [s for s in range(n) if not can_reach[s]]


def _spectral_radius(m: np.ndarray, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Power iteration on |m|; adequate for the small substochastic blocks here."""
    if m.size == 0:
        return 0.0
    v = np.full(m.shape[0], 1.0 / np.sqrt(m.shape[0]))
    a = np.abs(m)
    radius = 0.0
    for _ in range(max_iter):
        w = a @ v
        new_radius = np.linalg.norm(w)
        if new_radius == 0.0:
            return 0.0
        v = w / new_radius
        if abs(new_radius - radius) < tol:
            return new_radius
        radius = new_radius
    return radius


def exact_policy_value(mdp: TabularMdp, policy: StochasticPolicy) -> np.ndarray:
    """Solve the Bellman evaluation equations exactly (dense linear solve).

    V is 0 on terminal states. At gamma=1 the policy-induced chain must be
    absorbing; the substochastic block over non-terminal states is checked
    for spectral radius < 1 before solving.
    """
    _check_dims(mdp, policy)
    n = mdp.num_states
    v = np.zeros(n)
    non_terminal = [s for s in range(n) if not mdp.is_terminal(s)]
    if not non_terminal:
        return v
    p_pi, r_pi = _policy_kernel(mdp, policy)
    block = p_pi[np.ix_(non_terminal, non_terminal)]
    if mdp.discount >= 1.0:
        stuck = _find_non_absorbing(mdp, policy)
        if stuck:
            raise EvaluationError(
                f"gamma=1 with non-absorbing states {stuck}: terminal set unreachable"
            )
        if _spectral_radius(block) >= 1.0 - 1e-8:
            raise EvaluationError(
                "policy-induced chain is not absorbing (spectral radius >= 1)"
            )
    a = np.eye(len(non_terminal)) - mdp.discount * block
    v_nt = np.linalg.solve(a, r_pi[non_terminal])
    residual = np.max(np.abs(a @ v_nt - r_pi[non_terminal]))
    scale = max(1.0, np.max(np.abs(v_nt)))
    if residual > 1e-10 * scale:
        raise EvaluationError(f"linear solve residual {residual:g} exceeds tolerance")
    v[non_terminal] = v_nt
    return v


def expected_return(mdp: TabularMdp, policy: StochasticPolicy) -> float:
    """Expected discounted return from the start distribution."""
    return float(mdp.start_dist @ exact_policy_value(mdp, policy))


def state_occupancy(mdp: TabularMdp, policy: StochasticPolicy) -> np.ndarray:
    """Discounted visitation frequencies d(s) = sum_t gamma^(t-1) P[S_t = s].

    Zero on terminal states (no action is ever taken there).
    """
    _check_dims(mdp, policy)
    n = mdp.num_states
    non_terminal = [s for s in range(n) if not mdp.is_terminal(s)]
    d = np.zeros(n)
    if not non_terminal:
        return d
    p_pi, _ = _policy_kernel(mdp, policy)
    block = p_pi[np.ix_(non_terminal, non_terminal)]
    a = np.eye(len(non_terminal)) - mdp.discount * block.T
    d[non_terminal] = np.linalg.solve(a, mdp.start_dist[non_terminal])
    return d


def trajectory_probability(mdp: TabularMdp, policy: StochasticPolicy, traj: Trajectory) -> float:
    """Probability of generating exactly the recorded steps.

    Includes the start probability, one policy factor per step, transition
    factors between consecutive recorded states, and the transition into
    final_state when it is recorded.
    """
    _check_dims(mdp, policy)
    if not traj.steps:
        if traj.final_state is None:
            return 1.0
        return float(mdp.start_dist[traj.final_state])
    s0 = traj.steps[0][0]
    prob = float(mdp.start_dist[s0])
    for t, (s, a, _) in enumerate(traj.steps):
        prob *= float(policy.probs[s, a])
        if t + 1 < len(traj.steps):
            successor = traj.steps[t + 1][0]
        else:
            successor = traj.final_state
        if successor is not None:
            prob *= float(mdp.transition[s, a, successor])
    return prob
