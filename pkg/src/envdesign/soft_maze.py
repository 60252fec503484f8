"""Soft-wall mazes: per-cell blockage probabilities optimized by the
transition gradient.

Each cell except the end carries a blockage probability; a move toward a
cell fails (the agent stays put) with that probability. The blockage
vector lives on the constrained simplex {sum p = 1, 0 <= p <= 1/2} and
is parametrized by unconstrained logits through a capped softmax. The
environment descends the exact gradient of the agent's expected return
with respect to the logits, re-optimizing the agent between steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NoProperPolicyError
from .mdp import (
    StochasticPolicy,
    TabularMdp,
    _as_rng,
    episode_return,
    exact_policy_value,
    expected_return,
    sample_episode,
    state_occupancy,
)
from .agents import QLearningConfig, q_learning_train

BLOCKAGE_CAP = 0.5

# Same action order as the hard maze: N, S, W, E.
DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class SoftMazeConfig:
    """Grid geometry and episode settings; start (0,0), end (side-1, side-1)."""

    side: int
    discount: float = 0.99
    step_reward: float = -1.0
    step_cap: int | None = None

    def __post_init__(self):
        if self.side < 2:
            raise ConfigError(f"side must be >= 2, got {self.side}")
        cap = self.step_cap if self.step_cap is not None else 8 * self.side**2
        if cap < 2 * (self.side - 1):
            raise ConfigError(f"step_cap {cap} below shortest path {2 * (self.side - 1)}")
        object.__setattr__(self, "step_cap", cap)

    @property
    def num_cells(self) -> int:
        return self.side**2

    @property
    def num_blockage_cells(self) -> int:
        """All cells except the end cell; row-major, end cell is the last index."""
        return self.num_cells - 1


def blockage_distribution(logits: np.ndarray, cap: float = BLOCKAGE_CAP) -> np.ndarray:
    """Capped softmax: softmax, then clamp entries above cap and redistribute
    the excess proportionally among the uncapped entries until none exceeds cap.
    """
    z = np.asarray(logits, dtype=float)
    if z.ndim != 1 or z.size < 3:
        raise ConfigError(f"need at least 3 logits for cap {cap} with unit sum, got {z.size}")
    shifted = z - z.max()
    weights = np.exp(shifted)
    p = weights / weights.sum()
    capped = np.zeros(z.size, dtype=bool)
    while True:
        over = (p > cap) & ~capped
        if not over.any():
            break
        capped |= over
        free_mass = 1.0 - cap * capped.sum()
        p = np.where(capped, cap, 0.0)
        uncapped = ~capped
        if free_mass > 0 and weights[uncapped].sum() > 0:
            p[uncapped] = free_mass * weights[uncapped] / weights[uncapped].sum()
    return p


def blockage_jacobian(logits: np.ndarray, cap: float = BLOCKAGE_CAP) -> np.ndarray:
    """d blockage / d logits, treating capped coordinates as constants.

    On the uncapped set the distribution is free_mass times a softmax, so
    dp_i/dz_k = p_i (delta_ik - p_k / free_mass); capped rows and columns
    are zero.
    """
    p = blockage_distribution(logits, cap)
    capped = p >= cap - 1e-15
    free_mass = 1.0 - cap * capped.sum()
    jac = np.zeros((p.size, p.size))
    if free_mass <= 0:
        return jac
    uncapped = np.flatnonzero(~capped)
    pu = p[uncapped]
    jac[np.ix_(uncapped, uncapped)] = np.diag(pu) - np.outer(pu, pu) / free_mass
    return jac


@dataclass(frozen=True)
class SoftWallParams:
    """Unconstrained logits and the derived capped blockage distribution."""

    logits: np.ndarray
    blockage: np.ndarray = field(init=False)

    def __post_init__(self):
        z = np.array(self.logits, dtype=float)
        z.setflags(write=False)
        p = blockage_distribution(z)
        p.setflags(write=False)
        object.__setattr__(self, "logits", z)
        object.__setattr__(self, "blockage", p)


def _target_cell(side: int, state: int, action: int) -> int | None:
    """Successor cell index for an action, or None when it leaves the grid."""
    r, c = divmod(state, side)
    dr, dc = DELTAS[action]
    nr, nc = r + dr, c + dc
    if 0 <= nr < side and 0 <= nc < side:
        return nr * side + nc
    return None


def soft_maze_mdp(config: SoftMazeConfig, blockage: np.ndarray) -> TabularMdp:
    """MDP over cells: a move toward cell c succeeds with probability 1 - p(c).

    Off-grid moves stay put; the end cell carries no blockage and is terminal.
    """
    p = np.asarray(blockage, dtype=float)
    if p.shape != (config.num_blockage_cells,):
        raise ConfigError(
            f"blockage shape {p.shape} does not match {config.num_blockage_cells} cells"
        )
    n = config.side
    ns = config.num_cells
    end = ns - 1
    transition = np.zeros((ns, 4, ns))
    for s in range(ns):
        for a in range(4):
            t = _target_cell(n, s, a)
            if t is None:
                transition[s, a, s] = 1.0
            elif t == end:
                transition[s, a, t] = 1.0
            else:
                transition[s, a, t] = 1.0 - p[t]
                transition[s, a, s] += p[t]
    reward = np.full((ns, 4), config.step_reward)
    start_dist = np.zeros(ns)
    start_dist[0] = 1.0
    return TabularMdp(
        transition=transition,
        reward=reward,
        discount=config.discount,
        start_dist=start_dist,
        terminal_states=frozenset({end}),
    )


def transition_jacobian(config: SoftMazeConfig, params: SoftWallParams) -> np.ndarray:
    """d transition / d logits, shape (S, A, S, K), via the capped-softmax chain rule."""
    n = config.side
    ns = config.num_cells
    end = ns - 1
    dp_dz = blockage_jacobian(params.logits)
    jac = np.zeros((ns, 4, ns, params.logits.size))
    for s in range(ns):
        for a in range(4):
            t = _target_cell(n, s, a)
            if t is None or t == end:
                continue
            jac[s, a, t] -= dp_dz[t]
            jac[s, a, s] += dp_dz[t]
    return jac


def transition_gradient(
    config: SoftMazeConfig, params: SoftWallParams, agent_policy: StochasticPolicy
) -> np.ndarray:
    """Exact gradient of the agent's expected return w.r.t. the logits.

    Combines the discounted state occupancy, the agent policy, the
    transition jacobian and the exact state values:
    grad = sum_{s,a} d(s) pi(a|s) sum_{s'} dP(s,a,s') [R(s,a) + gamma V(s')].
    """
    mdp = soft_maze_mdp(config, params.blockage)
    v = exact_policy_value(mdp, agent_policy)
    d = state_occupancy(mdp, agent_policy)
    jac = transition_jacobian(config, params)
    q_next = mdp.reward[:, :, None] + mdp.discount * v[None, None, :]
    return np.einsum("s,sa,satk,sat->k", d, agent_policy.probs, jac, q_next)


def transition_gradient_mc(
    config: SoftMazeConfig,
    params: SoftWallParams,
    agent_policy: StochasticPolicy,
    episodes: int = 1000,
    seed=0,
) -> np.ndarray:
    """Monte-Carlo estimator of the transition gradient.

    Samples episodes and accumulates the score of each realized transition
    weighted by the discounted return-to-go; agrees with the exact mode in
    expectation.
    """
    mdp = soft_maze_mdp(config, params.blockage)
    jac = transition_jacobian(config, params)
    rng = _as_rng(seed)
    grad = np.zeros_like(params.logits)
    for _ in range(episodes):
        traj = sample_episode(mdp, agent_policy, rng, max_steps=config.step_cap)
        rewards = traj.rewards
        # Discounted return-to-go at each step.
        togo = np.zeros(len(rewards))
        acc = 0.0
        for t in range(len(rewards) - 1, -1, -1):
            acc = rewards[t] + mdp.discount * acc
            togo[t] = acc
        weight = 1.0
        for t, (s, a, _) in enumerate(traj.steps):
            successor = (
                traj.steps[t + 1][0] if t + 1 < len(traj.steps) else traj.final_state
            )
            prob = mdp.transition[s, a, successor]
            if prob > 0:
                grad += weight * (jac[s, a, successor] / prob) * togo[t]
            weight *= mdp.discount
    return grad / episodes


def _terminal_reachable(mdp: TabularMdp) -> bool:
    """End reachable from every start-support state through positive transitions."""
    support = mdp.transition.max(axis=1) > 0
    n = mdp.num_states
    can_reach = np.zeros(n, dtype=bool)
    for t in mdp.terminal_states:
        can_reach[t] = True
    for _ in range(n):
        new = can_reach | (support @ can_reach)
        if np.array_equal(new, can_reach):
            break
        can_reach = new
    return all(can_reach[s] for s in np.flatnonzero(mdp.start_dist))


def optimal_agent_policy(mdp: TabularMdp, residual: float = 1e-10) -> StochasticPolicy:
    """Deterministic greedy policy from value iteration; ties break by action order."""
    if not _terminal_reachable(mdp):
        raise NoProperPolicyError("no proper policy: terminal set unreachable")
    ns, na = mdp.num_states, mdp.num_actions
    terminal = np.array([mdp.is_terminal(s) for s in range(ns)])
    v = np.zeros(ns)
    for _ in range(1_000_000):
        q = mdp.reward + mdp.discount * mdp.transition @ v
        v_new = np.where(terminal, 0.0, q.max(axis=1))
        if np.max(np.abs(v_new - v)) <= residual:
            v = v_new
            break
        v = v_new
    q = mdp.reward + mdp.discount * mdp.transition @ v
    probs = np.zeros((ns, na))
    probs[np.arange(ns), np.argmax(q, axis=1)] = 1.0
    return StochasticPolicy(probs)


@dataclass(frozen=True)
class SoftTrainConfig:
    """Hyperparameters for the alternating environment/agent loop."""

    iterations: int = 2000
    learning_rate: float = 1.0
    grad_clip: float = 10.0
    seed: int = 0
    q_learning: QLearningConfig = field(
        default_factory=lambda: QLearningConfig(episodes=60, max_steps=400)
    )


@dataclass
class SoftTrainRecord:
    """State of one environment iteration."""

    iteration: int
    logits: np.ndarray
    blockage: np.ndarray
    agent_return: float
    expected_steps: float


@dataclass
class SoftTrainHistory:
    """Snapshots across environment updates; records[0] is the initial state."""

    config: SoftMazeConfig
    agent_kind: str
    records: list[SoftTrainRecord] = field(default_factory=list)

    @property
    def final_blockage(self) -> np.ndarray:
        return self.records[-1].blockage


def _expected_steps(mdp: TabularMdp, policy: StochasticPolicy, step_cap: int) -> float:
    """Undiscounted expected episode length under the policy."""
    undiscounted = replace_discount(mdp, 1.0)
    steps = expected_return(undiscounted, policy) / undiscounted.reward[0, 0]
    return float(min(steps, step_cap))


def replace_discount(mdp: TabularMdp, discount: float) -> TabularMdp:
    return TabularMdp(
        transition=mdp.transition,
        reward=mdp.reward,
        discount=discount,
        start_dist=mdp.start_dist,
        terminal_states=mdp.terminal_states,
    )


def train_soft_env(
    config: SoftMazeConfig,
    agent_kind: str = "optimal",
    hyper: SoftTrainConfig | None = None,
) -> SoftTrainHistory:
    """Alternate environment gradient steps with agent re-optimization.

    agent_kind 'optimal' re-plans with value iteration against the current
    stochastic dynamics each iteration; 'q_learning' continues tabular
    Q-learning from the previous table for a fixed episode budget.
    """
    if agent_kind not in ("optimal", "q_learning"):
        raise ConfigError(f"unknown agent kind {agent_kind!r}")
    hyper = hyper if hyper is not None else SoftTrainConfig()
    rng = _as_rng(hyper.seed)
    history = SoftTrainHistory(config=config, agent_kind=agent_kind)
    logits = np.zeros(config.num_blockage_cells)
    q_table = None
    for iteration in range(hyper.iterations + 1):
        params = SoftWallParams(logits)
        mdp = soft_maze_mdp(config, params.blockage)
        if agent_kind == "optimal":
            policy = optimal_agent_policy(mdp)
        else:
            policy, q_table = q_learning_train(
                mdp, hyper.q_learning, q_init=q_table, rng=rng
            )
        agent_return = expected_return(mdp, policy)
        history.records.append(
            SoftTrainRecord(
                iteration=iteration,
                logits=params.logits,
                blockage=params.blockage,
                agent_return=agent_return,
                expected_steps=_expected_steps(mdp, policy, config.step_cap),
            )
        )
        if iteration == hyper.iterations:
            break
        grad = transition_gradient(config, params, policy)
        if not np.all(np.isfinite(grad)):
            raise RuntimeError(f"non-finite environment gradient at iteration {iteration}")
        norm = float(np.linalg.norm(grad))
        if norm > hyper.grad_clip:
            grad = grad * (hyper.grad_clip / norm)
        logits = logits - hyper.learning_rate * grad
        if not np.all(np.isfinite(logits)):
            raise RuntimeError(f"non-finite logits at iteration {iteration}")
    return history
