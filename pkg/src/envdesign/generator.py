"""Reinforcement-learning maze generator for the discrete (hard-wall) case.

The generator builds a maze additively: starting from the empty map, a
small policy network looks at the occupancy grid and either places one
wall or terminates. Actions that would disconnect start from end are
masked out, so every emitted map is valid by construction. The episode
reward is the (averaged) number of steps a chosen agent needs on the
finished map, and the policy weights are updated by REINFORCE with a
running-mean baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gridbits
from .agents import QLearningConfig, evaluate_agent, make_agent
from .errors import ConfigError
from .hard_maze import MazeMap, shortest_path_length
from .mdp import _as_rng


def masked_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the valid entries; invalid entries get exactly 0."""
    if not mask.any():
        raise ConfigError("masked softmax needs at least one valid action")
    z = np.where(mask, scores, -np.inf)
    z = z - z[mask].max()
    w = np.where(mask, np.exp(z), 0.0)
    return w / w.sum()


def valid_actions(partial: MazeMap) -> np.ndarray:
    """Boolean mask over n^2 + 1 actions (one per cell, then terminate).

    A cell action is valid iff place_wall would succeed there; terminate is
    always valid. Candidate connectivity is checked for all cells at once
    with batched bitmask BFS.
    """
    n = partial.side
    mask = np.zeros(n * n + 1, dtype=bool)
    mask[-1] = True
    base = np.uint64(partial.wall_mask())
    candidates = []
    cells = []
    for idx in range(n * n):
        r, c = divmod(idx, n)
        if (r, c) in (partial.start, partial.end) or partial.walls[r, c]:
            continue
        cells.append(idx)
        candidates.append(base | np.uint64(1 << idx))
    if cells:
        ok = gridbits.connected(np.array(candidates, dtype=np.uint64), n)
        mask[np.array(cells)] = ok
    return mask


@dataclass
class GeneratorPolicyParams:
    """One-hidden-layer network: occupancy grid (n^2) -> action scores (n^2 + 1)."""

    side: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, side: int, hidden: int = 128, seed=0) -> "GeneratorPolicyParams":
        rng = _as_rng(seed)
        n_in = side * side
        n_out = n_in + 1
        return cls(
            side=side,
            w1=rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(hidden, n_in)),
            b1=np.zeros(hidden),
            w2=rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(n_out, hidden)),
            b2=np.zeros(n_out),
        )

    def copy(self) -> "GeneratorPolicyParams":
        return GeneratorPolicyParams(
            self.side, self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy()
        )

    def forward(self, grid: np.ndarray):
        """Action scores plus the hidden activation (kept for the backward pass)."""
        h = np.tanh(self.w1 @ grid + self.b1)
        return self.w2 @ h + self.b2, h

    def action_probs(self, partial: MazeMap) -> np.ndarray:
        scores, _ = self.forward(partial.walls.astype(float).ravel())
        return masked_softmax(scores, valid_actions(partial))


@dataclass
class GeneratorEpisode:
    """One wall-placement rollout: partial maps, actions taken, final map, reward."""

    partial_maps: list[MazeMap]
    actions: list[int]
    final_map: MazeMap
    reward: float = 0.0


def terminate_action(side: int) -> int:
    return side * side


def generate_maze(
    params: GeneratorPolicyParams, seed, max_walls: int | None = None
) -> GeneratorEpisode:
    """Sample one generation episode from the empty map.

    Ends when the terminate action is drawn or max_walls walls stand;
    masking keeps every intermediate map connected.
    """
    rng = _as_rng(seed)
    n = params.side
    limit = max_walls if max_walls is not None else n * n - 2
    maze = MazeMap(n)
    partial_maps = [maze]
    actions = []
    from .hard_maze import place_wall

    while maze.wall_count() < limit:
        probs = params.action_probs(maze)
        action = int(rng.choice(probs.size, p=probs))
        actions.append(action)
        if action == terminate_action(n):
            break
        maze = place_wall(maze, divmod(action, n))
        partial_maps.append(maze)
    return GeneratorEpisode(partial_maps, actions, final_map=maze)


def generator_reward(
    maze: MazeMap,
    agent_kind: str,
    eval_episodes: int = 1,
    seed=0,
    max_steps: int | None = None,
    q_config: QLearningConfig | None = None,
) -> float:
    """Mean steps the agent needs on the map: the quantity the generator maximizes."""
    rng = _as_rng(seed)
    cap = max_steps if max_steps is not None else 8 * maze.side**2
    agent = make_agent(maze, agent_kind, q_config=q_config)
    return evaluate_agent(maze, agent, max_steps=cap, seed=rng, episodes=eval_episodes)


def _policy_grad_step(
    params: GeneratorPolicyParams,
    grid: np.ndarray,
    mask: np.ndarray,
    action: int,
    advantage: float,
    entropy_coef: float,
    grads: dict,
) -> None:
    """Accumulate d/dw of [advantage * log pi(action) + entropy_coef * H(pi)]."""
    scores, h = params.forward(grid)
    probs = masked_softmax(scores, mask)
    d_scores = -advantage * probs
    d_scores[action] += advantage
    if entropy_coef > 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), 0.0)
        entropy = -float(np.sum(probs * logp))
        d_scores += entropy_coef * (-probs * (logp + entropy))
    d_scores[~mask] = 0.0
    grads["w2"] += np.outer(d_scores, h)
    grads["b2"] += d_scores
    d_h = params.w2.T @ d_scores
    d_pre = d_h * (1.0 - h**2)
    grads["w1"] += np.outer(d_pre, grid)
    grads["b1"] += d_pre


@dataclass
class RunningBaseline:
    """Exponential moving average of batch rewards (decay 0.9)."""

    value: float = 0.0
    initialized: bool = False
    decay: float = 0.9

    def update(self, batch_mean: float) -> None:
        if not self.initialized:
            self.value = batch_mean
            self.initialized = True
        else:
            self.value = self.decay * self.value + (1.0 - self.decay) * batch_mean


def reinforce_update(
    params: GeneratorPolicyParams,
    batch: list[GeneratorEpisode],
    baseline: RunningBaseline,
    learning_rate: float,
    entropy_coef: float = 0.0,
) -> GeneratorPolicyParams:
    """Score-function update over a batch of scored episodes.

    Gradient is sum over episodes of (reward - baseline) times the summed
    action log-probability gradients, plus an optional entropy bonus; the
    baseline is updated afterwards from the batch mean.
    """
    if not batch:
        raise ConfigError("reinforce_update needs a non-empty batch")
    grads = {
        "w1": np.zeros_like(params.w1),
        "b1": np.zeros_like(params.b1),
        "w2": np.zeros_like(params.w2),
        "b2": np.zeros_like(params.b2),
    }
    base = baseline.value if baseline.initialized else 0.0
    for episode in batch:
        advantage = episode.reward - base
        for partial, action in zip(episode.partial_maps, episode.actions):
            grid = partial.walls.astype(float).ravel()
            mask = valid_actions(partial)
            _policy_grad_step(
                params, grid, mask, action, advantage, entropy_coef, grads
            )
    scale = learning_rate / len(batch)
    updated = params.copy()
    updated.w1 += scale * grads["w1"]
    updated.b1 += scale * grads["b1"]
    updated.w2 += scale * grads["w2"]
    updated.b2 += scale * grads["b2"]
    for arr in (updated.w1, updated.b1, updated.w2, updated.b2):
        if not np.all(np.isfinite(arr)):
            raise RuntimeError("non-finite generator gradient update")
    baseline.update(float(np.mean([e.reward for e in batch])))
    return updated


@dataclass(frozen=True)
class GeneratorTrainConfig:
    """Training budget and hyperparameters for the maze generator."""

    side: int
    agent_kind: str = "opt"
    rounds: int = 200
    batch_size: int = 16
    learning_rate: float = 0.03
    hidden: int = 128
    entropy_coef: float = 0.01
    max_walls: int | None = None
    seed: int = 0
    eval_episodes: int | None = None
    q_learning: QLearningConfig = field(
        default_factory=lambda: QLearningConfig(episodes=200)
    )
    snapshot_every: int = 10

    def resolved_eval_episodes(self) -> int:
        if self.eval_episodes is not None:
            return self.eval_episodes
        # Deterministic agents need a single episode; the Q agent is stochastic.
        return 32 if self.agent_kind == "q" else 1


@dataclass
class GeneratorRound:
    round: int
    mean_reward: float
    reward_variance: float


@dataclass
class GeneratorHistory:
    """Per-round statistics, periodic best-map snapshots, and the overall best."""

    config: GeneratorTrainConfig
    rounds: list[GeneratorRound] = field(default_factory=list)
    snapshots: list[tuple[int, MazeMap]] = field(default_factory=list)
    best_map: MazeMap | None = None
    best_reward: float = -np.inf

    @property
    def mean_rewards(self) -> np.ndarray:
        return np.array([r.mean_reward for r in self.rounds])


def train_generator(config: GeneratorTrainConfig) -> GeneratorHistory:
    """Rounds of {generate batch, score maps, REINFORCE update}.

    The entropy bonus decays linearly to zero over the training run. The
    best map ever generated (by reward) is tracked across all rounds.
    """
    rng = _as_rng(config.seed)
    params = GeneratorPolicyParams.init(
        config.side, hidden=config.hidden, seed=rng.integers(2**63)
    )
    history = GeneratorHistory(config=config)
    baseline = RunningBaseline()
    eval_episodes = config.resolved_eval_episodes()
    for round_idx in range(config.rounds):
        batch = []
        for _ in range(config.batch_size):
            episode = generate_maze(params, rng, max_walls=config.max_walls)
            episode.reward = generator_reward(
                episode.final_map,
                config.agent_kind,
                eval_episodes=eval_episodes,
                seed=rng,
                q_config=config.q_learning,
            )
            batch.append(episode)
            if episode.reward > history.best_reward:
                history.best_reward = episode.reward
                history.best_map = episode.final_map
        rewards = np.array([e.reward for e in batch])
        history.rounds.append(
            GeneratorRound(
                round=round_idx,
                mean_reward=float(rewards.mean()),
                reward_variance=float(rewards.var()),
            )
        )
        if round_idx % config.snapshot_every == 0 and history.best_map is not None:
            history.snapshots.append((round_idx, history.best_map))
        decay_frac = 1.0 - round_idx / max(1, config.rounds)
        params = reinforce_update(
            params,
            batch,
            baseline,
            config.learning_rate,
            entropy_coef=config.entropy_coef * decay_frac,
        )
    return history
