"""Maze-solving adversaries: optimal, depth-first, right-hand, and Q-learning.

All agents expose reset()/act(maze, position) and are driven by
evaluate_agent, which applies the deterministic hard-wall dynamics and
counts realized steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NoProperPolicyError
from .hard_maze import ACTIONS, DELTAS, Cell, MazeMap, _distance_field
from .mdp import StochasticPolicy, TabularMdp, _as_rng

# DFS action priority and the OPT tie-break order.
PRIORITY = ("E", "S", "N", "W")

_RIGHT_OF = {"N": "E", "E": "S", "S": "W", "W": "N"}
_LEFT_OF = {v: k for k, v in _RIGHT_OF.items()}


def _neighbor(position: Cell, direction: str) -> Cell:
    dr, dc = DELTAS[direction]
    return (position[0] + dr, position[1] + dc)


class OptAgent:
    """Follows breadth-first-search distances to the end; ties by E, S, N, W."""

    def __init__(self, maze: MazeMap):
        dist = _distance_field(maze, maze.end)
        if dist[maze.start] < 0:
            raise NoProperPolicyError("end cell is unreachable from the start")
        self._dist = dist

    def reset(self, rng=None):
        pass

    def act(self, maze: MazeMap, position: Cell) -> str:
        here = self._dist[position]
        for direction in PRIORITY:
            nxt = _neighbor(position, direction)
            if maze.is_open(nxt) and self._dist[nxt] == here - 1:
                return direction
        raise NoProperPolicyError(f"no descent direction from {position}")


def opt_agent(maze: MazeMap) -> OptAgent:
    """Optimal shortest-path agent; realized steps equal the BFS distance."""
    return OptAgent(maze)


@dataclass
class DfsMemory:
    """Visited set plus the backtrack stack of cells the agent came through."""

    visited: set[Cell] = field(default_factory=set)
    stack: list[Cell] = field(default_factory=list)


def dfs_agent_step(maze: MazeMap, position: Cell, memory: DfsMemory):
    """One DFS move: highest-priority blank unvisited neighbor, else backtrack."""
    if position not in memory.visited:
        memory.visited.add(position)
    for direction in PRIORITY:
        nxt = _neighbor(position, direction)
        if maze.is_open(nxt) and nxt not in memory.visited:
            memory.stack.append(position)
            memory.visited.add(nxt)
            return direction, memory
    if not memory.stack:
        raise RuntimeError(f"DFS stuck at {position}: nothing to backtrack to")
    back = memory.stack.pop()
    for direction in PRIORITY:
        if _neighbor(position, direction) == back:
            return direction, memory
    raise RuntimeError(f"backtrack target {back} is not adjacent to {position}")


class DfsAgent:
    """Depth-first searcher with priority E, S, N, W and explicit backtracking."""

    def __init__(self):
        self.memory = DfsMemory()

    def reset(self, rng=None):
        self.memory = DfsMemory()

    def act(self, maze: MazeMap, position: Cell) -> str:
        direction, self.memory = dfs_agent_step(maze, position, self.memory)
        return direction


def rhs_agent_step(maze: MazeMap, position: Cell, heading: str):
    """One right-hand-rule move.

    (i) right-hand cell blank: turn right and step; (ii) else front blank:
    step forward; (iii) else rotate left until a blank cell is faced, then
    step. Returns (direction moved, new heading); the two are equal.
    """
    right = _RIGHT_OF[heading]
    if maze.is_open(_neighbor(position, right)):
        return right, right
    facing = heading
    for _ in range(4):
        if maze.is_open(_neighbor(position, facing)):
            return facing, facing
        facing = _LEFT_OF[facing]
    raise RuntimeError(f"RHS agent fully enclosed at {position}")


class RhsAgent:
    """Wall follower keeping its right hand on walls or the border."""

    def __init__(self, initial_heading: str = "S"):
        if initial_heading not in ACTIONS:
            raise ConfigError(f"unknown heading {initial_heading!r}")
        self.initial_heading = initial_heading
        self.heading = initial_heading

    def reset(self, rng=None):
        self.heading = self.initial_heading

    def act(self, maze: MazeMap, position: Cell) -> str:
        direction, self.heading = rhs_agent_step(maze, position, self.heading)
        return direction


@dataclass(frozen=True)
class QLearningConfig:
    """Training budget and exploration settings for the tabular Q agent."""

    episodes: int = 200
    learning_rate: float = 0.1
    epsilon: float = 0.1
    eval_epsilon: float = 0.05
    max_steps: int = 200
    seed: int = 0


def epsilon_greedy_policy(q_table: np.ndarray, epsilon: float) -> StochasticPolicy:
    """Greedy mass split uniformly over exact argmax ties, plus epsilon exploration."""
    ns, na = q_table.shape
    probs = np.full((ns, na), epsilon / na)
    for s in range(ns):
        ties = np.flatnonzero(q_table[s] == q_table[s].max())
        probs[s, ties] += (1.0 - epsilon) / len(ties)
    return StochasticPolicy(probs)


def q_learning_train(
    mdp: TabularMdp,
    config: QLearningConfig,
    q_init: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[StochasticPolicy, np.ndarray]:
    """Tabular Q-learning with epsilon-greedy exploration.

    Returns the epsilon-greedy policy at eval_epsilon (the evaluated policy
    stays stochastic) together with the learned table, so callers can warm
    start subsequent training rounds.
    """
    rng = rng if rng is not None else _as_rng(config.seed)
    ns, na = mdp.num_states, mdp.num_actions
    q = np.zeros((ns, na)) if q_init is None else np.array(q_init, dtype=float)
    if q.shape != (ns, na):
        raise ConfigError(f"q_init shape {q.shape} does not match ({ns}, {na})")
    for _ in range(config.episodes):
        state = int(rng.choice(ns, p=mdp.start_dist))
        for _ in range(config.max_steps):
            if mdp.is_terminal(state):
                break
            if rng.random() < config.epsilon:
                action = int(rng.integers(na))
            else:
                action = int(np.argmax(q[state]))
            successor = int(rng.choice(ns, p=mdp.transition[state, action]))
            target = mdp.reward[state, action]
            if not mdp.is_terminal(successor):
                target += mdp.discount * q[successor].max()
            q[state, action] += config.learning_rate * (target - q[state, action])
            state = successor
    return epsilon_greedy_policy(q, config.eval_epsilon), q


class QAgent:
    """Acts by sampling the (stochastic) policy learned on the maze MDP."""

    def __init__(self, maze: MazeMap, policy: StochasticPolicy):
        self._policy = policy
        self._side = maze.side
        self._rng = np.random.default_rng(0)

    def reset(self, rng=None):
        if rng is not None:
            self._rng = rng

    def act(self, maze: MazeMap, position: Cell) -> str:
        state = position[0] * self._side + position[1]
        action = int(self._rng.choice(len(ACTIONS), p=self._policy.probs[state]))
        return ACTIONS[action]


def evaluate_agent(
    maze: MazeMap, agent, max_steps: int, seed=0, episodes: int = 1
) -> float:
    """Mean realized steps from start to end, capping each episode at max_steps.

    Agent memory is reset before every episode; a blocked or off-grid move
    still consumes a step.
    """
    rng = _as_rng(seed)
    totals = []
    for _ in range(episodes):
        agent.reset(rng)
        position = maze.start
        steps = 0
        while position != maze.end and steps < max_steps:
            direction = agent.act(maze, position)
            nxt = _neighbor(position, direction)
            if maze.is_open(nxt):
                position = nxt
            steps += 1
        totals.append(steps)
    return float(np.mean(totals))


def make_agent(maze: MazeMap, kind: str, q_config: QLearningConfig | None = None):
    """Instantiate an agent by kind: 'opt', 'dfs', 'rhs', or 'q'."""
    if kind == "opt":
        return opt_agent(maze)
    if kind == "dfs":
        return DfsAgent()
    if kind == "rhs":
        return RhsAgent()
    if kind == "q":
        from .hard_maze import maze_mdp

        config = q_config if q_config is not None else QLearningConfig()
        policy, _ = q_learning_train(maze_mdp(maze), config)
        return QAgent(maze, policy)
    raise ConfigError(f"unknown agent kind {kind!r}")
