"""Configuration-driven experiment runner.

Experiments are described by a flat key=value config ('#' comments). Every
run writes a manifest echoing the fully resolved configuration, so the
artifact directory is self-describing, and identical config + seed yields
a byte-identical artifact tree.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gridbits
from .agents import QLearningConfig, evaluate_agent, make_agent
from .duality import verify_duality
from .errors import ConfigError
from .generator import GeneratorHistory, GeneratorTrainConfig, train_generator
from .hard_maze import MazeMap, load_map, save_map, shortest_path_length
from .mdp import StochasticPolicy, TabularMdp
from .soft_maze import SoftMazeConfig, SoftTrainConfig, SoftTrainHistory, train_soft_env

EXPERIMENT_KINDS = (
    "verify-duality",
    "train-soft",
    "train-hard",
    "evaluate",
    "brute-force-oracle",
)

# Recognized keys per experiment kind, with defaults. None means required.
_COMMON_KEYS = {"kind": None, "seed": "0"}
_KEYS: dict[str, dict[str, str | None]] = {
    "verify-duality": {**_COMMON_KEYS, "suites": "10", "tolerance": "1e-9"},
    "train-soft": {
        **_COMMON_KEYS,
        "side": "5",
        "agent": "optimal",
        "iterations": "2000",
        "learning_rate": "1.0",
        "grad_clip": "10",
        "q_episodes": "60",
        "snapshot_every": "50",
    },
    "train-hard": {
        **_COMMON_KEYS,
        "side": "5",
        "agent": "opt",
        "rounds": "200",
        "batch_size": "16",
        "learning_rate": "0.03",
        "hidden": "128",
        "entropy_coef": "0.01",
        "max_walls": "",
        "snapshot_every": "10",
        "eval_episodes": "",
        "q_episodes": "200",
    },
    "evaluate": {
        **_COMMON_KEYS,
        "agent": "opt",
        "map_file": "",
        "side": "5",
        "episodes": "1",
        "max_steps": "",
        "q_episodes": "200",
    },
    "brute-force-oracle": {**_COMMON_KEYS, "side": "4", "agent": "opt"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment settings: kind plus a flat string-valued mapping."""

    kind: str
    values: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        known = _KEYS[self.kind]
        resolved = {"kind": self.kind}
        for key, default in known.items():
            if key == "kind":
                continue
            resolved[key] = default
        for key, value in self.values.items():
            if key == "kind":
                continue
            if key not in known:
                raise ConfigError(f"unknown key {key!r} for experiment {self.kind!r}")
            resolved[key] = value
        object.__setattr__(self, "values", resolved)

    def get(self, key: str) -> str:
        return self.values[key]

    def get_int(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: expected integer, got {self.values[key]!r}") from exc

    def get_float(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: expected number, got {self.values[key]!r}") from exc


def parse_config_text(text: str) -> dict[str, str]:
    """Parse the flat key=value format; '#' starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_config(
    path: str | Path | None = None,
    overrides: dict[str, str] | None = None,
    kind: str | None = None,
    seed: int | None = None,
) -> ExperimentConfig:
    """Build an ExperimentConfig from an optional file plus CLI overrides."""
    values: dict[str, str] = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    if overrides:
        values.update(overrides)
    if kind is not None:
        values["kind"] = kind
    if seed is not None:
        values["seed"] = str(seed)
    resolved_kind = values.pop("kind", None)
    if resolved_kind is None:
        raise ConfigError("experiment kind missing (set 'kind=' or pass a subcommand)")
    return ExperimentConfig(kind=resolved_kind, values=values)


def derive_seed(master: int, label: str) -> int:
    """Stable per-component stream seed from a master seed and a label."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(config: ExperimentConfig, out_dir: Path, extra: dict | None = None) -> None:
    rows = dict(config.values)
    if extra:
        rows.update({k: str(v) for k, v in extra.items()})
    body = "".join(f"{k} = {rows[k]}\n" for k in sorted(rows))
    _atomic_write(out_dir / "manifest.txt", body)


def export_curve(rows: list[tuple], header: tuple[str, ...], path: str | Path) -> None:
    """CSV export with a fixed header; floats serialized via repr for stability."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def read_curve(path: str | Path) -> tuple[tuple[str, ...], list[tuple]]:
    """Inverse of export_curve: header plus typed rows (int or float per cell)."""
    lines = Path(path).read_text().splitlines()
    header = tuple(lines[0].split(","))
    rows = []
    for line in lines[1:]:
        cells = []
        for cell in line.split(","):
            try:
                cells.append(int(cell))
            except ValueError:
                cells.append(float(cell))
        rows.append(tuple(cells))
    return header, rows


def export_heatmap(blockage: np.ndarray, side: int, path: str | Path) -> None:
    """One CSV of side x side blockage values; the end cell is written as 0."""
    grid = np.zeros(side * side)
    grid[: blockage.size] = blockage
    grid = grid.reshape(side, side)
    lines = [",".join(repr(float(v)) for v in row) for row in grid]
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def export_heatmap_pgm(blockage: np.ndarray, side: int, path: str | Path) -> None:
    """Plain PGM (P2), maxval 255, value = round(255 * p / 0.5)."""
    grid = np.zeros(side * side)
    grid[: blockage.size] = blockage
    levels = np.rint(255.0 * grid / 0.5).astype(int).reshape(side, side)
    body = "\n".join(" ".join(str(v) for v in row) for row in levels)
    _atomic_write(Path(path), f"P2\n{side} {side}\n255\n{body}\n")


def random_mdp(
    rng: np.random.Generator, max_states: int = 5, max_actions: int = 3
) -> tuple[TabularMdp, StochasticPolicy]:
    """Random small MDP/policy pair with gamma < 1, for verification suites."""
    ns = int(rng.integers(2, max_states + 1))
    na = int(rng.integers(1, max_actions + 1))
    transition = rng.random((ns, na, ns)) + 0.05
    transition /= transition.sum(axis=2, keepdims=True)
    reward = rng.normal(size=(ns, na))
    start = rng.random(ns) + 0.05
    start /= start.sum()
    probs = rng.random((ns, na)) + 0.05
    probs /= probs.sum(axis=1, keepdims=True)
    discount = float(rng.uniform(0.5, 0.95))
    mdp = TabularMdp(
        transition=transition,
        reward=reward,
        discount=discount,
        start_dist=start,
        terminal_states=frozenset(),
    )
    return mdp, StochasticPolicy(probs)


def brute_force_max_maze(side: int, agent_kind: str = "opt") -> tuple[MazeMap, float]:
    """Exhaustive search over all connected wall subsets.

    OPT scoring is fully vectorized with bitmask BFS; DFS/RHS fall back to
    per-map simulation over connected maps only, which is practical up to
    side 4.
    """
    if side > 5:
        count = 2 ** (side * side - 2)
        raise ConfigError(
            f"side {side} means {count} wall configurations; refusing beyond side 5"
        )
    n2 = side * side
    free_bits = [i for i in range(n2) if i not in (0, n2 - 1)]
    k = len(free_bits)
    subsets = np.arange(2**k, dtype=np.uint64)
    walls = np.zeros(2**k, dtype=np.uint64)
    for i, pos in enumerate(free_bits):
        walls |= ((subsets >> np.uint64(i)) & np.uint64(1)) << np.uint64(pos)
    dist = gridbits.distance_to_end(walls, side)
    if agent_kind == "opt":
        best_idx = int(np.argmax(dist))
        best_map = MazeMap(side, gridbits.mask_to_grid(int(walls[best_idx]), side))
        return best_map, float(dist[best_idx])
    connected_idx = np.flatnonzero(dist >= 0)
    best_score = -1.0
    best_map = MazeMap(side)
    cap = 8 * n2
    for idx in connected_idx:
        maze = MazeMap(side, gridbits.mask_to_grid(int(walls[idx]), side))
        agent = make_agent(maze, agent_kind)
        score = evaluate_agent(maze, agent, max_steps=cap)
        if score > best_score:
            best_score = score
            best_map = maze
    return best_map, best_score


class VerificationFailure(Exception):
    """An experiment completed but its verification checks did not pass."""


def run_experiment(config: ExperimentConfig, out_dir: str | Path) -> Path:
    """Dispatch to the experiment pipeline and write the artifact directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = {
        "verify-duality": _run_verify_duality,
        "train-soft": _run_train_soft,
        "train-hard": _run_train_hard,
        "evaluate": _run_evaluate,
        "brute-force-oracle": _run_oracle,
    }[config.kind]
    runner(config, out)
    return out


def _run_verify_duality(config: ExperimentConfig, out: Path) -> None:
    master = config.get_int("seed")
    suites = config.get_int("suites")
    tolerance = config.get_float("tolerance")
    worst = {"trajectory_probability": 0.0, "trajectory_return": 0.0, "expected_return": 0.0}
    all_pass = True
    for i in range(suites):
        rng = np.random.default_rng(derive_seed(master, f"duality/{i}"))
        mdp, policy = random_mdp(rng)
        report = verify_duality(mdp, policy, tolerance=tolerance)
        for name, deviation, ok in report.as_records():
            worst[name] = max(worst[name], deviation)
            all_pass = all_pass and ok
    lines = [
        f"{name} {worst[name]!r} {'pass' if worst[name] <= tolerance else 'fail'}"
        for name in ("trajectory_probability", "trajectory_return", "expected_return")
    ]
    _atomic_write(out / "duality_report.txt", "\n".join(lines) + "\n")
    write_manifest(config, out, extra={"passed": all_pass})
    _atomic_write(
        out / "summary.txt",
        f"duality suites: {suites}\nall checks passed: {all_pass}\n",
    )
    if not all_pass:
        raise VerificationFailure("duality checks exceeded tolerance")


def _run_train_soft(config: ExperimentConfig, out: Path) -> None:
    side = config.get_int("side")
    maze_config = SoftMazeConfig(side=side)
    hyper = SoftTrainConfig(
        iterations=config.get_int("iterations"),
        learning_rate=config.get_float("learning_rate"),
        grad_clip=config.get_float("grad_clip"),
        seed=derive_seed(config.get_int("seed"), "train-soft"),
        q_learning=QLearningConfig(
            episodes=config.get_int("q_episodes"), max_steps=maze_config.step_cap
        ),
    )
    agent = config.get("agent")
    history = train_soft_env(maze_config, agent_kind=agent, hyper=hyper)
    _export_soft_history(history, out, config.get_int("snapshot_every"))
    write_manifest(config, out)


def _export_soft_history(history: SoftTrainHistory, out: Path, snapshot_every: int) -> None:
    side = history.config.side
    rows = [
        (rec.iteration, rec.agent_return, rec.expected_steps)
        for rec in history.records
    ]
    export_curve(rows, ("iteration", "agent_return", "expected_steps"), out / "curve.csv")
    last = len(history.records) - 1
    for rec in history.records:
        if rec.iteration % snapshot_every == 0 or rec.iteration == last:
            stem = f"heatmap_{rec.iteration:05d}"
            export_heatmap(rec.blockage, side, out / f"{stem}.csv")
            export_heatmap_pgm(rec.blockage, side, out / f"{stem}.pgm")
    final = history.final_blockage
    _atomic_write(
        out / "summary.txt",
        "final blockage (row-major, end cell last, excluded):\n"
        + " ".join(f"{v:.4f}" for v in final)
        + f"\nfinal agent return: {history.records[-1].agent_return!r}\n"
        + f"final expected steps: {history.records[-1].expected_steps!r}\n",
    )


def _run_train_hard(config: ExperimentConfig, out: Path) -> None:
    max_walls = config.get("max_walls")
    eval_episodes = config.get("eval_episodes")
    gen_config = GeneratorTrainConfig(
        side=config.get_int("side"),
        agent_kind=config.get("agent"),
        rounds=config.get_int("rounds"),
        batch_size=config.get_int("batch_size"),
        learning_rate=config.get_float("learning_rate"),
        hidden=config.get_int("hidden"),
        entropy_coef=config.get_float("entropy_coef"),
        max_walls=int(max_walls) if max_walls else None,
        seed=derive_seed(config.get_int("seed"), "train-hard"),
        eval_episodes=int(eval_episodes) if eval_episodes else None,
        q_learning=QLearningConfig(episodes=config.get_int("q_episodes")),
        snapshot_every=config.get_int("snapshot_every"),
    )
    history = train_generator(gen_config)
    _export_generator_history(history, out)
    write_manifest(config, out)


def _export_generator_history(history: GeneratorHistory, out: Path) -> None:
    rows = [(r.round, r.mean_reward, r.reward_variance) for r in history.rounds]
    export_curve(rows, ("round", "mean_reward", "reward_variance"), out / "curve.csv")
    for round_idx, maze in history.snapshots:
        _atomic_write(out / f"map_round_{round_idx:05d}.txt", save_map(maze))
    best = history.best_map
    _atomic_write(out / "best_map.txt", save_map(best))
    _atomic_write(
        out / "summary.txt",
        f"best reward: {history.best_reward!r}\n"
        f"best map shortest path: {shortest_path_length(best)}\n"
        f"rounds: {len(history.rounds)}\n",
    )


def _run_evaluate(config: ExperimentConfig, out: Path) -> None:
    map_file = config.get("map_file")
    if map_file:
        try:
            text = Path(map_file).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read map_file {map_file!r}: {exc}") from exc
        maze = load_map(text)
    else:
        maze = MazeMap(config.get_int("side"))
    agent_kind = config.get("agent")
    max_steps = config.get("max_steps")
    cap = int(max_steps) if max_steps else 8 * maze.side**2
    agent = make_agent(
        maze, agent_kind, q_config=QLearningConfig(episodes=config.get_int("q_episodes"))
    )
    mean_steps = evaluate_agent(
        maze,
        agent,
        max_steps=cap,
        seed=derive_seed(config.get_int("seed"), "evaluate"),
        episodes=config.get_int("episodes"),
    )
    _atomic_write(out / "map.txt", save_map(maze))
    _atomic_write(
        out / "summary.txt",
        f"agent: {agent_kind}\nmean steps: {mean_steps!r}\n"
        f"shortest path: {shortest_path_length(maze)}\n",
    )
    write_manifest(config, out, extra={"mean_steps": mean_steps})


def _run_oracle(config: ExperimentConfig, out: Path) -> None:
    best_map, best_score = brute_force_max_maze(
        config.get_int("side"), config.get("agent")
    )
    _atomic_write(out / "best_map.txt", save_map(best_map))
    _atomic_write(
        out / "summary.txt",
        f"agent: {config.get('agent')}\nbest score: {best_score!r}\n",
    )
    write_manifest(config, out, extra={"best_score": best_score})
