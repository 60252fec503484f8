"""Hard-wall mazes: occupancy grids, validity, shortest paths, MDP view.

A maze is an n x n grid of impassable walls with fixed start (0,0) and
end (n-1, n-1). Every accepted map keeps a start-to-end path through
4-neighbor moves; wall placement enforces that eagerly.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import gridbits
from .errors import (
    ConfigError,
    DisconnectingWallError,
    OccupiedCellError,
    ProtectedCellError,
)
from .mdp import TabularMdp

Cell = tuple[int, int]

# Action order for maze MDPs: N, S, W, E.
ACTIONS = ("N", "S", "W", "E")
DELTAS = {"N": (-1, 0), "S": (1, 0), "W": (0, -1), "E": (0, 1)}


@dataclass(frozen=True)
class MazeMap:
    """Immutable n x n wall grid; start (0,0) and end (n-1, n-1) are fixed."""

    side: int
    walls: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.side < 2:
            raise ConfigError(f"maze side must be >= 2, got {self.side}")
        walls = self.walls
        if walls is None:
            walls = np.zeros((self.side, self.side), dtype=bool)
        else:
            walls = np.array(walls, dtype=bool)
        if walls.shape != (self.side, self.side):
            raise ConfigError(f"walls shape {walls.shape} does not match side {self.side}")
        if walls[self.start] or walls[self.end]:
            raise ConfigError("start and end cells must not be walls")
        walls.setflags(write=False)
        object.__setattr__(self, "walls", walls)

    @property
    def start(self) -> Cell:
        return (0, 0)

    @property
    def end(self) -> Cell:
        return (self.side - 1, self.side - 1)

    def in_grid(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.side and 0 <= c < self.side

    def is_open(self, cell: Cell) -> bool:
        """True for an in-grid, non-wall cell."""
        return self.in_grid(cell) and not self.walls[cell]

    def cell_index(self, cell: Cell) -> int:
        return cell[0] * self.side + cell[1]

    def wall_count(self) -> int:
        return int(self.walls.sum())

    def wall_mask(self) -> int:
        return gridbits.grid_to_mask(self.walls)


def is_connected(maze: MazeMap) -> bool:
    """True iff BFS over open cells reaches the end from the start."""
    return shortest_path_length(maze) is not None


def shortest_path_length(maze: MazeMap) -> int | None:
    """BFS distance in moves from start to end; None when unreachable."""
    dist = _distance_field(maze, maze.start)
    d = dist[maze.end]
    return None if d < 0 else int(d)


def _distance_field(maze: MazeMap, source: Cell) -> np.ndarray:
    """BFS distances from source over open cells; -1 for unreachable/walls."""
    dist = np.full((maze.side, maze.side), -1, dtype=int)
    if not maze.is_open(source):
        return dist
    dist[source] = 0
    queue = deque([source])
    while queue:
        r, c = queue.popleft()
        for dr, dc in DELTAS.values():
            nxt = (r + dr, c + dc)
            if maze.is_open(nxt) and dist[nxt] < 0:
                dist[nxt] = dist[r, c] + 1
                queue.append(nxt)
    return dist


def place_wall(maze: MazeMap, cell: Cell) -> MazeMap:
    """New map with a wall added at cell; rejects invalid placements."""
    if not maze.in_grid(cell):
        raise ConfigError(f"cell {cell} outside {maze.side}x{maze.side} grid")
    if cell in (maze.start, maze.end):
        raise ProtectedCellError(f"cannot wall the {'start' if cell == maze.start else 'end'} cell {cell}")
    if maze.walls[cell]:
        raise OccupiedCellError(f"cell {cell} is already a wall")
    walls = np.array(maze.walls)
    walls[cell] = True
    candidate = MazeMap(maze.side, walls)
    if not is_connected(candidate):
        raise DisconnectingWallError(f"wall at {cell} would cut every start-to-end path")
    return candidate


def maze_mdp(maze: MazeMap, step_reward: float = -1.0, discount: float = 1.0) -> TabularMdp:
    """Deterministic MDP view: wall or off-grid moves stay put, end is terminal."""
    n = maze.side
    ns = n * n
    transition = np.zeros((ns, len(ACTIONS), ns))
    reward = np.full((ns, len(ACTIONS)), float(step_reward))
    for r in range(n):
        for c in range(n):
            s = r * n + c
            for ai, name in enumerate(ACTIONS):
                dr, dc = DELTAS[name]
                nxt = (r + dr, c + dc)
                target = maze.cell_index(nxt) if maze.is_open(nxt) else s
                transition[s, ai, target] = 1.0
    start_dist = np.zeros(ns)
    start_dist[maze.cell_index(maze.start)] = 1.0
    return TabularMdp(
        transition=transition,
        reward=reward,
        discount=discount,
        start_dist=start_dist,
        terminal_states=frozenset({maze.cell_index(maze.end)}),
    )


def render_ascii(maze: MazeMap, overlay_path=None) -> str:
    """Fixed-width rendering: '#' wall, '.' free, 'S'/'E' endpoints, '*' path."""
    on_path = set(overlay_path or [])
    rows = []
    for r in range(maze.side):
        row = []
        for c in range(maze.side):
            cell = (r, c)
            if cell == maze.start:
                row.append("S")
            elif cell == maze.end:
                row.append("E")
            elif maze.walls[cell]:
                row.append("#")
            elif cell in on_path:
                row.append("*")
            else:
                row.append(".")
        rows.append("".join(row))
    return "\n".join(rows)


def parse_ascii(text: str) -> MazeMap:
    """Inverse of render_ascii (path overlays parse as free cells)."""
    lines = [line for line in text.strip("\n").split("\n")]
    n = len(lines)
    walls = np.zeros((n, n), dtype=bool)
    for r, line in enumerate(lines):
        if len(line) != n:
            raise ConfigError(f"line {r} has length {len(line)}, expected {n}")
        for c, ch in enumerate(line):
            if ch == "#":
                walls[r, c] = True
            elif ch not in ".SE*":
                raise ConfigError(f"unexpected character {ch!r} at ({r}, {c})")
    maze = MazeMap(n, walls)
    if lines[0][0] != "S" or lines[-1][-1] != "E":
        raise ConfigError("start/end markers missing from the corner cells")
    return maze


def save_map(maze: MazeMap) -> str:
    """Map file format: first line the side length, then the ASCII grid."""
    return f"{maze.side}\n{render_ascii(maze)}\n"


def load_map(text: str) -> MazeMap:
    """Parse the map file format produced by save_map."""
    head, _, body = text.partition("\n")
    n = int(head.strip())
    maze = parse_ascii(body)
    if maze.side != n:
        raise ConfigError(f"declared side {n} does not match grid side {maze.side}")
    return maze
