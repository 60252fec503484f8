"""Hard-wall maze maps: connectivity, shortest paths, wall placement, rendering."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envdesign.errors import (
    ConfigError,
    DisconnectingWallError,
    OccupiedCellError,
    ProtectedCellError,
)
from envdesign.hard_maze import (
    MazeMap,
    is_connected,
    load_map,
    maze_mdp,
    parse_ascii,
    place_wall,
    render_ascii,
    save_map,
    shortest_path_length,
)
from envdesign.mdp import expected_return
from envdesign.soft_maze import optimal_agent_policy


def serpentine_5x5():
    walls = np.zeros((5, 5), dtype=bool)
    walls[1, 0:4] = True
    walls[3, 1:5] = True
    return MazeMap(5, walls)


def random_map(rng, side=5, wall_prob=0.3):
    walls = rng.random((side, side)) < wall_prob
    walls[0, 0] = walls[side - 1, side - 1] = False
    return MazeMap(side, walls)


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        self.parent[self.find(a)] = self.find(b)


def union_find_connected(maze):
    """Independent connectivity oracle."""
    n = maze.side
    uf = UnionFind(n * n)
    for r in range(n):
        for c in range(n):
            if maze.walls[r, c]:
                continue
            for dr, dc in ((0, 1), (1, 0)):
                t = (r + dr, c + dc)
                if maze.is_open(t):
                    uf.union(r * n + c, t[0] * n + t[1])
    return uf.find(0) == uf.find(n * n - 1)


class TestConnectivity:
    def test_empty_map_connected(self):
        assert is_connected(MazeMap(5))

    def test_full_wall_row_disconnects(self):
        walls = np.zeros((5, 5), dtype=bool)
        walls[2, :] = True
        assert not is_connected(MazeMap(5, walls))

    def test_agrees_with_union_find_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            maze = random_map(rng)
            assert is_connected(maze) == union_find_connected(maze)


class TestShortestPath:
    def test_empty_map_manhattan(self):
        for n in (2, 5, 8):
            assert shortest_path_length(MazeMap(n)) == 2 * (n - 1)

    def test_serpentine(self):
        assert shortest_path_length(serpentine_5x5()) == 16

    def test_disconnected_is_none(self):
        walls = np.zeros((5, 5), dtype=bool)
        walls[2, :] = True
        assert shortest_path_length(MazeMap(5, walls)) is None


class TestPlaceWall:
    def test_off_path_wall_keeps_shortest_path(self):
        new = place_wall(MazeMap(5), (2, 2))
        assert new.walls[2, 2]
        assert shortest_path_length(new) == 8

    def test_wall_at_start_rejected(self):
        with pytest.raises(ProtectedCellError):
            place_wall(MazeMap(5), (0, 0))

    def test_wall_at_end_rejected(self):
        with pytest.raises(ProtectedCellError):
            place_wall(MazeMap(5), (4, 4))

    def test_occupied_cell_rejected(self):
        maze = place_wall(MazeMap(5), (2, 2))
        with pytest.raises(OccupiedCellError):
            place_wall(maze, (2, 2))

    def test_disconnecting_wall_rejected(self):
        maze = MazeMap(3)
        maze = place_wall(maze, (0, 1))
        maze = place_wall(maze, (1, 1))
        # (1, 0) would complete a full cut around the start
        with pytest.raises(DisconnectingWallError):
            place_wall(maze, (1, 0))

    def test_does_not_mutate_input(self):
        maze = MazeMap(5)
        place_wall(maze, (2, 2))
        assert not maze.walls.any()

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_arbitrary_wall_sequences_stay_connected(self, seed):
        rng = np.random.default_rng(seed)
        maze = MazeMap(4)
        lengths = [shortest_path_length(maze)]
        for _ in range(10):
            cell = (int(rng.integers(4)), int(rng.integers(4)))
            try:
                maze = place_wall(maze, cell)
            except (OccupiedCellError, ProtectedCellError, DisconnectingWallError):
                continue
            assert is_connected(maze)
            lengths.append(shortest_path_length(maze))
        # shortest path is monotone non-decreasing under wall placement
        assert all(b >= a for a, b in zip(lengths, lengths[1:]))


class TestMazeMdp:
    def test_empty_map_optimal_return(self):
        for n in (3, 5):
            mdp = maze_mdp(MazeMap(n))
            policy = optimal_agent_policy(mdp)
            assert expected_return(mdp, policy) == pytest.approx(-2 * (n - 1))

    def test_serpentine_optimal_return_matches_bfs(self):
        maze = serpentine_5x5()
        mdp = maze_mdp(maze)
        policy = optimal_agent_policy(mdp)
        assert expected_return(mdp, policy) == pytest.approx(-16.0)

    def test_wall_adjacent_stay_is_deterministic_self_loop(self):
        maze = place_wall(MazeMap(3), (0, 1))
        mdp = maze_mdp(maze)
        # from (0,0), action E (index 3) walks into the wall and stays
        row = mdp.transition[0, 3]
        assert row[0] == 1.0
        assert row.sum() == 1.0

    def test_optimal_return_equals_negated_shortest_path_on_random_maps(self):
        rng = np.random.default_rng(1)
        checked = 0
        while checked < 50:
            maze = random_map(rng)
            if not is_connected(maze):
                continue
            # exact evaluation at gamma=1 needs the end to be reachable from
            # every MDP state, including wall cells (which may step onto an
            # open neighbor), not just from the start
            reach = {maze.end}
            frontier = [maze.end]
            while frontier:
                r, c = frontier.pop()
                for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                    t = (r + dr, c + dc)
                    # any cell may move onto an open cell already in reach
                    if 0 <= t[0] < 5 and 0 <= t[1] < 5 and t not in reach:
                        if maze.is_open((r, c)):
                            reach.add(t)
                            frontier.append(t)
            if len(reach) != 25:
                continue
            mdp = maze_mdp(maze)
            policy = optimal_agent_policy(mdp)
            assert expected_return(mdp, policy) == -shortest_path_length(maze)
            checked += 1


class TestRendering:
    def test_empty_2x2(self):
        assert render_ascii(MazeMap(2)) == "S.\n.E"

    def test_single_wall_2x2(self):
        maze = place_wall(MazeMap(2), (0, 1))
        assert render_ascii(maze) == "S#\n.E"

    def test_render_parse_round_trip(self):
        maze = serpentine_5x5()
        again = parse_ascii(render_ascii(maze))
        assert np.array_equal(again.walls, maze.walls)

    def test_overlay_path(self):
        text = render_ascii(MazeMap(3), overlay_path=[(0, 1), (0, 2)])
        assert text.splitlines()[0] == "S**"

    def test_map_file_round_trip(self):
        maze = serpentine_5x5()
        text = save_map(maze)
        assert text.startswith("5\n")
        again = load_map(text)
        assert np.array_equal(again.walls, maze.walls)
        assert save_map(again) == text

    def test_parse_rejects_ragged_lines(self):
        with pytest.raises(ConfigError):
            parse_ascii("S.\n.E.")

    def test_load_rejects_side_mismatch(self):
        with pytest.raises(ConfigError):
            load_map("3\nS.\n.E")
