"""Compare the four maze agents on a hand-built map.

OPT plans with BFS distances, DFS explores with E,S,N,W priority and
backtracks, RHS follows the right-hand wall, and the Q agent learns a
tabular policy by epsilon-greedy Q-learning.

Run: python3 demos/demo_agents.py
"""

from envdesign import QLearningConfig, evaluate_agent, make_agent
from envdesign.hard_maze import parse_ascii, render_ascii, shortest_path_length

SERPENTINE = """\
S....
####.
.....
.####
....E"""

POCKET = """\
S....
.###.
.#...
.####
....E"""


def main():
    for name, text in (("serpentine", SERPENTINE), ("pocket", POCKET)):
        maze = parse_ascii(text)
        print(f"{name} map (shortest path {shortest_path_length(maze)}):")
        print(render_ascii(maze))
        for kind in ("opt", "dfs", "rhs", "q"):
            agent = make_agent(
                maze, kind, q_config=QLearningConfig(episodes=800, seed=0)
            )
            episodes = 200 if kind == "q" else 1
            steps = evaluate_agent(maze, agent, max_steps=500, seed=0,
                                   episodes=episodes)
            label = f"{kind} (mean of {episodes})" if episodes > 1 else kind
            print(f"  {label:18s} {steps:.2f} steps")
        print()


if __name__ == "__main__":
    main()
