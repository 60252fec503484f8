"""Train a soft-wall maze against a re-planning optimal agent.

The environment owns one blockage probability per cell (capped at 0.5,
summing to 1) and descends the exact transition gradient of the agent's
expected return. The known endpoint is a pair of 0.5 soft walls forming a
bottleneck around the start or the end cell.

Run: python3 demos/demo_soft_maze.py            (about 10 seconds)
"""

import numpy as np

from envdesign import SoftMazeConfig, SoftTrainConfig, train_soft_env


def ascii_heatmap(blockage, side):
    """Coarse text rendering: '.' near zero up to '#' at the 0.5 cap."""
    glyphs = " .:-=+*%#"
    grid = np.zeros(side * side)
    grid[: blockage.size] = blockage
    lines = []
    for r in range(side):
        row = grid[r * side : (r + 1) * side]
        lines.append(
            "".join(glyphs[min(len(glyphs) - 1, int(v / 0.5 * (len(glyphs) - 1)))]
                    for v in row)
        )
    return "\n".join(lines)


def main():
    config = SoftMazeConfig(side=5)
    hyper = SoftTrainConfig(iterations=2000, learning_rate=1.0, seed=0)
    print("training 5x5 soft maze vs optimal agent "
          f"({hyper.iterations} environment updates)...")
    history = train_soft_env(config, agent_kind="optimal", hyper=hyper)

    first, last = history.records[0], history.records[-1]
    print(f"\nexpected episode steps: {first.expected_steps:.2f} -> "
          f"{last.expected_steps:.2f}")
    print(f"agent return:           {first.agent_return:.3f} -> "
          f"{last.agent_return:.3f}")

    print("\ninitial blockage:")
    print(ascii_heatmap(first.blockage, config.side))
    print("\nfinal blockage (two ~0.5 walls should pin the start or the end):")
    print(ascii_heatmap(last.blockage, config.side))
    print("\nfinal values (row-major, end cell omitted):")
    print(np.array2string(last.blockage.reshape(-1), precision=3))


if __name__ == "__main__":
    main()
