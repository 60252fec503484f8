"""Train the REINFORCE maze generator against the optimal agent.

The generator network places walls one at a time (invalid placements are
masked out, so every emitted map is connected) and is rewarded with the
number of steps the agent needs. Against the optimal agent on 5x5 the
known exhaustive maximum is a shortest path of 16 — a single serpentine
corridor.

Run: python3 demos/demo_hard_maze_generator.py   (about half a minute)
"""

from envdesign import GeneratorTrainConfig, train_generator
from envdesign.hard_maze import render_ascii, shortest_path_length


def main():
    config = GeneratorTrainConfig(side=5, agent_kind="opt", rounds=300, seed=0)
    print(f"training 5x5 generator vs OPT for {config.rounds} rounds...")
    history = train_generator(config)

    rewards = history.mean_rewards
    k = max(1, len(rewards) // 10)
    print(f"\nmean reward, first 10% of rounds: {rewards[:k].mean():.2f}")
    print(f"mean reward, last 10% of rounds:  {rewards[-k:].mean():.2f}")
    print(f"best reward ever: {history.best_reward:.1f} "
          "(exhaustive 5x5 maximum is 16)")

    best = history.best_map
    print(f"\nbest map (shortest path {shortest_path_length(best)}):")
    print(render_ascii(best))


if __name__ == "__main__":
    main()
