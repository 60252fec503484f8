"""Demonstrate the dual MDP-policy construction and its guarantees.

Builds a small random MDP/policy pair, constructs the dual pair, maps a
sampled trajectory across, and reports the three numeric equalities:
trajectory probabilities, per-trajectory returns, and expected returns.

Run: python3 demos/demo_duality.py
"""

import numpy as np

from envdesign import (
    build_dual,
    expected_return,
    map_trajectory,
    sample_episode,
    trajectory_probability,
    verify_duality,
)
from envdesign.harness import random_mdp


def main():
    rng = np.random.default_rng(0)
    mdp, policy = random_mdp(rng)
    print(f"original MDP: {mdp.num_states} states, {mdp.num_actions} actions, "
          f"gamma={mdp.discount:.3f}")

    pair = build_dual(mdp, policy)
    print(f"dual MDP: {pair.dual_mdp.num_states} composite states "
          f"(state-action pairs), {pair.dual_mdp.num_actions} dual actions "
          f"(original states)\n")

    traj = sample_episode(mdp, policy, seed=1, max_steps=8)
    dual = map_trajectory(traj, pair) if traj.terminated else None
    print(f"sampled trajectory ({len(traj)} steps, terminated={traj.terminated}):")
    print(f"  original probability: {trajectory_probability(mdp, policy, traj):.6g}")
    if dual is not None:
        p_dual = trajectory_probability(pair.dual_mdp, pair.dual_policy, dual)
        print(f"  dual probability:     {p_dual:.6g}")

    j = expected_return(mdp, policy)
    j_dual = expected_return(pair.dual_mdp, pair.dual_policy)
    print(f"\nexpected return (original): {j:.12f}")
    print(f"expected return (dual):     {j_dual:.12f}")

    report = verify_duality(mdp, policy)
    print("\nexhaustive verification (all trajectories to length 4):")
    for name, deviation, ok in report.as_records():
        print(f"  {name:24s} deviation {deviation:.3e}  {'ok' if ok else 'FAIL'}")


if __name__ == "__main__":
    main()
