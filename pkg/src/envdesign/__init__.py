"""Learning to design adversarial environments.

Core pieces: exact tabular-MDP machinery (mdp), the dual MDP-policy
construction and transition gradients (duality), a continuous soft-wall
maze optimized by exact gradients (soft_maze), discrete hard-wall mazes
(hard_maze), maze-solving adversaries (agents), a REINFORCE-trained maze
generator (generator), and a reproducible experiment harness (harness).
"""

from .mdp import (
    StochasticPolicy,
    TabularMdp,
    Trajectory,
    episode_return,
    exact_policy_value,
    expected_return,
    sample_episode,
    state_occupancy,
    trajectory_probability,
)
from .duality import (
    DualPair,
    ParametrizedMdp,
    build_dual,
    dual_policy_gradient,
    inverse_map_trajectory,
    map_trajectory,
    verify_duality,
)
from .hard_maze import (
    MazeMap,
    is_connected,
    maze_mdp,
    parse_ascii,
    place_wall,
    render_ascii,
    shortest_path_length,
)
from .soft_maze import (
    SoftMazeConfig,
    SoftTrainConfig,
    SoftWallParams,
    blockage_distribution,
    optimal_agent_policy,
    soft_maze_mdp,
    train_soft_env,
    transition_gradient,
)
from .agents import (
    DfsAgent,
    OptAgent,
    QLearningConfig,
    RhsAgent,
    evaluate_agent,
    make_agent,
    opt_agent,
    q_learning_train,
)
from .generator import (
    GeneratorPolicyParams,
    GeneratorTrainConfig,
    generate_maze,
    generator_reward,
    reinforce_update,
    train_generator,
    valid_actions,
)
from .harness import (
    ExperimentConfig,
    brute_force_max_maze,
    load_config,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
