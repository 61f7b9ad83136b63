"""Meta-learning performers: policy networks, A2C training, tuning."""

from .a2c import (
    A2CConfig,
    A2CMetaLearner,
    LossBreakdown,
    RolloutBuffer,
    a2c_update,
    action_distribution,
    collect_rollout,
    load_agent,
    play_episode,
    returns_and_advantages,
    save_agent,
    train_agent,
)
from .encoding import AgentObservation, initial_observation, observe
from .policies import CoRelNetAgent, RnnAgent, build_agent
from .tuner import (
    SearchSpace,
    TrialRecord,
    read_trial_log,
    sample_config,
    tune,
    write_trial_log,
)

__all__ = [
    "A2CConfig",
    "A2CMetaLearner",
    "AgentObservation",
    "CoRelNetAgent",
    "LossBreakdown",
    "RnnAgent",
    "RolloutBuffer",
    "SearchSpace",
    "TrialRecord",
    "a2c_update",
    "action_distribution",
    "build_agent",
    "collect_rollout",
    "initial_observation",
    "load_agent",
    "observe",
    "play_episode",
    "read_trial_log",
    "returns_and_advantages",
    "sample_config",
    "save_agent",
    "train_agent",
    "tune",
    "write_trial_log",
]
