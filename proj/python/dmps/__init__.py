"""Dynamic model predictive shielding for safe reinforcement learning."""

from ._dmps import (
    Config,
    ConfigError,
    EnvError,
    Environment,
    IoError,
    MissingCheckpoint,
    Shield,
    env_names,
    mcts_oracle_check,
    regret_decay,
    train,
    version,
)

__all__ = [
    "Config",
    "ConfigError",
    "EnvError",
    "Environment",
    "IoError",
    "MissingCheckpoint",
    "Shield",
    "env_names",
    "mcts_oracle_check",
    "regret_decay",
    "train",
    "version",
]
