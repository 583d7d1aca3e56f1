"""Random forest conditional density estimation and ghost-defender evaluation."""

from ._core import (
    Forest,
    adjusted_coordinates,
    angular_difference,
    expected_value,
    load_snapshot_features,
    play_value,
    sample_trajectories,
    train,
    trajectory_weights,
    weighted_kde,
    write_synthetic_dataset,
    yac_grid,
)

__all__ = [
    "Forest",
    "adjusted_coordinates",
    "angular_difference",
    "expected_value",
    "load_snapshot_features",
    "play_value",
    "sample_trajectories",
    "train",
    "trajectory_weights",
    "weighted_kde",
    "write_synthetic_dataset",
    "yac_grid",
]
