"""Inverse kinematics of serial manipulators with message passing networks."""

from ._core import (
    Dataset,
    IoError,
    ManipulatorConfig,
    Model,
    NumericalError,
    PreconditionError,
    SaturationError,
    UndefinedMetricError,
    __version__,
    check_collision,
    convex_angle_distance,
    evaluate,
    forward_kinematics,
    generate,
    load_dataset,
    load_model,
    make_config,
    mann_whitney_less,
    r_squared,
    run,
    train,
)

__all__ = [
    "Dataset",
    "IoError",
    "ManipulatorConfig",
    "Model",
    "NumericalError",
    "PreconditionError",
    "SaturationError",
    "UndefinedMetricError",
    "__version__",
    "check_collision",
    "convex_angle_distance",
    "evaluate",
    "forward_kinematics",
    "generate",
    "load_dataset",
    "load_model",
    "make_config",
    "mann_whitney_less",
    "r_squared",
    "run",
    "train",
]
