"""Classify optimization problem classes from sampled landscapes with a transformer set encoder."""

from .fnsuite import InstanceSpec, ProblemInstance, evaluate, make_instance, suite_table
from .model import ModelConfig, TransOptModel
from .sampling import DesignMatrix, build_design, lhs_sample, minmax_scale
from .training import CVReport, FoldResult, TrainConfig, cross_validate, train_fold

__all__ = [
    "CVReport",
    "DesignMatrix",
    "FoldResult",
    "InstanceSpec",
    "ModelConfig",
    "ProblemInstance",
    "TrainConfig",
    "TransOptModel",
    "build_design",
    "cross_validate",
    "evaluate",
    "lhs_sample",
    "make_instance",
    "minmax_scale",
    "suite_table",
    "train_fold",
]
