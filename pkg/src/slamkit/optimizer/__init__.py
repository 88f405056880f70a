"""Nonlinear least-squares on pose graphs and small bundle adjustment."""

from .factors import (
    RelativePoseResidual,
    ReprojectionResidual,
    left_jacobian_inverse,
    right_jacobian_inverse,
    se3_adjoint,
    sim3_adjoint,
)
from .g2o_io import load_pose_graph, save_pose_graph
from .lm import SolveOptions, SolveReport, numeric_jacobian_check, optimize
from .problem import (
    FunctionResidual,
    GaugeError,
    GraphProblem,
    Huber,
    OptimizerError,
    ResidualBlock,
)
from .slam import bundle_adjust, pose_graph_optimize

__all__ = [
    "FunctionResidual",
    "GaugeError",
    "GraphProblem",
    "Huber",
    "OptimizerError",
    "RelativePoseResidual",
    "ReprojectionResidual",
    "ResidualBlock",
    "SolveOptions",
    "SolveReport",
    "bundle_adjust",
    "left_jacobian_inverse",
    "load_pose_graph",
    "numeric_jacobian_check",
    "optimize",
    "pose_graph_optimize",
    "right_jacobian_inverse",
    "save_pose_graph",
    "se3_adjoint",
    "sim3_adjoint",
]
