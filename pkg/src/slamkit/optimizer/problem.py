"""Graph problem container: variable blocks plus residual blocks.

Variables live on manifolds (SE3, SIM3 or plain 3-vectors) and are updated
by left-multiplicative tangent increments ``T <- exp(delta) * T`` (points by
addition).  Tangent ordering is translation first, rotation second, scale
last, matching :mod:`slamkit.transform`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Sequence

import numpy as np

from ..errors import SlamkitError
from ..transform import SE3, SIM3

VAR_SE3 = "se3"
VAR_SIM3 = "sim3"
VAR_POINT = "point"

_DOF = {VAR_SE3: 6, VAR_SIM3: 7, VAR_POINT: 3}


class OptimizerError(SlamkitError):
    pass


class GaugeError(OptimizerError):
    pass


def retract(kind: str, value, delta: np.ndarray):
    """Apply a tangent increment to a variable value."""
    if kind == VAR_SE3:
        return SE3.exp(delta) * value
    if kind == VAR_SIM3:
        return SIM3.exp(delta) * value
    return value + delta


@dataclass
class Variable:
    kind: str
    value: object
    fixed: bool = False

    @property
    def dof(self) -> int:
        return _DOF[self.kind]


@dataclass(frozen=True)
class Huber:
    """Robust loss: quadratic inside ``delta``, linear outside."""

    delta: float

    def weight_and_cost(self, norm: float):
        if norm <= self.delta:
            return 1.0, norm * norm
        return self.delta / norm, 2.0 * self.delta * norm - self.delta ** 2


class ResidualBlock:
    """Base: subclasses provide ``residual`` and optionally ``jacobians``."""

    keys: tuple
    dim: int
    loss: Huber | None = None

    def residual(self, *values) -> np.ndarray:
        raise NotImplementedError

    def jacobians(self, *values):
        """Analytic Jacobians w.r.t. tangent increments, or None."""
        return None


class FunctionResidual(ResidualBlock):
    """Residual defined by a plain function; Jacobians are numeric."""

    def __init__(self, keys: Sequence[Hashable], fn: Callable, dim: int,
                 loss: Huber | None = None):
        self.keys = tuple(keys)
        self.fn = fn
        self.dim = dim
        self.loss = loss

    def residual(self, *values):
        return np.asarray(self.fn(*values), dtype=float).reshape(self.dim)


class GraphProblem:
    def __init__(self):
        self.variables: dict[Hashable, Variable] = {}
        self.residuals: list[ResidualBlock] = []

    def add_se3(self, key, value: SE3, fixed: bool = False):
        self._add(key, Variable(VAR_SE3, value, fixed))

    def add_sim3(self, key, value: SIM3, fixed: bool = False):
        self._add(key, Variable(VAR_SIM3, value, fixed))

    def add_point(self, key, value, fixed: bool = False):
        self._add(key, Variable(VAR_POINT, np.asarray(value, dtype=float).reshape(3),
                                fixed))

    def _add(self, key, var: Variable):
        if key in self.variables:
            raise OptimizerError(f"variable {key!r} already declared")
        self.variables[key] = var

    def add_residual(self, block: ResidualBlock):
        for k in block.keys:
            if k not in self.variables:
                raise OptimizerError(f"residual references unknown variable {k!r}")
        self.residuals.append(block)

    def value(self, key):
        return self.variables[key].value
