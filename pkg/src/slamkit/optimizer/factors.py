"""Shipped residual types with analytic Jacobians.

The Jacobian of ``log`` around a group element is evaluated exactly through
the integral identity  J_l(xi) = phi(ad_xi),  phi(A) = sum A^n/(n+1)!,
computed with one block matrix exponential; this covers SE3 and SIM3
uniformly with no small-angle case analysis.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ..transform import SE3, SIM3
from .problem import Huber, ResidualBlock


def _hat(v):
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def se3_adjoint(g: SE3) -> np.ndarray:
    r = g.r.matrix()
    adj = np.zeros((6, 6))
    adj[:3, :3] = r
    adj[:3, 3:] = _hat(g.t) @ r
    adj[3:, 3:] = r
    return adj


def sim3_adjoint(g: SIM3) -> np.ndarray:
    r = g.r.matrix()
    adj = np.zeros((7, 7))
    adj[:3, :3] = g.s * r
    adj[:3, 3:6] = _hat(g.t) @ r
    adj[:3, 6] = -g.t
    adj[3:6, 3:6] = r
    adj[6, 6] = 1.0
    return adj


def _se3_ad(xi):
    ad = np.zeros((6, 6))
    ph = _hat(xi[3:6])
    ad[:3, :3] = ph
    ad[:3, 3:] = _hat(xi[:3])
    ad[3:, 3:] = ph
    return ad


def _sim3_ad(xi):
    ad = np.zeros((7, 7))
    ph = _hat(xi[3:6])
    ad[:3, :3] = xi[6] * np.eye(3) + ph
    ad[:3, 3:6] = _hat(xi[:3])
    ad[:3, 6] = -xi[:3]
    ad[3:6, 3:6] = ph
    return ad


def _phi(a: np.ndarray) -> np.ndarray:
    """phi(A) = integral of expm(u*A) du over [0, 1]."""
    d = a.shape[0]
    blk = np.zeros((2 * d, 2 * d))
    blk[:d, :d] = a
    blk[:d, d:] = np.eye(d)
    return scipy.linalg.expm(blk)[:d, d:]


def left_jacobian_inverse(xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    ad = _se3_ad(xi) if xi.shape[0] == 6 else _sim3_ad(xi)
    return np.linalg.inv(_phi(ad))


def right_jacobian_inverse(xi: np.ndarray) -> np.ndarray:
    return left_jacobian_inverse(-np.asarray(xi, dtype=float))


class RelativePoseResidual(ResidualBlock):
    """Pose-graph edge: ``sqrt_info * log(measured^-1 T_i^-1 T_j)``."""

    def __init__(self, key_i, key_j, measured, sqrt_info=None,
                 loss: Huber | None = None):
        self.keys = (key_i, key_j)
        self.measured = measured
        self.measured_inv = measured.inverse()
        self.dim = 7 if isinstance(measured, SIM3) else 6
        self.sqrt_info = (np.eye(self.dim) if sqrt_info is None
                          else np.asarray(sqrt_info, dtype=float))
        self.loss = loss

    def _error(self, ti, tj):
        return self.measured_inv * ti.inverse() * tj

    def residual(self, ti, tj):
        return self.sqrt_info @ self._error(ti, tj).log()

    def jacobians(self, ti, tj):
        err = self._error(ti, tj).log()
        adj = (sim3_adjoint if self.dim == 7 else se3_adjoint)(tj.inverse())
        jr_inv = right_jacobian_inverse(err)
        jj = self.sqrt_info @ jr_inv @ adj
        return [-jj, jj]


class ReprojectionResidual(ResidualBlock):
    """Normalized-plane reprojection of a world point through T_cw."""

    dim = 2

    def __init__(self, pose_key, point_key, observation, weight: float = 1.0,
                 loss: Huber | None = None):
        self.keys = (pose_key, point_key)
        self.observation = np.asarray(observation, dtype=float).reshape(2)
        self.weight = float(weight)
        self.loss = loss

    def residual(self, t_cw, point):
        p = t_cw.act(point)
        if p[2] <= 1e-12:
            return np.full(2, np.inf)
        return self.weight * (p[:2] / p[2] - self.observation)

    def jacobians(self, t_cw, point):
        p = t_cw.act(point)
        z = p[2]
        dproj = np.array([[1.0 / z, 0.0, -p[0] / (z * z)],
                          [0.0, 1.0 / z, -p[1] / (z * z)]])
        j_pose = np.hstack([dproj, dproj @ (-_hat(p))])
        j_point = dproj @ t_cw.r.matrix()
        return [self.weight * j_pose, self.weight * j_point]
