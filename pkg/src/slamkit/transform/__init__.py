"""Quaternion-backed SO(3), SE(3) and SIM(3) transforms with exp/log maps.

Conventions used throughout the package:

* quaternions are stored ``(x, y, z, w)`` with the scalar part last,
* se(3) tangents are ``(rho, phi)``: translation part first, rotation last,
* sim(3) tangents are ``(rho, phi, sigma)`` with the log-scale last,
* text form is ``"tx ty tz qx qy qz qw"`` and ``"s tx ty tz qx qy qz qw"``.

All types are immutable value objects; every operation returns a new
instance.  Vectorized kernels over arrays of transforms live in
:mod:`slamkit.transform.batch`.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["SO3", "SE3", "SIM3", "TINY_ANGLE", "batch"]

# Angle/scale magnitude below which Taylor series replace the closed forms.
TINY_ANGLE = 1e-8


def _as_vec3(p) -> np.ndarray:
    v = np.asarray(p, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    return v


class SO3:
    """Rotation stored as a unit quaternion ``(x, y, z, w)``."""

    __slots__ = ("x", "y", "z", "w")

    def __init__(self, x=0.0, y=0.0, z=0.0, w=1.0):
        n = math.sqrt(x * x + y * y + z * z + w * w)
        if n == 0.0 or not math.isfinite(n):
            raise ValueError("quaternion norm must be finite and nonzero")
        self.x = x / n
        self.y = y / n
        self.z = z / n
        self.w = w / n

    @classmethod
    def _raw(cls, x, y, z, w):
        # Internal: skip normalization when inputs are unit by construction.
        r = cls.__new__(cls)
        r.x = x
        r.y = y
        r.z = z
        r.w = w
        return r

    @classmethod
    def identity(cls) -> "SO3":
        return cls._raw(0.0, 0.0, 0.0, 1.0)

    @classmethod
    def exp(cls, phi) -> "SO3":
        """Rotation by angle ``|phi|`` about axis ``phi/|phi|``."""
        px, py, pz = float(phi[0]), float(phi[1]), float(phi[2])
        theta_sq = px * px + py * py + pz * pz
        theta = math.sqrt(theta_sq)
        if theta < TINY_ANGLE:
            # sin(t/2)/t and cos(t/2) to second order.
            k = 0.5 - theta_sq / 48.0
            w = 1.0 - theta_sq / 8.0
        else:
            k = math.sin(0.5 * theta) / theta
            w = math.cos(0.5 * theta)
        return cls(px * k, py * k, pz * k, w)

    @classmethod
    def from_matrix(cls, m) -> "SO3":
        """Quaternion from a rotation matrix (largest-diagonal branch)."""
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("expected a 3x3 matrix")
        t = m[0, 0] + m[1, 1] + m[2, 2]
        if t > max(m[0, 0], m[1, 1], m[2, 2]):
            r = math.sqrt(1.0 + t)
            s = 0.5 / r
            return cls((m[2, 1] - m[1, 2]) * s, (m[0, 2] - m[2, 0]) * s,
                       (m[1, 0] - m[0, 1]) * s, 0.5 * r)
        i = int(np.argmax([m[0, 0], m[1, 1], m[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        r = math.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k])
        s = 0.5 / r
        q = [0.0, 0.0, 0.0, (m[k, j] - m[j, k]) * s]
        q[i] = 0.5 * r
        q[j] = (m[j, i] + m[i, j]) * s
        q[k] = (m[k, i] + m[i, k]) * s
        return cls(q[0], q[1], q[2], q[3])

    def log(self) -> np.ndarray:
        """Principal axis-angle vector, ``|result| <= pi``."""
        x, y, z, w = self.x, self.y, self.z, self.w
        if w < 0.0:
            x, y, z, w = -x, -y, -z, -w
        n = math.sqrt(x * x + y * y + z * z)
        if n < TINY_ANGLE:
            k = 2.0 / w * (1.0 - n * n / (3.0 * w * w))
            return np.array([x * k, y * k, z * k])
        if w == 0.0:
            # theta == pi: q and -q coincide; fix the axis sign so the
            # first nonzero component is positive.
            axis = np.array([x, y, z]) / n
            for c in axis:
                if c != 0.0:
                    if c < 0.0:
                        axis = -axis
                    break
            return axis * math.pi
        k = 2.0 * math.atan2(n, w) / n
        return np.array([x * k, y * k, z * k])

    def inverse(self) -> "SO3":
        return SO3._raw(-self.x, -self.y, -self.z, self.w)

    def __mul__(self, other: "SO3") -> "SO3":
        x1, y1, z1, w1 = self.x, self.y, self.z, self.w
        x2, y2, z2, w2 = other.x, other.y, other.z, other.w
        return SO3._raw(
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        )

    def act(self, p):
        """Rotate a 3-vector or an (N, 3) array of vectors."""
        p = np.asarray(p, dtype=float)
        if p.ndim == 2:
            return batch.quat_rotate(self.quaternion()[None, :], p)
        px, py, pz = p
        x, y, z, w = self.x, self.y, self.z, self.w
        tx = 2.0 * (y * pz - z * py)
        ty = 2.0 * (z * px - x * pz)
        tz = 2.0 * (x * py - y * px)
        return np.array([
            px + w * tx + y * tz - z * ty,
            py + w * ty + z * tx - x * tz,
            pz + w * tz + x * ty - y * tx,
        ])

    def matrix(self) -> np.ndarray:
        x, y, z, w = self.x, self.y, self.z, self.w
        xx, yy, zz = x * x, y * y, z * z
        xy, xz, yz = x * y, x * z, y * z
        wx, wy, wz = w * x, w * y, w * z
        return np.array([
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ])

    def quaternion(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.w])

    def approx_equal(self, other: "SO3", tol: float = 1e-9) -> bool:
        # Up to quaternion sign (double cover).
        d = abs(self.x * other.x + self.y * other.y
                + self.z * other.z + self.w * other.w)
        return abs(d - 1.0) < tol

    def __repr__(self):
        return f"SO3(x={self.x:.9g}, y={self.y:.9g}, z={self.z:.9g}, w={self.w:.9g})"


def _so3_v_coeffs(theta_sq: float):
    """Coefficients B, C of V = I + B*hat + C*hat^2 for se(3) exp."""
    if theta_sq < TINY_ANGLE * TINY_ANGLE:
        return 0.5 - theta_sq / 24.0, 1.0 / 6.0 - theta_sq / 120.0
    theta = math.sqrt(theta_sq)
    return (1.0 - math.cos(theta)) / theta_sq, (theta - math.sin(theta)) / (theta_sq * theta)


def _hat(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


class SE3:
    """Rigid transform: rotation plus translation."""

    __slots__ = ("r", "t")

    def __init__(self, r: SO3 | None = None, t=(0.0, 0.0, 0.0)):
        self.r = r if r is not None else SO3.identity()
        tv = np.array(t, dtype=float).reshape(3)
        tv.setflags(write=False)
        self.t = tv

    @classmethod
    def identity(cls) -> "SE3":
        return cls()

    @classmethod
    def exp(cls, xi) -> "SE3":
        """Exponential of a 6-vector tangent ``(rho, phi)``."""
        xi = np.asarray(xi, dtype=float).reshape(6)
        rho, phi = xi[:3], xi[3:]
        r = SO3.exp(phi)
        b, c = _so3_v_coeffs(float(phi @ phi))
        ph = _hat(phi)
        v = np.eye(3) + b * ph + c * (ph @ ph)
        return cls(r, v @ rho)

    def log(self) -> np.ndarray:
        phi = self.r.log()
        theta_sq = float(phi @ phi)
        ph = _hat(phi)
        if theta_sq < TINY_ANGLE * TINY_ANGLE:
            k = 1.0 / 12.0 + theta_sq / 720.0
        else:
            theta = math.sqrt(theta_sq)
            half = 0.5 * theta
            k = (1.0 - half * math.cos(half) / math.sin(half)) / theta_sq
        vinv = np.eye(3) - 0.5 * ph + k * (ph @ ph)
        return np.concatenate([vinv @ self.t, phi])

    def inverse(self) -> "SE3":
        rinv = self.r.inverse()
        return SE3(rinv, -rinv.act(self.t))

    def __mul__(self, other: "SE3") -> "SE3":
        return SE3(self.r * other.r, self.t + self.r.act(other.t))

    def act(self, p):
        return self.r.act(p) + self.t

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.r.matrix()
        m[:3, 3] = self.t
        return m

    def to_line(self) -> str:
        """``"tx ty tz qx qy qz qw"``."""
        q = self.r
        vals = (*self.t, q.x, q.y, q.z, q.w)
        return " ".join(f"{v:.17g}" for v in vals)

    @classmethod
    def from_line(cls, line: str) -> "SE3":
        f = [float(v) for v in line.split()]
        if len(f) != 7:
            raise ValueError(f"expected 7 fields 'tx ty tz qx qy qz qw', got {len(f)}")
        return cls(SO3(f[3], f[4], f[5], f[6]), f[:3])

    def approx_equal(self, other: "SE3", tol: float = 1e-9) -> bool:
        return (self.r.approx_equal(other.r, tol)
                and bool(np.all(np.abs(self.t - other.t) < tol)))

    def __repr__(self):
        return f"SE3(t={self.t.tolist()}, q=[{self.r.x:.9g}, {self.r.y:.9g}, {self.r.z:.9g}, {self.r.w:.9g}])"


def _sim3_w_coeffs(sigma: float, theta_sq: float):
    """Coefficients (a, b, c) of W = a*I + b*hat + c*hat^2 for sim(3) exp.

    W is the integral of ``exp(u*sigma) * exp(u*phi^) du`` over [0, 1]; it
    couples scale and rotation into the translation part.
    """
    small_theta = theta_sq < TINY_ANGLE * TINY_ANGLE
    small_sigma = abs(sigma) < TINY_ANGLE
    if small_sigma:
        a = 1.0 + 0.5 * sigma + sigma * sigma / 6.0
    else:
        a = (math.exp(sigma) - 1.0) / sigma
    if small_theta:
        if small_sigma:
            b = 0.5 + sigma / 3.0
            c = 1.0 / 6.0 + sigma / 8.0
        else:
            es = math.exp(sigma)
            b = (es * (sigma - 1.0) + 1.0) / (sigma * sigma)
            c = (es * (sigma * sigma - 2.0 * sigma + 2.0) - 2.0) / (2.0 * sigma ** 3)
    else:
        theta = math.sqrt(theta_sq)
        es = math.exp(sigma)
        denom = sigma * sigma + theta_sq
        b = (es * (sigma * math.sin(theta) - theta * math.cos(theta)) + theta) / (theta * denom)
        c = (a - (es * (sigma * math.cos(theta) + theta * math.sin(theta)) - sigma) / denom) / theta_sq
    return a, b, c


class SIM3:
    """Similarity transform: scaled rotation plus translation."""

    __slots__ = ("r", "t", "s")

    def __init__(self, r: SO3 | None = None, t=(0.0, 0.0, 0.0), s: float = 1.0):
        s = float(s)
        if not (s > 0.0 and math.isfinite(s)):
            raise ValueError(f"scale must be positive and finite, got {s}")
        self.r = r if r is not None else SO3.identity()
        tv = np.array(t, dtype=float).reshape(3)
        tv.setflags(write=False)
        self.t = tv
        self.s = s

    @classmethod
    def identity(cls) -> "SIM3":
        return cls()

    @classmethod
    def from_se3(cls, g: SE3) -> "SIM3":
        return cls(g.r, g.t, 1.0)

    def se3(self) -> SE3:
        """Rigid part, valid when scale is 1."""
        return SE3(self.r, self.t)

    @classmethod
    def exp(cls, xi) -> "SIM3":
        """Exponential of a 7-vector tangent ``(rho, phi, sigma)``."""
        xi = np.asarray(xi, dtype=float).reshape(7)
        rho, phi, sigma = xi[:3], xi[3:6], float(xi[6])
        r = SO3.exp(phi)
        a, b, c = _sim3_w_coeffs(sigma, float(phi @ phi))
        ph = _hat(phi)
        w = a * np.eye(3) + b * ph + c * (ph @ ph)
        return cls(r, w @ rho, math.exp(sigma))

    def log(self) -> np.ndarray:
        sigma = math.log(self.s)
        phi = self.r.log()
        a, b, c = _sim3_w_coeffs(sigma, float(phi @ phi))
        ph = _hat(phi)
        w = a * np.eye(3) + b * ph + c * (ph @ ph)
        rho = np.linalg.solve(w, self.t)
        return np.concatenate([rho, phi, [sigma]])

    def inverse(self) -> "SIM3":
        rinv = self.r.inverse()
        sinv = 1.0 / self.s
        return SIM3(rinv, rinv.act(self.t) * -sinv, sinv)

    def __mul__(self, other: "SIM3") -> "SIM3":
        return SIM3(self.r * other.r,
                    self.t + self.s * self.r.act(other.t),
                    self.s * other.s)

    def act(self, p):
        return self.s * self.r.act(p) + self.t

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.s * self.r.matrix()
        m[:3, 3] = self.t
        return m

    def to_line(self) -> str:
        """``"s tx ty tz qx qy qz qw"``."""
        q = self.r
        vals = (self.s, *self.t, q.x, q.y, q.z, q.w)
        return " ".join(f"{v:.17g}" for v in vals)

    @classmethod
    def from_line(cls, line: str) -> "SIM3":
        f = [float(v) for v in line.split()]
        if len(f) != 8:
            raise ValueError(f"expected 8 fields 's tx ty tz qx qy qz qw', got {len(f)}")
        return cls(SO3(f[4], f[5], f[6], f[7]), f[1:4], f[0])

    def approx_equal(self, other: "SIM3", tol: float = 1e-9) -> bool:
        return (self.r.approx_equal(other.r, tol)
                and bool(np.all(np.abs(self.t - other.t) < tol))
                and abs(self.s / other.s - 1.0) < tol)

    def __repr__(self):
        return (f"SIM3(s={self.s:.9g}, t={self.t.tolist()}, "
                f"q=[{self.r.x:.9g}, {self.r.y:.9g}, {self.r.z:.9g}, {self.r.w:.9g}])")


from . import batch  # noqa: E402  (batch imports nothing from this module at import time)
