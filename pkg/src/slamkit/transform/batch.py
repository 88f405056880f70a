"""Vectorized transform kernels over arrays of group elements.

Array layouts match the text serialization order:

* rotations: ``(N, 4)`` quaternions ``(x, y, z, w)``,
* rigid: ``(N, 7)`` rows ``tx ty tz qx qy qz qw``,
* similarity: ``(N, 8)`` rows ``s tx ty tz qx qy qz qw``,
* tangents: ``(N, 3)``, ``(N, 6)`` and ``(N, 7)`` with translation first.

These kernels are the throughput path used by the CLI microbenchmark; the
scalar classes in :mod:`slamkit.transform` are the reference they are
tested against.
"""

from __future__ import annotations

import numpy as np

_TINY = 1e-8


def _norm(v, axis=-1, keepdims=True):
    return np.sqrt(np.sum(v * v, axis=axis, keepdims=keepdims))


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ax, ay, az, aw = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bx, by, bz, bw = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ], axis=-1)


def quat_conj(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    out = q.copy()
    out[..., :3] = -out[..., :3]
    return out


def quat_rotate(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Rotate points ``p`` by quaternions ``q`` (shapes broadcast)."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    qv = q[..., :3]
    w = q[..., 3:4]
    t = 2.0 * np.cross(qv, p)
    return p + w * t + np.cross(qv, t)


def so3_exp(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    theta_sq = np.sum(phi * phi, axis=-1, keepdims=True)
    theta = np.sqrt(theta_sq)
    small = theta < _TINY
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(small, 0.5 - theta_sq / 48.0, np.sin(0.5 * theta) / theta)
    w = np.where(small[..., 0], 1.0 - theta_sq[..., 0] / 8.0, np.cos(0.5 * theta[..., 0]))
    return np.concatenate([phi * k, w[..., None]], axis=-1)


def so3_log(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q = np.where(q[..., 3:4] < 0.0, -q, q)
    v = q[..., :3]
    w = q[..., 3]
    n = _norm(v)[..., 0]
    small = n < _TINY
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(small,
                     2.0 / w * (1.0 - n * n / (3.0 * w * w)),
                     2.0 * np.arctan2(n, w) / n)
    out = v * k[..., None]
    # w == 0 is the theta == pi branch: fix the axis sign deterministically.
    at_pi = w == 0.0
    if np.any(at_pi):
        sgn = np.where(v[..., 0] != 0.0, np.sign(v[..., 0]),
                       np.where(v[..., 1] != 0.0, np.sign(v[..., 1]), np.sign(v[..., 2])))
        out = np.where((at_pi & (sgn < 0))[..., None], -out, out)
    return out


def _v_coeffs(theta_sq):
    theta = np.sqrt(theta_sq)
    small = theta < _TINY
    with np.errstate(invalid="ignore", divide="ignore"):
        b = np.where(small, 0.5 - theta_sq / 24.0, (1.0 - np.cos(theta)) / theta_sq)
        c = np.where(small, 1.0 / 6.0 - theta_sq / 120.0,
                     (theta - np.sin(theta)) / (theta_sq * theta))
    return b, c


def se3_exp(xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    rho, phi = xi[..., :3], xi[..., 3:6]
    q = so3_exp(phi)
    theta_sq = np.sum(phi * phi, axis=-1, keepdims=True)
    b, c = _v_coeffs(theta_sq)
    cr = np.cross(phi, rho)
    t = rho + b * cr + c * np.cross(phi, cr)
    return np.concatenate([t, q], axis=-1)


def se3_log(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    t, q = g[..., :3], g[..., 3:7]
    phi = so3_log(q)
    theta_sq = np.sum(phi * phi, axis=-1, keepdims=True)
    theta = np.sqrt(theta_sq)
    small = theta < _TINY
    half = 0.5 * theta
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(small, 1.0 / 12.0 + theta_sq / 720.0,
                     (1.0 - half * np.cos(half) / np.sin(half)) / theta_sq)
    ct = np.cross(phi, t)
    rho = t - 0.5 * ct + k * np.cross(phi, ct)
    return np.concatenate([rho, phi], axis=-1)


def se3_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = a[..., :3] + quat_rotate(a[..., 3:7], b[..., :3])
    q = quat_mul(a[..., 3:7], b[..., 3:7])
    return np.concatenate([t, q], axis=-1)


def se3_inverse(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    qi = quat_conj(g[..., 3:7])
    t = -quat_rotate(qi, g[..., :3])
    return np.concatenate([t, qi], axis=-1)


def se3_apply(g: np.ndarray, p: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return quat_rotate(g[..., 3:7], p) + g[..., :3]


def _w_coeffs(sigma, theta_sq):
    """Vectorized sim(3) translation coefficients (a, b, c)."""
    theta = np.sqrt(theta_sq)
    small_t = theta < _TINY
    small_s = np.abs(sigma) < _TINY
    es = np.exp(sigma)
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(small_s, 1.0 + 0.5 * sigma + sigma * sigma / 6.0, (es - 1.0) / sigma)
        b_ss = 0.5 + sigma / 3.0
        c_ss = 1.0 / 6.0 + sigma / 8.0
        b_s = (es * (sigma - 1.0) + 1.0) / (sigma * sigma)
        c_s = (es * (sigma * sigma - 2.0 * sigma + 2.0) - 2.0) / (2.0 * sigma ** 3)
        denom = sigma * sigma + theta_sq
        b_g = (es * (sigma * np.sin(theta) - theta * np.cos(theta)) + theta) / (theta * denom)
        c_g = (a - (es * (sigma * np.cos(theta) + theta * np.sin(theta)) - sigma) / denom) / theta_sq
    b = np.where(small_t, np.where(small_s, b_ss, b_s), b_g)
    c = np.where(small_t, np.where(small_s, c_ss, c_s), c_g)
    return a, b, c


def _w_apply(sigma, phi, rho):
    theta_sq = np.sum(phi * phi, axis=-1, keepdims=True)
    a, b, c = _w_coeffs(sigma[..., None], theta_sq)
    cr = np.cross(phi, rho)
    return a * rho + b * cr + c * np.cross(phi, cr)


def sim3_exp(xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    rho, phi, sigma = xi[..., :3], xi[..., 3:6], xi[..., 6]
    q = so3_exp(phi)
    t = _w_apply(sigma, phi, rho)
    return np.concatenate([np.exp(sigma)[..., None], t, q], axis=-1)


def sim3_log(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    s, t, q = g[..., 0], g[..., 1:4], g[..., 4:8]
    sigma = np.log(s)
    phi = so3_log(q)
    theta_sq = np.sum(phi * phi, axis=-1, keepdims=True)
    a, b, c = _w_coeffs(sigma[..., None], theta_sq)
    # Invert W = a*I + b*hat + c*hat^2 by a stacked 3x3 solve.
    ph = np.zeros(phi.shape[:-1] + (3, 3))
    ph[..., 0, 1] = -phi[..., 2]
    ph[..., 0, 2] = phi[..., 1]
    ph[..., 1, 0] = phi[..., 2]
    ph[..., 1, 2] = -phi[..., 0]
    ph[..., 2, 0] = -phi[..., 1]
    ph[..., 2, 1] = phi[..., 0]
    eye = np.broadcast_to(np.eye(3), ph.shape)
    w = a[..., None] * eye + b[..., None] * ph + c[..., None] * (ph @ ph)
    rho = np.linalg.solve(w, t[..., None])[..., 0]
    return np.concatenate([rho, phi, sigma[..., None]], axis=-1)


def sim3_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = a[..., 0] * b[..., 0]
    t = a[..., 1:4] + a[..., 0:1] * quat_rotate(a[..., 4:8], b[..., 1:4])
    q = quat_mul(a[..., 4:8], b[..., 4:8])
    return np.concatenate([s[..., None], t, q], axis=-1)


def sim3_inverse(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    si = 1.0 / g[..., 0:1]
    qi = quat_conj(g[..., 4:8])
    t = -si * quat_rotate(qi, g[..., 1:4])
    return np.concatenate([si, t, qi], axis=-1)


def sim3_apply(g: np.ndarray, p: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return g[..., 0:1] * quat_rotate(g[..., 4:8], p) + g[..., 1:4]


def random_quat(rng: np.random.Generator, n: int) -> np.ndarray:
    q = rng.normal(size=(n, 4))
    return q / _norm(q)


def random_se3(rng: np.random.Generator, n: int, t_scale: float = 1.0) -> np.ndarray:
    return np.concatenate([t_scale * rng.normal(size=(n, 3)), random_quat(rng, n)], axis=-1)


def random_sim3(rng: np.random.Generator, n: int, t_scale: float = 1.0) -> np.ndarray:
    s = np.exp(rng.uniform(-1.0, 1.0, size=(n, 1)))
    return np.concatenate([s, t_scale * rng.normal(size=(n, 3)), random_quat(rng, n)], axis=-1)
