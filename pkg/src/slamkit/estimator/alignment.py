"""Closed-form 3D-3D estimators: similarity alignment, affine fit, plane fit."""

from __future__ import annotations

import numpy as np

from ..errors import DegeneracyError
from ..transform import SE3, SIM3, SO3


def _check_points(pts, name, min_count):
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"{name} must be (N, 3), got {pts.shape}")
    if pts.shape[0] < min_count:
        raise DegeneracyError(f"{name}: need at least {min_count} points, got {pts.shape[0]}")
    return pts


def sim3_horn(src, dst, with_scale: bool = True) -> SIM3:
    """Least-squares similarity ``g`` with ``dst ~ g(src)`` (Horn/Umeyama).

    Requires non-collinear points; the reflection case is repaired by
    flipping the smallest singular direction.
    """
    src = _check_points(src, "src", 3)
    dst = _check_points(dst, "dst", 3)
    if src.shape != dst.shape:
        raise ValueError("src and dst must have equal counts")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    xs = src - mu_s
    xd = dst - mu_d
    var_s = float(np.mean(np.sum(xs * xs, axis=1)))
    cov = xd.T @ xs / src.shape[0]
    u, d, vt = np.linalg.svd(cov)
    if d[1] <= max(d[0], 1.0) * 1e-12:
        raise DegeneracyError("source points are collinear; rotation is not unique")
    s = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[2, 2] = -1.0
    rot = u @ s @ vt
    if with_scale:
        if var_s <= 0.0:
            raise DegeneracyError("source points are coincident")
        scale = float(np.trace(np.diag(d) @ s)) / var_s
        if scale <= 0.0:
            raise DegeneracyError("alignment collapsed to non-positive scale")
    else:
        scale = 1.0
    t = mu_d - scale * (rot @ mu_s)
    return SIM3(SO3.from_matrix(rot), t, scale)


def rigid_align(src, dst) -> SE3:
    """Least-squares rigid ``dst ~ R src + t``."""
    g = sim3_horn(src, dst, with_scale=False)
    return SE3(g.r, g.t)


def affine3d_4pt(src, dst) -> np.ndarray:
    """Least-squares 3D affine map as a 3x4 matrix ``[A | t]``."""
    src = _check_points(src, "src", 4)
    dst = _check_points(dst, "dst", 4)
    if src.shape != dst.shape:
        raise ValueError("src and dst must have equal counts")
    design = np.hstack([src, np.ones((src.shape[0], 1))])
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[3] <= sv[0] * 1e-10:
        raise DegeneracyError("source points are coplanar; affine map is not unique")
    sol, *_ = np.linalg.lstsq(design, dst, rcond=None)
    return sol.T  # (3, 4)


def plane_fit(pts):
    """Best plane ``normal . x = offset`` with ``offset >= 0``.

    At ``offset == 0`` the sign is fixed by making the first nonzero
    normal component positive.
    """
    pts = _check_points(pts, "pts", 3)
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    if sv[1] <= max(sv[0], 1.0) * 1e-12:
        raise DegeneracyError("points are collinear; plane is not unique")
    normal = vt[2]
    offset = float(normal @ centroid)
    if offset < 0.0 or (abs(offset) < 1e-12 and _first_nonzero_sign(normal) < 0):
        normal = -normal
        offset = -offset
    return normal, offset


def _first_nonzero_sign(v):
    for c in v:
        if c != 0.0:
            return 1.0 if c > 0 else -1.0
    return 1.0
