"""Planar mapping solvers: projective homography and 2D affine fit."""

from __future__ import annotations

import numpy as np

from ..errors import DegeneracyError
from .epipolar import _hom, _isotropic_normalization


def _any_collinear_triple(pts, tol=1e-9):
    n = len(pts)
    scale = max(float(np.max(np.abs(pts))), 1.0)
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            for k in range(j + 1, n):
                a, b, c = pts[i], pts[j], pts[k]
                area = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
                if area < tol * scale * scale:
                    return True
    return False


def homography_4pt(x1, x2) -> np.ndarray:
    """Projective 2D mapping from >= 4 correspondences (direct linear solve).

    Normalized so ``h33 == 1`` when well scaled, Frobenius norm 1 otherwise.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    n = len(x1)
    if n < 4 or len(x2) != n:
        raise ValueError("need >= 4 paired correspondences")
    if n <= 6 and _any_collinear_triple(x1):
        raise DegeneracyError("three source points are collinear")
    x1n, t1 = _isotropic_normalization(x1)
    x2n, t2 = _isotropic_normalization(x2)
    h1 = _hom(x1n)
    a = np.zeros((2 * n, 9))
    a[0::2, 0:3] = h1
    a[0::2, 6:9] = -x2n[:, 0:1] * h1
    a[1::2, 3:6] = h1
    a[1::2, 6:9] = -x2n[:, 1:2] * h1
    _, sv, vt = np.linalg.svd(a)
    if sv[7] <= sv[0] * 1e-9:
        raise DegeneracyError("homography design matrix is rank-deficient")
    h = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t2) @ h @ t1
    if abs(h[2, 2]) > 1e-12:
        return h / h[2, 2]
    return h / np.linalg.norm(h)


def affine2d_3pt(x1, x2) -> np.ndarray:
    """Least-squares 2D affine map as a 2x3 matrix ``[A | t]``."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    n = len(x1)
    if n < 3 or len(x2) != n:
        raise ValueError("need >= 3 paired correspondences")
    design = _hom(x1)
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[2] <= max(sv[0], 1.0) * 1e-10:
        raise DegeneracyError("source points are collinear; affine map is not unique")
    sol, *_ = np.linalg.lstsq(design, x2, rcond=None)
    return sol.T  # (2, 3)


def apply_homography(h: np.ndarray, x) -> np.ndarray:
    mapped = _hom(np.atleast_2d(np.asarray(x, dtype=float))) @ h.T
    return mapped[:, :2] / mapped[:, 2:3]
