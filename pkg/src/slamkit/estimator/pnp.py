"""Absolute-pose solvers from 2D-3D correspondences.

Both solvers return camera-from-world transforms: for a returned pose
``T``, ``T.act(world_point)`` is the point in camera coordinates, and its
normalized projection matches the observation.
"""

from __future__ import annotations

import itertools

import numpy as np

from ..errors import DegeneracyError, SolverFailureError
from ..transform import SE3
from .alignment import rigid_align


def _check_inputs(points3d, points2d, n_min):
    w = np.asarray(points3d, dtype=float)
    x = np.asarray(points2d, dtype=float)
    if w.ndim != 2 or w.shape[1] != 3 or x.ndim != 2 or x.shape[1] != 2:
        raise ValueError("expected (N, 3) world points and (N, 2) normalized points")
    if len(w) != len(x) or len(w) < n_min:
        raise ValueError(f"need >= {n_min} paired correspondences")
    return w, x


def _reprojection_rms(pose, w, x):
    p_c = pose.act(w)
    if np.any(p_c[:, 2] <= 0):
        return np.inf
    proj = p_c[:, :2] / p_c[:, 2:3]
    return float(np.sqrt(np.mean(np.sum((proj - x) ** 2, axis=1))))


# -- EPnP ---------------------------------------------------------------


def pnp_epnp(points3d, points2d) -> SE3:
    """Pose from >= 4 correspondences via the control-point parametrization.

    World points are expressed barycentrically in 4 control points; the
    camera-frame control points live in the null space of a 2Nx12 design,
    with the combination weights fixed by control-point distances and a
    short Gauss-Newton polish.  Coplanar world points are rejected.
    """
    w, x = _check_inputs(points3d, points2d, 4)
    n = len(w)

    c0 = w.mean(axis=0)
    centered = w - c0
    cov = centered.T @ centered / n
    eigval, eigvec = np.linalg.eigh(cov)
    if eigval[0] <= max(eigval[2], 1e-12) * 1e-8:
        raise DegeneracyError("world points are coplanar; control points degenerate")
    ctrl = np.vstack([c0] + [c0 + np.sqrt(eigval[k]) * eigvec[:, k] for k in (2, 1, 0)])

    alphas = np.empty((n, 4))
    m3 = (ctrl[1:] - c0).T
    betas_bary = np.linalg.solve(m3, centered.T).T
    alphas[:, 1:] = betas_bary
    alphas[:, 0] = 1.0 - betas_bary.sum(axis=1)

    m = np.zeros((2 * n, 12))
    for j in range(4):
        m[0::2, 3 * j] = alphas[:, j]
        m[0::2, 3 * j + 2] = -alphas[:, j] * x[:, 0]
        m[1::2, 3 * j + 1] = alphas[:, j]
        m[1::2, 3 * j + 2] = -alphas[:, j] * x[:, 1]
    _, _, vt = np.linalg.svd(m)
    nullv = vt[-4:][::-1].reshape(4, 4, 3)  # v1..v4, each 4 control points

    pairs = list(itertools.combinations(range(4), 2))
    dv = np.stack([[v[i] - v[j] for i, j in pairs] for v in nullv])  # (4, 6, 3)
    dist_sq = np.array([np.sum((ctrl[i] - ctrl[j]) ** 2) for i, j in pairs])

    best_pose = None
    best_err = np.inf
    for case in (1, 2, 3):
        betas = _approximate_betas(dv, dist_sq, case)
        betas = _refine_betas(dv, dist_sq, betas)
        ctrl_cam = np.tensordot(betas, nullv, axes=1)
        points_cam = alphas @ ctrl_cam
        if np.mean(points_cam[:, 2]) < 0:
            points_cam = -points_cam
        try:
            pose = rigid_align(w, points_cam)
        except DegeneracyError:
            continue
        err = _reprojection_rms(pose, w, x)
        if err < best_err:
            best_pose, best_err = pose, err
    if best_pose is None:
        raise SolverFailureError("no valid control-point configuration found")
    return best_pose


def _approximate_betas(dv, dist_sq, case):
    betas = np.zeros(4)
    if case == 1:
        norms = np.linalg.norm(dv[0], axis=1)
        betas[0] = float(norms @ np.sqrt(dist_sq)) / float(norms @ norms)
        return betas
    if case == 2:
        # unknowns [b11, b12, b22]
        l = np.stack([np.sum(dv[0] * dv[0], axis=1),
                      2.0 * np.sum(dv[0] * dv[1], axis=1),
                      np.sum(dv[1] * dv[1], axis=1)], axis=1)
        sol, *_ = np.linalg.lstsq(l, dist_sq, rcond=None)
        b1 = np.sqrt(abs(sol[0]))
        betas[0] = b1
        betas[1] = sol[1] / b1 if b1 > 1e-12 else np.sqrt(abs(sol[2]))
        return betas
    # case 3: unknowns [b11, b12, b22, b13, b23, b33]
    l = np.stack([np.sum(dv[0] * dv[0], axis=1),
                  2.0 * np.sum(dv[0] * dv[1], axis=1),
                  np.sum(dv[1] * dv[1], axis=1),
                  2.0 * np.sum(dv[0] * dv[2], axis=1),
                  2.0 * np.sum(dv[1] * dv[2], axis=1),
                  np.sum(dv[2] * dv[2], axis=1)], axis=1)
    sol, *_ = np.linalg.lstsq(l, dist_sq, rcond=None)
    b1 = np.sqrt(abs(sol[0]))
    betas[0] = b1
    if b1 > 1e-12:
        betas[1] = sol[1] / b1
        betas[2] = sol[3] / b1
    return betas


def _refine_betas(dv, dist_sq, betas, iters=10):
    betas = betas.copy()
    for _ in range(iters):
        edges = np.tensordot(betas, dv, axes=1)        # (6, 3)
        residual = np.sum(edges * edges, axis=1) - dist_sq
        jac = 2.0 * np.einsum("ek,bek->eb", edges, dv)  # (6, 4)
        jtj = jac.T @ jac + 1e-12 * np.eye(4)
        step = np.linalg.solve(jtj, -jac.T @ residual)
        betas += step
        if np.max(np.abs(step)) < 1e-14:
            break
    return betas


# -- P3P ----------------------------------------------------------------


def p3p(points3d, points2d) -> list[SE3]:
    """Up to four poses from exactly 3 correspondences.

    The two depth-ratio constraints from the law of cosines reduce to a
    quartic; each admissible root fixes the three depths, and the pose
    follows from rigid alignment.  Callers disambiguate with a 4th point.
    """
    w, x = _check_inputs(points3d, points2d, 3)
    if len(w) != 3:
        raise ValueError("the minimal solver takes exactly 3 correspondences")

    f = np.hstack([x, np.ones((3, 1))])
    f = f / np.linalg.norm(f, axis=1, keepdims=True)

    a = np.linalg.norm(w[1] - w[2])
    b = np.linalg.norm(w[0] - w[2])
    c = np.linalg.norm(w[0] - w[1])
    if min(a, b, c) < 1e-12:
        raise DegeneracyError("duplicate world points")
    area = np.linalg.norm(np.cross(w[1] - w[0], w[2] - w[0]))
    if area < 1e-12 * max(a, b, c) ** 2:
        raise DegeneracyError("world points are collinear")

    cos_a = float(f[1] @ f[2])
    cos_b = float(f[0] @ f[2])
    cos_c = float(f[0] @ f[1])

    aa = (a / b) ** 2
    cc = (c / b) ** 2
    # u^2 = g1(v) u + g0(v)  and  u^2 = h1 u + h0(v), with s2 = u s1, s3 = v s1
    g0 = np.array([aa - 1.0, -2.0 * aa * cos_b, aa])
    h0 = np.array([cc, -2.0 * cc * cos_b, cc - 1.0])
    num = np.polysub(h0, g0)              # (g1 - h1) u = h0 - g0
    den = np.array([2.0 * cos_a, -2.0 * cos_c])
    quartic = np.polysub(np.polymul(num, num),
                         np.polyadd(np.polymul(2.0 * cos_c * num, den),
                                    np.polymul(h0, np.polymul(den, den))))

    lead = np.flatnonzero(np.abs(quartic) > 1e-14 * max(1.0, np.max(np.abs(quartic))))
    if len(lead) == 0:
        raise SolverFailureError("degenerate depth polynomial")
    roots = np.roots(quartic[lead[0]:])

    poses = []
    for root in roots:
        if abs(root.imag) > 1e-8 * max(1.0, abs(root.real)):
            continue
        v = root.real
        if v <= 0:
            continue
        dv = np.polyval(den, v)
        if abs(dv) > 1e-10:
            candidates_u = [np.polyval(num, v) / dv]
        else:
            disc = cos_c ** 2 + np.polyval(h0, v)
            if disc < 0:
                continue
            candidates_u = [cos_c + np.sqrt(disc), cos_c - np.sqrt(disc)]
        for u in candidates_u:
            if u <= 0:
                continue
            s1_sq = b * b / (1.0 + v * v - 2.0 * v * cos_b)
            if s1_sq <= 0:
                continue
            s1 = np.sqrt(s1_sq)
            depths = np.array([s1, u * s1, v * s1])
            cam = depths[:, None] * f
            try:
                pose = rigid_align(w, cam)
            except DegeneracyError:
                continue
            if not any(_pose_close(pose, p) for p in poses):
                poses.append(pose)
    return poses


def _pose_close(p, q, tol=1e-6):
    return bool(np.linalg.norm(p.t - q.t) < tol and p.r.approx_equal(q.r, tol))
