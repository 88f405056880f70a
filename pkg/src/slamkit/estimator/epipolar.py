"""Two-view epipolar solvers on normalized image coordinates.

Inputs are (N, 2) arrays of normalized-plane points (intrinsics already
removed).  The relative-pose convention is ``p2 = R p1 + t`` with
``E = [t]x R``, so the epipolar constraint reads ``x2' E x1 = 0``.
"""

from __future__ import annotations

import numpy as np

from ..errors import AmbiguityError, DegeneracyError, SolverFailureError
from ..transform import SE3, SO3

# -- conditioning -------------------------------------------------------------


def _hom(x):
    x = np.asarray(x, dtype=float)
    return np.hstack([x, np.ones((x.shape[0], 1))])


def _isotropic_normalization(x):
    """Similarity moving the centroid to 0 and mean radius to sqrt(2)."""
    x = np.asarray(x, dtype=float)
    c = x.mean(axis=0)
    d = np.mean(np.linalg.norm(x - c, axis=1))
    s = np.sqrt(2.0) / max(d, 1e-12)
    t = np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])
    return s * (x - c), t


def _epipolar_design(x1n, x2n):
    h1 = _hom(x1n)
    h2 = _hom(x2n)
    return np.einsum("ni,nj->nij", h2, h1).reshape(len(h1), 9)


def _fix_sign(m):
    flat = m.ravel()
    lead = flat[np.argmax(np.abs(flat))]
    return m if lead >= 0 else -m


# -- fundamental matrix -------------------------------------------------------


def fundamental_8pt(x1, x2) -> np.ndarray:
    """Rank-2 fundamental matrix from >= 8 correspondences (least squares)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if len(x1) < 8 or len(x1) != len(x2):
        raise ValueError("need >= 8 paired correspondences")
    x1n, t1 = _isotropic_normalization(x1)
    x2n, t2 = _isotropic_normalization(x2)
    a = _epipolar_design(x1n, x2n)
    _, sv, vt = np.linalg.svd(a)
    if sv[7] <= sv[0] * 1e-9:
        raise DegeneracyError(
            "design matrix is rank-deficient (planar or otherwise degenerate scene)")
    f = vt[-1].reshape(3, 3)
    u, d, v = np.linalg.svd(f)
    f = u @ np.diag([d[0], d[1], 0.0]) @ v
    f = t2.T @ f @ t1
    return _fix_sign(f / np.linalg.norm(f))


def fundamental_7pt(x1, x2) -> list[np.ndarray]:
    """All real solutions (1-3) of the minimal 7-point problem."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape[0] != 7 or x2.shape[0] != 7:
        raise ValueError("the 7-point solver takes exactly 7 correspondences")
    x1n, t1 = _isotropic_normalization(x1)
    x2n, t2 = _isotropic_normalization(x2)
    a = _epipolar_design(x1n, x2n)
    _, sv, vt = np.linalg.svd(a)
    if sv[6] <= sv[0] * 1e-9:
        raise DegeneracyError("rank-deficient 7-point system (duplicate or collinear data)")
    f1 = vt[-1].reshape(3, 3)
    f2 = vt[-2].reshape(3, 3)

    # det(f1 + lam*f2) is cubic in lam; recover coefficients by interpolation
    nodes = np.array([-1.0, 0.0, 1.0, 2.0])
    dets = np.array([np.linalg.det(f1 + lam * f2) for lam in nodes])
    coeffs = np.linalg.solve(np.vander(nodes, 4), dets)  # descending powers

    candidates = []
    if abs(coeffs[0]) > 1e-14:
        roots = np.roots(coeffs)
    else:
        roots = np.roots(coeffs[1:]) if np.any(np.abs(coeffs[1:]) > 1e-14) else []
        if abs(np.linalg.det(f2)) < 1e-12:
            candidates.append(f2)
    for r in roots:
        if abs(r.imag) < 1e-9 * max(1.0, abs(r.real)):
            candidates.append(f1 + r.real * f2)
    if not candidates:
        raise SolverFailureError("no real root of the 7-point cubic")
    out = []
    for f in candidates:
        f = t2.T @ f @ t1
        out.append(_fix_sign(f / np.linalg.norm(f)))
    return out


# -- essential matrix (minimal 5-point) ---------------------------------------

# Monomial bases for polynomials in (x, y, z).  The cubic order below keeps
# all monomials with x/y-degree >= 2 in the first ten columns, which is what
# makes the elimination step close.
_LIN = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0)]
_QUAD = [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2),
         (1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0, 0)]
_CUBIC = [(3, 0, 0), (0, 3, 0), (2, 1, 0), (1, 2, 0), (2, 0, 1), (2, 0, 0),
          (0, 2, 1), (0, 2, 0), (1, 1, 1), (1, 1, 0),
          (1, 0, 2), (1, 0, 1), (1, 0, 0), (0, 1, 2), (0, 1, 1), (0, 1, 0),
          (0, 0, 3), (0, 0, 2), (0, 0, 1), (0, 0, 0)]

_QUAD_IDX = {m: i for i, m in enumerate(_QUAD)}
_CUBIC_IDX = {m: i for i, m in enumerate(_CUBIC)}


def _mul_table(basis_a, basis_b, target_idx):
    table = np.empty((len(basis_a), len(basis_b)), dtype=np.int64)
    for i, ma in enumerate(basis_a):
        for j, mb in enumerate(basis_b):
            table[i, j] = target_idx[tuple(a + b for a, b in zip(ma, mb))]
    return table


_LL = _mul_table(_LIN, _LIN, _QUAD_IDX)
_QL = _mul_table(_QUAD, _LIN, _CUBIC_IDX)

# right-half cubic monomials expressed in the 13-term basis
# [x*z^3, x*z^2, x*z, x, y*z^3, y*z^2, y*z, y, z^4, z^3, z^2, z, 1]
_TO13 = np.array([1, 2, 3, 5, 6, 7, 9, 10, 11, 12])
_TO13_Z = np.array([0, 1, 2, 4, 5, 6, 8, 9, 10, 11])  # same monomials times z


def _mul_ll(a, b):
    out = np.zeros(10)
    np.add.at(out, _LL.ravel(), np.outer(a, b).ravel())
    return out


def _mul_ql(q, l):
    out = np.zeros(20)
    np.add.at(out, _QL.ravel(), np.outer(q, l).ravel())
    return out


def essential_5pt(x1, x2) -> list[np.ndarray]:
    """Candidate essential matrices (up to 10) from >= 5 correspondences.

    Minimal solver: the 4-dimensional null space of the epipolar design is
    constrained by det(E) = 0 and 2 E E' E - trace(E E') E = 0; eliminating
    the ten cubic monomials of x/y-degree >= 2 leaves a 3x3 polynomial
    system in z whose determinant is a degree-10 polynomial.

    Overdetermined input uses the four smallest singular directions.  On
    (nearly) exact data with 6-8 points the answer can sit outside that
    affine chart, so a minimal-subset solve contributes candidates too.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if len(x1) < 5 or len(x1) != len(x2):
        raise ValueError("need >= 5 paired correspondences")
    a = _epipolar_design(x1, x2)
    _, sv, vt = np.linalg.svd(a)
    if len(x1) > 5 and sv[4] <= sv[0] * 1e-12:
        raise DegeneracyError("epipolar design matrix has rank < 5")
    if len(x1) > 8 and sv[8] <= 1e-9 * max(sv[7], 1e-300):
        # (nearly) exact overdetermined data: the null space is the answer
        # itself and the affine chart below cannot reach it
        u, d, v = np.linalg.svd(vt[-1].reshape(3, 3))
        s = 0.5 * (d[0] + d[1])
        e = u @ np.diag([s, s, 0.0]) @ v
        return [_fix_sign(e / np.linalg.norm(e))]
    candidates = []
    failure = None
    try:
        candidates = _essential_chart_solutions(vt)
    except (DegeneracyError, SolverFailureError) as e:
        failure = e
    if 5 < len(x1) < 9:
        try:
            candidates = candidates + essential_5pt(x1[:5], x2[:5])
        except (DegeneracyError, SolverFailureError):
            pass
    if not candidates and failure is not None:
        raise failure
    return _dedupe_matrices(candidates)


def _essential_chart_solutions(vt) -> list[np.ndarray]:
    basis = vt[-4:][::-1]  # rows: X, Y, Z, W
    xm, ym, zm, wm = (b.reshape(3, 3) for b in basis)

    # entries of E = x*X + y*Y + z*Z + W as linear polynomials over [x,y,z,1]
    ent = np.stack([xm, ym, zm, wm], axis=-1)  # (3, 3, 4)

    def lin(i, j):
        return ent[i, j]

    rows = np.zeros((10, 20))
    # det(E) = 0
    det = (_mul_ql(_mul_ll(lin(1, 1), lin(2, 2)) - _mul_ll(lin(1, 2), lin(2, 1)), lin(0, 0))
           + _mul_ql(_mul_ll(lin(1, 2), lin(2, 0)) - _mul_ll(lin(1, 0), lin(2, 2)), lin(0, 1))
           + _mul_ql(_mul_ll(lin(1, 0), lin(2, 1)) - _mul_ll(lin(1, 1), lin(2, 0)), lin(0, 2)))
    rows[0] = det
    # trace constraint: (2 E E' - trace(E E') I) E = 0, nine cubic equations
    ee = np.empty((3, 3, 10))
    for i in range(3):
        for j in range(3):
            ee[i, j] = sum(_mul_ll(lin(i, k), lin(j, k)) for k in range(3))
    tr = ee[0, 0] + ee[1, 1] + ee[2, 2]
    r = 1
    for i in range(3):
        for j in range(3):
            acc = np.zeros(20)
            for k in range(3):
                q = 2.0 * ee[i, k] - (tr if i == k else 0.0)
                acc += _mul_ql(q, lin(k, j))
            rows[r] = acc
            r += 1

    reduced = _gauss_jordan(rows)

    def half(row_idx):
        out = np.zeros(13)
        out[_TO13] = reduced[row_idx, 10:]
        return out

    def half_z(row_idx):
        out = np.zeros(13)
        out[_TO13_Z] = reduced[row_idx, 10:]
        return out

    krow = half(4) - half_z(5)
    lrow = half(6) - half_z(7)
    mrow = half(8) - half_z(9)
    b11, b12, b13 = krow[0:4], krow[4:8], krow[8:13]
    b21, b22, b23 = lrow[0:4], lrow[4:8], lrow[8:13]
    b31, b32, b33 = mrow[0:4], mrow[4:8], mrow[8:13]

    p1 = np.polysub(np.polymul(b12, b23), np.polymul(b13, b22))
    p2 = np.polysub(np.polymul(b13, b21), np.polymul(b11, b23))
    p3 = np.polysub(np.polymul(b11, b22), np.polymul(b12, b21))
    n = np.polyadd(np.polyadd(np.polymul(p1, b31), np.polymul(p2, b32)),
                   np.polymul(p3, b33))

    scale = np.max(np.abs(n))
    if scale == 0.0:
        raise SolverFailureError("degenerate polynomial system in the 5-point solver")
    n = n / scale
    lead = np.flatnonzero(np.abs(n) > 1e-12)
    if len(lead) == 0:
        raise SolverFailureError("vanishing polynomial in the 5-point solver")
    n = n[lead[0]:]
    dn = np.polyder(n)

    out = []
    for root in np.roots(n):
        if abs(root.imag) > 1e-6 * max(1.0, abs(root.real)):
            continue
        z = root.real
        for _ in range(2):  # polish
            fz = np.polyval(n, z)
            dz = np.polyval(dn, z)
            if dz != 0.0:
                z -= fz / dz
        den = np.polyval(p3, z)
        if abs(den) > 1e-12:
            x = np.polyval(p1, z) / den
            y = np.polyval(p2, z) / den
        else:
            bm = np.array([[np.polyval(b11, z), np.polyval(b12, z), np.polyval(b13, z)],
                           [np.polyval(b21, z), np.polyval(b22, z), np.polyval(b23, z)],
                           [np.polyval(b31, z), np.polyval(b32, z), np.polyval(b33, z)]])
            _, _, vtb = np.linalg.svd(bm)
            v = vtb[-1]
            if abs(v[2]) < 1e-12:
                continue
            x, y = v[0] / v[2], v[1] / v[2]
        e = x * xm + y * ym + z * zm + wm
        e = e / np.linalg.norm(e)
        if essential_residual(e) < 1e-8:
            out.append(_fix_sign(e))
    return _dedupe_matrices(out)


def essential_residual(e: np.ndarray) -> float:
    """Deviation from the essential-matrix constraints (0 for a valid E)."""
    e = e / np.linalg.norm(e)
    c = 2.0 * e @ e.T @ e - np.trace(e @ e.T) * e
    return float(np.linalg.norm(c) + abs(np.linalg.det(e)))


def _dedupe_matrices(mats, tol=1e-9):
    out = []
    for m in mats:
        if not any(np.linalg.norm(m - o) < tol or np.linalg.norm(m + o) < tol
                   for o in out):
            out.append(m)
    return out


def _gauss_jordan(m):
    m = m.copy()
    rows, _ = m.shape
    for col in range(rows):
        pivot = col + np.argmax(np.abs(m[col:, col]))
        if abs(m[pivot, col]) < 1e-14:
            raise DegeneracyError("singular elimination in the 5-point solver")
        if pivot != col:
            m[[col, pivot]] = m[[pivot, col]]
        m[col] /= m[col, col]
        others = [r for r in range(rows) if r != col]
        m[others] -= np.outer(m[others, col], m[col])
    return m


# -- decomposition and triangulation ------------------------------------------


def decompose_essential(e: np.ndarray, x1, x2) -> SE3:
    """Relative pose (p2 = R p1 + t, |t| = 1) from E and >= 1 correspondence.

    Picks the one of four decompositions placing the most points in front
    of both cameras; an unresolved tie raises :class:`AmbiguityError`.
    """
    e = np.asarray(e, dtype=float)
    u, s, vt = np.linalg.svd(e)
    if s[2] > 0.1 * s[0] or s[1] < 0.5 * s[0]:
        raise SolverFailureError(
            "matrix does not satisfy the essential-matrix singular-value pattern")
    if np.linalg.det(u) < 0:
        u = -u
    if np.linalg.det(vt) < 0:
        vt = -vt
    w = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    r1 = u @ w @ vt
    r2 = u @ w.T @ vt
    t = u[:, 2]

    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    cam1 = SE3.identity()
    counts = []
    poses = []
    for r in (r1, r2):
        for tt in (t, -t):
            rel = SE3(SO3.from_matrix(r), tt)   # camera2 from camera1
            cam2 = rel.inverse()                # camera2 pose in world
            front = 0
            for a, b in zip(x1, x2):
                try:
                    p = triangulate(cam1, cam2,
                                    np.array([a[0], a[1], 1.0]),
                                    np.array([b[0], b[1], 1.0]))
                except DegeneracyError:
                    continue
                if p[2] > 0 and rel.act(p)[2] > 0:
                    front += 1
            counts.append(front)
            poses.append(rel)
    order = np.argsort(counts)[::-1]
    if counts[order[0]] == 0 or counts[order[0]] == counts[order[1]]:
        raise AmbiguityError("cheirality does not single out one decomposition")
    return poses[order[0]]


def triangulate(pose1: SE3, pose2: SE3, bearing1, bearing2) -> np.ndarray:
    """Midpoint of the common perpendicular of two viewing rays.

    Poses are camera-to-world; bearings are camera-frame directions.
    """
    o1, o2 = pose1.t, pose2.t
    d1 = pose1.r.act(np.asarray(bearing1, dtype=float))
    d2 = pose2.r.act(np.asarray(bearing2, dtype=float))
    d1 = d1 / np.linalg.norm(d1)
    d2 = d2 / np.linalg.norm(d2)
    if np.linalg.norm(np.cross(d1, d2)) <= 1e-6:
        raise DegeneracyError("viewing rays are parallel")
    if np.linalg.norm(o2 - o1) < 1e-12:
        raise DegeneracyError("zero baseline between views")
    b = o2 - o1
    d12 = float(d1 @ d2)
    m = np.array([[1.0, -d12], [d12, -1.0]])
    rhs = np.array([float(b @ d1), float(b @ d2)])
    s, u = np.linalg.solve(m, rhs)
    return 0.5 * (o1 + s * d1 + o2 + u * d2)
