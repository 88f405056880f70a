"""Generic RANSAC with adaptive iteration count and seeded reproducibility."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from ..errors import NoConsensusError, SlamkitError


@dataclass
class RansacResult:
    model: Any
    inlier_mask: np.ndarray
    iterations: int
    inlier_count: int


def _take(data, idx):
    if isinstance(data, (tuple, list)):
        return tuple(np.asarray(d)[idx] for d in data)
    return np.asarray(data)[idx]


def _data_len(data):
    if isinstance(data, (tuple, list)):
        n = {len(d) for d in data}
        if len(n) != 1:
            raise ValueError("parallel data arrays must have equal length")
        return n.pop()
    return len(data)


def _as_models(result):
    if result is None:
        return []
    if isinstance(result, (list, tuple)):
        return list(result)
    return [result]


def ransac(data, min_sample_size: int, solver: Callable, residual_fn: Callable,
           threshold: float, confidence: float = 0.999, max_iters: int = 1000,
           seed: int = 0, refit: Callable | None = None,
           min_inliers: int | None = None) -> RansacResult:
    """Robust model fit by repeated minimal-sample consensus.

    ``solver(sample_data)`` returns a model or a list of candidate models;
    ``residual_fn(model, data)`` returns per-datum residuals compared
    against ``threshold``.  The iteration budget shrinks adaptively as the
    observed inlier ratio improves:  N = log(1-confidence)/log(1-w^s).
    The best model is refit on its inliers when an overdetermined solve is
    available (``refit``, falling back to ``solver``).
    """
    n = _data_len(data)
    if n < min_sample_size:
        raise ValueError(f"need at least {min_sample_size} data items, got {n}")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    if min_inliers is None:
        min_inliers = min(n, min_sample_size + 1)

    rng = np.random.default_rng(seed)
    best_model = None
    best_mask = None
    best_count = 0
    needed = max_iters
    it = 0
    while it < min(needed, max_iters):
        it += 1
        idx = rng.choice(n, size=min_sample_size, replace=False)
        try:
            candidates = _as_models(solver(_take(data, idx)))
        except SlamkitError:
            continue
        for model in candidates:
            residuals = np.asarray(residual_fn(model, data))
            mask = residuals < threshold
            count = int(mask.sum())
            if count > best_count:
                best_model, best_mask, best_count = model, mask, count
                w = count / n
                if w >= 1.0:
                    needed = it
                else:
                    denom = math.log1p(-min(w ** min_sample_size, 1 - 1e-12))
                    needed = math.ceil(math.log1p(-confidence) / denom)

    if best_model is None or best_count < min_inliers:
        raise NoConsensusError(
            f"no model reached {min_inliers} inliers in {it} iterations")

    if best_count > min_sample_size:
        refitter = refit or solver
        try:
            refined = _as_models(refitter(_take(data, np.flatnonzero(best_mask))))
        except SlamkitError:
            refined = []
        for model in refined:
            residuals = np.asarray(residual_fn(model, data))
            mask = residuals < threshold
            count = int(mask.sum())
            if count >= best_count:
                best_model, best_mask, best_count = model, mask, count

    return RansacResult(model=best_model, inlier_mask=best_mask,
                        iterations=it, inlier_count=best_count)


# -- residual functions ------------------------------------------------------


def _hom(x):
    x = np.asarray(x, dtype=float)
    return np.hstack([x, np.ones((x.shape[0], 1))])


def sampson_distance(f: np.ndarray, x1, x2) -> np.ndarray:
    """First-order geometric distance to the epipolar constraint x2' F x1 = 0."""
    h1 = _hom(x1)
    h2 = _hom(x2)
    fx1 = h1 @ f.T      # rows: F x1
    ftx2 = h2 @ f       # rows: F' x2
    num = np.sum(h2 * fx1, axis=1)
    den = fx1[:, 0] ** 2 + fx1[:, 1] ** 2 + ftx2[:, 0] ** 2 + ftx2[:, 1] ** 2
    return np.abs(num) / np.sqrt(np.maximum(den, 1e-300))


def homography_transfer_error(h: np.ndarray, x1, x2) -> np.ndarray:
    """Forward transfer distance |x2 - H x1| on the normalized plane."""
    mapped = _hom(x1) @ h.T
    with np.errstate(invalid="ignore", divide="ignore"):
        mapped = mapped[:, :2] / mapped[:, 2:3]
    d = np.linalg.norm(np.asarray(x2, dtype=float) - mapped, axis=1)
    return np.where(np.isfinite(d), d, np.inf)


def reprojection_error(pose, points3d, points2d) -> np.ndarray:
    """Normalized-plane distance of ``pose``-transformed world points."""
    p_c = pose.act(np.asarray(points3d, dtype=float))
    with np.errstate(invalid="ignore", divide="ignore"):
        proj = p_c[:, :2] / p_c[:, 2:3]
    d = np.linalg.norm(proj - np.asarray(points2d, dtype=float), axis=1)
    return np.where(p_c[:, 2] > 0, d, np.inf)


def point_distance(g, src, dst) -> np.ndarray:
    """Euclidean distance after applying a 3D transform to ``src``."""
    return np.linalg.norm(g.act(np.asarray(src, dtype=float))
                          - np.asarray(dst, dtype=float), axis=1)
