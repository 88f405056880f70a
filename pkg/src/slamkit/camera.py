"""Camera projection models: ideal pinhole, radial-tangential, ATAN/FOV.

All models project camera-frame points through the normalized image plane
(``x/z``, ``y/z``) and an intrinsic matrix.  Points at or behind the camera
plane produce NaN pixels (the invalid-projection marker, see
:func:`is_valid`).  ``unproject`` returns unit bearing vectors.

The ATAN model's ``w`` parameter follows the normalized-plane convention:
the distortion factor is computed on normalized-plane radii, not pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SlamkitError

MODEL_IDEAL = "ideal"
MODEL_PINHOLE_DISTORT = "pinhole_distort"
MODEL_ATAN = "atan"

_MODELS = (MODEL_IDEAL, MODEL_PINHOLE_DISTORT, MODEL_ATAN)

# pixel tolerance used when inverting the radial-tangential distortion
_UNDISTORT_TOL_PX = 0.01
_UNDISTORT_MAX_ITERS = 20


class CameraError(SlamkitError):
    pass


class ConvergenceError(CameraError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def is_valid(px: np.ndarray) -> np.ndarray:
    """Mask of pixels that carry a valid projection."""
    return ~np.any(np.isnan(np.asarray(px)), axis=-1)


@dataclass(frozen=True)
class Camera:
    model: str
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    k3: float = 0.0
    w: float = 0.0

    def __post_init__(self):
        if self.model not in _MODELS:
            raise CameraError(f"unknown camera model {self.model!r} (known: {_MODELS})")
        if not (self.fx > 0 and self.fy > 0):
            raise CameraError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise CameraError("principal point must lie inside the image")

    # -- projection ----------------------------------------------------

    def project(self, p_c) -> np.ndarray:
        """Camera-frame point(s) to pixel(s); NaN where z <= 0."""
        p = np.asarray(p_c, dtype=float)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        z = p[:, 2]
        with np.errstate(invalid="ignore", divide="ignore"):
            xn = p[:, 0] / z
            yn = p[:, 1] / z
            xd, yd = self._distort(xn, yn)
            u = self.fx * xd + self.cx
            v = self.fy * yd + self.cy
        out = np.stack([u, v], axis=-1)
        out[z <= 0] = np.nan
        return out[0] if single else out

    def _distort(self, xn, yn):
        if self.model == MODEL_IDEAL:
            return xn, yn
        if self.model == MODEL_PINHOLE_DISTORT:
            r2 = xn * xn + yn * yn
            radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3))
            xd = xn * radial + 2.0 * self.p1 * xn * yn + self.p2 * (r2 + 2.0 * xn * xn)
            yd = yn * radial + self.p1 * (r2 + 2.0 * yn * yn) + 2.0 * self.p2 * xn * yn
            return xd, yd
        # ATAN / FOV
        if self.w == 0.0:
            return xn, yn
        r = np.sqrt(xn * xn + yn * yn)
        two_tan = 2.0 * np.tan(0.5 * self.w)
        with np.errstate(invalid="ignore", divide="ignore"):
            factor = np.where(r < 1e-12, two_tan / self.w,
                              np.arctan(r * two_tan) / (self.w * r))
        return xn * factor, yn * factor

    def contains(self, px) -> np.ndarray:
        """Mask of pixels inside the image bounds (unproject allows both)."""
        q = np.atleast_2d(np.asarray(px, dtype=float))
        inside = ((q[:, 0] >= 0) & (q[:, 0] < self.width)
                  & (q[:, 1] >= 0) & (q[:, 1] < self.height))
        return inside[0] if np.asarray(px).ndim == 1 else inside

    # -- unprojection --------------------------------------------------

    def unproject(self, px) -> np.ndarray:
        """Pixel(s) to unit bearing vector(s)."""
        q = np.asarray(px, dtype=float)
        single = q.ndim == 1
        q = np.atleast_2d(q)
        xd = (q[:, 0] - self.cx) / self.fx
        yd = (q[:, 1] - self.cy) / self.fy
        xn, yn = self._undistort(xd, yd)
        b = np.stack([xn, yn, np.ones_like(xn)], axis=-1)
        b /= np.linalg.norm(b, axis=-1, keepdims=True)
        return b[0] if single else b

    def _undistort(self, xd, yd):
        if self.model == MODEL_IDEAL:
            return xd, yd
        if self.model == MODEL_ATAN:
            if self.w == 0.0:
                return xd, yd
            rd = np.sqrt(xd * xd + yd * yd)
            two_tan = 2.0 * np.tan(0.5 * self.w)
            with np.errstate(invalid="ignore", divide="ignore"):
                factor = np.where(rd < 1e-12, self.w / two_tan,
                                  np.tan(rd * self.w) / (two_tan * rd))
            factor = np.where(rd * self.w >= 0.5 * np.pi, np.nan, factor)
            return xd * factor, yd * factor
        # radial-tangential: invert by fixed-point iteration; iterate to
        # numerical stall, accept anything under the 0.01 px contract
        xn, yn = xd.copy(), yd.copy()
        fscale = max(self.fx, self.fy)
        residual = np.inf
        for _ in range(_UNDISTORT_MAX_ITERS):
            xc, yc = self._distort(xn, yn)
            ex, ey = xc - xd, yc - yd
            residual = float(np.max(np.hypot(ex, ey)) * fscale)
            if residual < 1e-8:
                return xn, yn
            xn = xn - ex
            yn = yn - ey
        if residual < _UNDISTORT_TOL_PX:
            return xn, yn
        raise ConvergenceError(
            f"distortion inversion did not reach {_UNDISTORT_TOL_PX} px "
            f"after {_UNDISTORT_MAX_ITERS} iterations (residual {residual:.3g} px)",
            residual)

    # -- config --------------------------------------------------------

    def with_model(self, model: str, **kwargs) -> "Camera":
        return replace(self, model=model, **kwargs)

    @classmethod
    def from_config(cls, tree, prefix: str = "camera") -> "Camera":
        g = lambda key, default=None: tree.get(f"{prefix}.{key}", default)
        required = {k: g(k) for k in ("model", "width", "height", "fx", "fy", "cx", "cy")}
        missing = [k for k, v in required.items() if v is None]
        if missing:
            raise CameraError(f"config is missing camera keys: {missing}")
        extras = {k: float(g(k, 0.0)) for k in ("k1", "k2", "p1", "p2", "k3", "w")}
        return cls(model=str(required["model"]),
                   width=int(required["width"]), height=int(required["height"]),
                   fx=float(required["fx"]), fy=float(required["fy"]),
                   cx=float(required["cx"]), cy=float(required["cy"]), **extras)

    def to_config(self, tree, prefix: str = "camera"):
        tree.set(f"{prefix}.model", self.model)
        tree.set(f"{prefix}.width", self.width)
        tree.set(f"{prefix}.height", self.height)
        for k in ("fx", "fy", "cx", "cy", "k1", "k2", "p1", "p2", "k3", "w"):
            tree.set(f"{prefix}.{k}", float(getattr(self, k)))
