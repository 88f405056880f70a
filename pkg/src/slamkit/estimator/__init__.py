"""Closed-form multi-view geometry solvers with a generic RANSAC wrapper.

All 2D inputs are normalized-plane coordinates; undo the camera intrinsics
with :meth:`slamkit.camera.Camera.unproject` first.
"""

from .alignment import affine3d_4pt, plane_fit, rigid_align, sim3_horn
from .epipolar import (
    decompose_essential,
    essential_5pt,
    essential_residual,
    fundamental_7pt,
    fundamental_8pt,
    triangulate,
)
from .homography import affine2d_3pt, apply_homography, homography_4pt
from .pnp import p3p, pnp_epnp
from .ransac import (
    RansacResult,
    homography_transfer_error,
    point_distance,
    ransac,
    reprojection_error,
    sampson_distance,
)

__all__ = [
    "RansacResult",
    "affine2d_3pt",
    "affine3d_4pt",
    "apply_homography",
    "decompose_essential",
    "essential_5pt",
    "essential_residual",
    "fundamental_7pt",
    "fundamental_8pt",
    "homography_4pt",
    "homography_transfer_error",
    "p3p",
    "plane_fit",
    "pnp_epnp",
    "point_distance",
    "ransac",
    "reprojection_error",
    "rigid_align",
    "sampson_distance",
    "sim3_horn",
    "triangulate",
]
