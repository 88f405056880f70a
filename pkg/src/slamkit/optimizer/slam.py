"""Map-level entry points: pose-graph optimization and bundle adjustment."""

from __future__ import annotations

import numpy as np

from ..mapping import Map
from ..transform import SE3, SIM3
from .factors import RelativePoseResidual, ReprojectionResidual
from .lm import SolveOptions, SolveReport, optimize
from .problem import GaugeError, GraphProblem, Huber, OptimizerError


def _edge_components(map_: Map):
    """Connected components over frames touched by pose edges."""
    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in map_.edges:
        for fid in (e.i, e.j):
            parent.setdefault(fid, fid)
        ra, rb = find(e.i), find(e.j)
        if ra != rb:
            parent[ra] = rb
    groups = {}
    for fid in parent:
        groups.setdefault(find(fid), set()).add(fid)
    return list(groups.values())


def _sqrt_information(info: np.ndarray, dim: int) -> np.ndarray:
    """Upper Cholesky factor, adapted to the requested residual dimension."""
    info = np.asarray(info, dtype=float)
    if info.shape[0] < dim:
        padded = np.eye(dim)
        padded[:info.shape[0], :info.shape[1]] = info
        info = padded
    elif info.shape[0] > dim:
        info = info[:dim, :dim]
    return np.linalg.cholesky(info).T


def pose_graph_optimize(map_: Map, mode: str = "se3",
                        opts: SolveOptions | None = None,
                        fixed_frames=None) -> SolveReport:
    """Optimize frame poses against the map's relative-pose edges.

    ``mode`` selects the rigid (6-dof) or similarity (7-dof, scale-drift
    correcting) residual.  The lowest-id frame of each use is fixed unless
    ``fixed_frames`` overrides; every edge-connected component must contain
    a fixed frame.
    """
    if mode not in ("se3", "sim3"):
        raise OptimizerError(f"unknown mode {mode!r}")
    if not map_.edges:
        raise OptimizerError("map has no pose edges")
    used = sorted({fid for e in map_.edges for fid in (e.i, e.j)})
    if fixed_frames is None:
        fixed_frames = {used[0]}
    else:
        fixed_frames = set(fixed_frames)
    for comp in _edge_components(map_):
        if not comp & fixed_frames:
            raise GaugeError(f"component {sorted(comp)} contains no fixed frame")

    problem = GraphProblem()
    for fid in used:
        pose = map_.frames[fid].pose
        if mode == "se3":
            if abs(pose.s - 1.0) > 1e-9:
                raise OptimizerError(
                    f"frame {fid} carries scale {pose.s}; use sim3 mode")
            problem.add_se3(fid, pose.se3(), fixed=fid in fixed_frames)
        else:
            problem.add_sim3(fid, pose, fixed=fid in fixed_frames)
    for e in map_.edges:
        dim = 6 if mode == "se3" else 7
        measured = e.relative.se3() if mode == "se3" else e.relative
        problem.add_residual(RelativePoseResidual(
            e.i, e.j, measured, _sqrt_information(e.information, dim)))

    report = optimize(problem, opts)
    for fid in used:
        v = problem.value(fid)
        map_.frames[fid].pose = SIM3.from_se3(v) if mode == "se3" else v
    return report


def bundle_adjust(map_: Map, opts: SolveOptions | None = None,
                  fixed_frames=None, fixed_points=(),
                  huber_delta: float | None = None) -> SolveReport:
    """Minimize reprojection error over frame poses and point positions.

    Observations are taken from the observation graph; keypoints are
    unprojected through each frame's camera (frames without a camera are
    assumed to store normalized-plane keypoints).  At least one frame must
    stay fixed; monocular problems need a second fixed frame (or fixed
    points) to pin scale.
    """
    frames = [f for f in map_.frames.values() if f.observations]
    if not frames:
        raise OptimizerError("map has no observations")
    frame_ids = sorted(f.id for f in frames)
    if fixed_frames is None:
        fixed_frames = {frame_ids[0]}
    else:
        fixed_frames = set(fixed_frames)
    if not set(frame_ids) & fixed_frames:
        raise GaugeError("no observing frame is fixed")
    fixed_points = set(fixed_points)

    problem = GraphProblem()
    for fid in frame_ids:
        pose = map_.frames[fid].pose
        if abs(pose.s - 1.0) > 1e-9:
            raise OptimizerError(f"frame {fid} carries scale; bundle adjustment is rigid")
        problem.add_se3(fid, pose.se3().inverse(), fixed=fid in fixed_frames)

    seen_points = sorted({pid for f in frames for pid in f.observations})
    for pid in seen_points:
        problem.add_point(("pt", pid), map_.points[pid].position,
                          fixed=pid in fixed_points)

    for f in frames:
        cam = f.camera
        delta = huber_delta
        if delta is None:
            delta = 1.0 / cam.fx if cam is not None else 2e-3
        loss = Huber(delta)
        for pid, k in f.observations.items():
            uv = f.keypoints[k].uv
            if cam is not None:
                b = cam.unproject(uv)
                obs = b[:2] / b[2]
            else:
                obs = uv
            problem.add_residual(ReprojectionResidual(f.id, ("pt", pid), obs,
                                                      loss=loss))

    report = optimize(problem, opts)
    for fid in frame_ids:
        map_.frames[fid].pose = SIM3.from_se3(problem.value(fid).inverse())
    for pid in seen_points:
        map_.points[pid].position = np.asarray(problem.value(("pt", pid)))
    return report
