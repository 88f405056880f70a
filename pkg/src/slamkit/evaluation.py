"""Trajectory accuracy benchmark: association, alignment, APE/RPE, reports.

The absolute pose error compares per-pose translations (and rotation
angles) after an optional closed-form alignment of the estimate onto the
ground truth; the relative pose error compares windowed relative motions
and is invariant to any global transform of either trajectory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .dataset import Trajectory
from .errors import SlamkitError
from .estimator import sim3_horn
from .transform import SIM3

DEFAULT_MAX_DT = 0.02


class EvaluationError(SlamkitError):
    pass


class AssociationError(EvaluationError):
    pass


@dataclass
class ErrorStats:
    rmse: float
    mean: float
    median: float
    std: float
    min: float
    max: float
    count: int

    FIELDS = ("rmse", "mean", "median", "std", "min", "max")

    @classmethod
    def from_samples(cls, values) -> "ErrorStats":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            raise EvaluationError("no samples to summarize")
        stats = cls(rmse=float(np.sqrt(np.mean(v * v))), mean=float(np.mean(v)),
                    median=float(np.median(v)), std=float(np.std(v)),
                    min=float(np.min(v)), max=float(np.max(v)), count=int(v.size))
        # internal identity: rmse^2 = mean^2 + population variance
        lhs = stats.rmse ** 2
        rhs = stats.mean ** 2 + stats.std ** 2
        if abs(lhs - rhs) > 1e-9 * max(lhs, 1e-12):
            raise EvaluationError("inconsistent statistics")
        return stats


def associate(est: Trajectory, gt: Trajectory,
              max_dt: float = DEFAULT_MAX_DT) -> list[tuple[int, int]]:
    """Greedy nearest-timestamp matching; each pose used at most once.

    Returns (est index, gt index) pairs sorted by est timestamp.
    """
    if len(est) == 0 or len(gt) == 0:
        raise AssociationError("empty trajectory")
    candidates = []
    gts = gt.timestamps
    for i, t in enumerate(est.timestamps):
        lo = int(np.searchsorted(gts, t - max_dt, side="left"))
        hi = int(np.searchsorted(gts, t + max_dt, side="right"))
        for jj in range(lo, hi):
            dt = abs(float(gts[jj] - t))
            if dt <= max_dt:
                candidates.append((dt, i, jj))
    candidates.sort()
    used_i = set()
    used_j = set()
    pairs = []
    for dt, i, j in candidates:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        pairs.append((i, j))
    if not pairs:
        raise AssociationError(f"no pose pairs within max_dt={max_dt}")
    pairs.sort()
    return pairs


def align(est: Trajectory, gt: Trajectory, mode: str = "se3",
          pairs=None, max_dt: float = DEFAULT_MAX_DT) -> SIM3:
    """Closed-form alignment transform mapping est positions onto gt."""
    if mode not in ("se3", "sim3"):
        raise EvaluationError(f"unknown alignment mode {mode!r}")
    if pairs is None:
        pairs = associate(est, gt, max_dt)
    if len(pairs) < 3:
        raise EvaluationError("need at least 3 matched poses to align")
    src = est.positions()[[i for i, _ in pairs]]
    dst = gt.positions()[[j for _, j in pairs]]
    return sim3_horn(src, dst, with_scale=mode == "sim3")


@dataclass
class ApeResult:
    translation: ErrorStats
    rotation: ErrorStats
    alignment: SIM3
    timestamps: np.ndarray
    translation_errors: np.ndarray
    rotation_errors: np.ndarray
    aligned_positions: np.ndarray
    kind: str = "ape"


def ape(est: Trajectory, gt: Trajectory, mode: str = "se3",
        align_first: bool = True, max_dt: float = DEFAULT_MAX_DT) -> ApeResult:
    """Absolute pose error of est against gt after optional alignment."""
    pairs = associate(est, gt, max_dt)
    g = align(est, gt, mode, pairs) if align_first else SIM3.identity()
    t_err = []
    r_err = []
    aligned = []
    for i, j in pairs:
        mapped = g * SIM3.from_se3(est.poses[i])
        t_err.append(float(np.linalg.norm(gt.poses[j].t - mapped.t)))
        r_err.append(float(np.linalg.norm((gt.poses[j].r * mapped.r.inverse()).log())))
        aligned.append(mapped.t)
    return ApeResult(translation=ErrorStats.from_samples(t_err),
                     rotation=ErrorStats.from_samples(r_err),
                     alignment=g,
                     timestamps=est.timestamps[[i for i, _ in pairs]],
                     translation_errors=np.asarray(t_err),
                     rotation_errors=np.asarray(r_err),
                     aligned_positions=np.asarray(aligned))


@dataclass
class RpeResult:
    translation: ErrorStats
    rotation: ErrorStats
    delta: float
    delta_unit: str
    timestamps: np.ndarray
    translation_errors: np.ndarray
    rotation_errors: np.ndarray
    kind: str = "rpe"


def rpe(est: Trajectory, gt: Trajectory, delta=1, delta_unit: str = "frames",
        max_dt: float = DEFAULT_MAX_DT) -> RpeResult:
    """Relative pose error over windows of ``delta`` frames or seconds."""
    if delta_unit not in ("frames", "seconds"):
        raise EvaluationError(f"unknown delta unit {delta_unit!r}")
    pairs = associate(est, gt, max_dt)
    e_poses = [est.poses[i] for i, _ in pairs]
    g_poses = [gt.poses[j] for _, j in pairs]
    stamps = est.timestamps[[i for i, _ in pairs]]

    windows = []
    if delta_unit == "frames":
        delta = int(delta)
        if delta < 1:
            raise EvaluationError("delta must be >= 1 frame")
        if delta >= len(pairs):
            raise EvaluationError(
                f"trajectory has {len(pairs)} matched poses, delta={delta} too large")
        windows = [(k, k + delta) for k in range(len(pairs) - delta)]
    else:
        for k in range(len(pairs)):
            m = int(np.searchsorted(stamps, stamps[k] + float(delta)))
            if m < len(pairs):
                windows.append((k, m))
        if not windows:
            raise EvaluationError(f"no window spans delta={delta}s")

    t_err = []
    r_err = []
    for k, m in windows:
        rel_e = e_poses[k].inverse() * e_poses[m]
        rel_g = g_poses[k].inverse() * g_poses[m]
        err = rel_g.inverse() * rel_e
        t_err.append(float(np.linalg.norm(err.t)))
        r_err.append(float(np.linalg.norm(err.r.log())))
    return RpeResult(translation=ErrorStats.from_samples(t_err),
                     rotation=ErrorStats.from_samples(r_err),
                     delta=float(delta), delta_unit=delta_unit,
                     timestamps=stamps[[k for k, _ in windows]],
                     translation_errors=np.asarray(t_err),
                     rotation_errors=np.asarray(r_err))


def report(results: dict, outdir: str) -> dict:
    """Write a comparative stats table plus per-run plot data files.

    ``results`` maps run names to Ape/Rpe results.  Emits ``stats.tsv``
    (sorted by translation rmse), ``<name>_errors.tsv`` per run, and
    ``<name>_aligned.tsv`` for APE runs.  Returns the written paths.
    """
    if not results:
        raise EvaluationError("no evaluation results to report")
    os.makedirs(outdir, exist_ok=True)
    paths = {"stats": os.path.join(outdir, "stats.tsv")}
    order = sorted(results, key=lambda n: results[n].translation.rmse)
    with open(paths["stats"], "w") as fh:
        fh.write("# name\tkind\tmetric\trmse\tmean\tmedian\tstd\tmin\tmax\tcount\n")
        for name in order:
            res = results[name]
            for metric, stats in (("translation", res.translation),
                                  ("rotation", res.rotation)):
                row = [name, res.kind, metric] + \
                    [f"{getattr(stats, f):.12g}" for f in ErrorStats.FIELDS] + \
                    [str(stats.count)]
                fh.write("\t".join(row) + "\n")
    for name, res in results.items():
        epath = os.path.join(outdir, f"{name}_errors.tsv")
        paths[f"{name}_errors"] = epath
        with open(epath, "w") as fh:
            fh.write("# timestamp\ttranslation_error\trotation_error\n")
            for t, te, re_ in zip(res.timestamps, res.translation_errors,
                                  res.rotation_errors):
                fh.write(f"{t:.9g}\t{te:.12g}\t{re_:.12g}\n")
        if res.kind == "ape":
            apath = os.path.join(outdir, f"{name}_aligned.tsv")
            paths[f"{name}_aligned"] = apath
            with open(apath, "w") as fh:
                fh.write("# timestamp\tx\ty\tz\n")
                for t, p in zip(res.timestamps, res.aligned_positions):
                    fh.write(f"{t:.9g}\t{p[0]:.12g}\t{p[1]:.12g}\t{p[2]:.12g}\n")
    return paths
