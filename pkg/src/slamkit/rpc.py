"""JSON-lines scripting bridge.

One request object per input line: ``{"op": <name>, ...params}``.  Each
response line is ``{"ok": true, "result": ...}`` or ``{"ok": false,
"error": <message>, "kind": <exception class>}``.  Transforms travel as
flat arrays in text-serialization order (``[tx ty tz qx qy qz qw]`` and
``[s tx ty tz qx qy qz qw]``); numbers round-trip at full double
precision.  Malformed requests produce an error response, never a dead
process.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from . import evaluation as ev
from .dataset import Trajectory, load_trajectory
from .estimator import (
    decompose_essential,
    essential_5pt,
    fundamental_8pt,
    homography_4pt,
    homography_transfer_error,
    pnp_epnp,
    point_distance,
    ransac,
    reprojection_error,
    sampson_distance,
    sim3_horn,
)
from .transform import SE3, SIM3, SO3, batch
from .vocabulary import BowVector, Vocabulary, score as bow_score


def _vec(x, n, name):
    arr = np.asarray(x, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{name}: expected a flat array of {n} numbers, "
                         f"got shape {arr.shape}")
    return arr


def _mat(x, cols, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != cols:
        raise ValueError(f"{name}: expected an (N, {cols}) array, got shape {arr.shape}")
    return arr


def _se3(x, name="pose"):
    v = _vec(x, 7, name)
    return SE3(SO3(*v[3:7]), v[:3])


def _sim3(x, name="pose"):
    v = _vec(x, 8, name)
    return SIM3(SO3(*v[4:8]), v[1:4], v[0])


def _se3_out(g: SE3):
    return [*g.t.tolist(), g.r.x, g.r.y, g.r.z, g.r.w]


def _sim3_out(g: SIM3):
    return [g.s, *g.t.tolist(), g.r.x, g.r.y, g.r.z, g.r.w]


def _traj(params, key):
    path = params.get(f"{key}_path")
    if path:
        return load_trajectory(path)
    inline = params.get(key)
    if inline is None:
        raise ValueError(f"missing {key}_path or inline {key}")
    poses = [_se3(row, key) for row in _mat(inline["poses"], 7, key)]
    return Trajectory(inline["timestamps"], poses)


def _ransac_params(params):
    return dict(threshold=float(params.get("threshold", 1e-3)),
                confidence=float(params.get("confidence", 0.999)),
                max_iters=int(params.get("max_iters", 1000)),
                seed=int(params.get("seed", 0)))


def _ransac_out(result, model):
    return {"model": model, "inlier_mask": result.inlier_mask.astype(bool).tolist(),
            "iterations": result.iterations, "inlier_count": result.inlier_count}


class _Session:
    def __init__(self):
        self._vocabs = {}
        self._next = 1

    # -- transform ------------------------------------------------------

    def op_version(self, params):
        from . import __version__
        return {"version": __version__}

    def op_so3_exp(self, params):
        return {"q": SO3.exp(_vec(params["phi"], 3, "phi")).quaternion().tolist()}

    def op_so3_log(self, params):
        v = _vec(params["q"], 4, "q")
        return {"phi": SO3(*v).log().tolist()}

    def op_so3_mul(self, params):
        a = SO3(*_vec(params["a"], 4, "a"))
        b = SO3(*_vec(params["b"], 4, "b"))
        return {"q": (a * b).quaternion().tolist()}

    def op_so3_act(self, params):
        q = SO3(*_vec(params["q"], 4, "q"))
        return {"points": q.act(_mat(params["points"], 3, "points")).tolist()}

    def op_se3_exp(self, params):
        return {"g": _se3_out(SE3.exp(_vec(params["xi"], 6, "xi")))}

    def op_se3_log(self, params):
        return {"xi": _se3(params["g"]).log().tolist()}

    def op_se3_mul(self, params):
        return {"g": _se3_out(_se3(params["a"], "a") * _se3(params["b"], "b"))}

    def op_se3_inverse(self, params):
        return {"g": _se3_out(_se3(params["g"]).inverse())}

    def op_se3_act(self, params):
        g = _se3(params["g"])
        return {"points": g.act(_mat(params["points"], 3, "points")).tolist()}

    def op_sim3_exp(self, params):
        return {"g": _sim3_out(SIM3.exp(_vec(params["xi"], 7, "xi")))}

    def op_sim3_log(self, params):
        return {"xi": _sim3(params["g"]).log().tolist()}

    def op_sim3_mul(self, params):
        return {"g": _sim3_out(_sim3(params["a"], "a") * _sim3(params["b"], "b"))}

    def op_sim3_inverse(self, params):
        return {"g": _sim3_out(_sim3(params["g"]).inverse())}

    def op_sim3_act(self, params):
        g = _sim3(params["g"])
        return {"points": g.act(_mat(params["points"], 3, "points")).tolist()}

    # -- estimator --------------------------------------------------------

    def op_ransac_fundamental(self, params):
        x1 = _mat(params["x1"], 2, "x1")
        x2 = _mat(params["x2"], 2, "x2")
        result = ransac((x1, x2), 8, lambda d: fundamental_8pt(d[0], d[1]),
                        lambda m, d: sampson_distance(m, d[0], d[1]),
                        **_ransac_params(params))
        return _ransac_out(result, result.model.tolist())

    def op_ransac_essential(self, params):
        x1 = _mat(params["x1"], 2, "x1")
        x2 = _mat(params["x2"], 2, "x2")
        result = ransac((x1, x2), 5, lambda d: essential_5pt(d[0], d[1]),
                        lambda m, d: sampson_distance(m, d[0], d[1]),
                        **_ransac_params(params))
        out = _ransac_out(result, result.model.tolist())
        if params.get("decompose", False):
            inl = result.inlier_mask
            pose = decompose_essential(result.model, x1[inl], x2[inl])
            out["relative_pose"] = _se3_out(pose)
        return out

    def op_ransac_homography(self, params):
        x1 = _mat(params["x1"], 2, "x1")
        x2 = _mat(params["x2"], 2, "x2")
        result = ransac((x1, x2), 4, lambda d: homography_4pt(d[0], d[1]),
                        lambda m, d: homography_transfer_error(m, d[0], d[1]),
                        **_ransac_params(params))
        return _ransac_out(result, result.model.tolist())

    def op_ransac_pnp(self, params):
        world = _mat(params["world"], 3, "world")
        observed = _mat(params["observed"], 2, "observed")
        result = ransac((world, observed), 6, lambda d: pnp_epnp(d[0], d[1]),
                        lambda m, d: reprojection_error(m, d[0], d[1]),
                        **_ransac_params(params))
        return _ransac_out(result, _se3_out(result.model))

    def op_ransac_horn(self, params):
        src = _mat(params["src"], 3, "src")
        dst = _mat(params["dst"], 3, "dst")
        with_scale = bool(params.get("with_scale", True))
        result = ransac((src, dst), 3,
                        lambda d: sim3_horn(d[0], d[1], with_scale=with_scale),
                        lambda m, d: point_distance(m, d[0], d[1]),
                        **_ransac_params(params))
        return _ransac_out(result, _sim3_out(result.model))

    def op_horn(self, params):
        src = _mat(params["src"], 3, "src")
        dst = _mat(params["dst"], 3, "dst")
        g = sim3_horn(src, dst, with_scale=bool(params.get("with_scale", True)))
        return {"g": _sim3_out(g)}

    # -- vocabulary ---------------------------------------------------------

    def op_vocab_load(self, params):
        voc = Vocabulary.load(params["path"])
        handle = self._next
        self._next += 1
        self._vocabs[handle] = voc
        return {"handle": handle, "k": voc.k, "levels": voc.levels,
                "descriptor_type": voc.desc_type, "descriptor_length": voc.desc_len,
                "nodes": voc.num_nodes, "words": voc.num_words}

    def _vocab(self, params) -> Vocabulary:
        handle = params.get("handle")
        voc = self._vocabs.get(handle)
        if voc is None:
            raise ValueError(f"unknown vocabulary handle {handle!r}")
        return voc

    def op_vocab_transform(self, params):
        voc = self._vocab(params)
        dtype = np.uint8 if voc.desc_type == "binary" else np.float32
        desc = np.asarray(params["descriptors"], dtype=dtype)
        bow, fv = voc.transform(desc, int(params.get("feature_level", 2)))
        return {"bow": {str(w): v for w, v in bow.weights.items()},
                "feature_vector": {str(n): idx for n, idx in fv.groups.items()}}

    def op_vocab_score(self, params):
        a = BowVector({int(w): float(v) for w, v in params["a"].items()})
        b = BowVector({int(w): float(v) for w, v in params["b"].items()})
        return {"score": bow_score(a, b)}

    # -- evaluation -----------------------------------------------------------

    def op_trajectory_load(self, params):
        traj = load_trajectory(params["path"])
        return {"timestamps": traj.timestamps.tolist(),
                "poses": [_se3_out(p) for p in traj.poses]}

    def op_align(self, params):
        est = _traj(params, "est")
        gt = _traj(params, "gt")
        g = ev.align(est, gt, mode=params.get("mode", "se3"),
                     max_dt=float(params.get("max_dt", ev.DEFAULT_MAX_DT)))
        return {"g": _sim3_out(g)}

    def op_ape(self, params):
        result = ev.ape(_traj(params, "est"), _traj(params, "gt"),
                        mode=params.get("mode", "se3"),
                        align_first=bool(params.get("align_first", True)),
                        max_dt=float(params.get("max_dt", ev.DEFAULT_MAX_DT)))
        return {"translation": asdict(result.translation),
                "rotation": asdict(result.rotation),
                "alignment": _sim3_out(result.alignment)}

    def op_rpe(self, params):
        result = ev.rpe(_traj(params, "est"), _traj(params, "gt"),
                        delta=params.get("delta", 1),
                        delta_unit=params.get("delta_unit", "frames"),
                        max_dt=float(params.get("max_dt", ev.DEFAULT_MAX_DT)))
        return {"translation": asdict(result.translation),
                "rotation": asdict(result.rotation)}

    def handle(self, request: dict) -> dict:
        op = request.get("op")
        fn = getattr(self, f"op_{op}", None) if isinstance(op, str) else None
        if fn is None:
            return {"ok": False, "error": f"unknown op {op!r}", "kind": "UnknownOp"}
        try:
            params = {k: v for k, v in request.items() if k != "op"}
            return {"ok": True, "result": fn(params)}
        except Exception as e:  # errors cross the wire, the process survives
            return {"ok": False, "error": str(e), "kind": type(e).__name__}


def serve_lines(stdin, stdout):
    session = _Session()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as e:
            response = {"ok": False, "error": f"bad json: {e}", "kind": "BadRequest"}
        else:
            response = session.handle(request)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
