"""Pose-graph text format subset: VERTEX_SE3:QUAT and EDGE_SE3:QUAT lines."""

from __future__ import annotations

import numpy as np

from ..mapping import Map, MapFrame
from ..transform import SIM3, SO3
from .problem import OptimizerError

_UPPER = [(i, j) for i in range(6) for j in range(i, 6)]


def load_pose_graph(path: str) -> Map:
    """Read VERTEX_SE3:QUAT / EDGE_SE3:QUAT lines into a map."""
    m = Map()
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.split()
            if not fields or fields[0].startswith("#"):
                continue
            tag = fields[0]
            if tag == "VERTEX_SE3:QUAT":
                if len(fields) != 9:
                    raise OptimizerError(f"{path}:{lineno}: vertex needs 9 fields")
                fid = int(fields[1])
                t = [float(v) for v in fields[2:5]]
                q = [float(v) for v in fields[5:9]]
                m.insert_frame(MapFrame(id=fid, timestamp=float(fid),
                                        pose=SIM3(SO3(*q), t, 1.0)))
            elif tag == "EDGE_SE3:QUAT":
                if len(fields) != 31:
                    raise OptimizerError(
                        f"{path}:{lineno}: edge needs 31 fields, got {len(fields)}")
                edges.append((lineno, fields))
            else:
                continue  # unsupported records are skipped
    for lineno, fields in edges:
        i, j = int(fields[1]), int(fields[2])
        t = [float(v) for v in fields[3:6]]
        q = [float(v) for v in fields[6:10]]
        vals = [float(v) for v in fields[10:31]]
        info = np.zeros((6, 6))
        for (r, c), v in zip(_UPPER, vals):
            info[r, c] = v
            info[c, r] = v
        m.add_pose_edge(i, j, SIM3(SO3(*q), t, 1.0), info)
    return m


def save_pose_graph(map_: Map, path: str):
    with open(path, "w") as fh:
        for fid in sorted(map_.frames):
            p = map_.frames[fid].pose
            q = p.r
            fh.write(f"VERTEX_SE3:QUAT {fid} "
                     f"{p.t[0]:.12g} {p.t[1]:.12g} {p.t[2]:.12g} "
                     f"{q.x:.12g} {q.y:.12g} {q.z:.12g} {q.w:.12g}\n")
        for e in map_.edges:
            q = e.relative.r
            info = e.relative
            vals = []
            m = np.asarray(e.information, dtype=float)
            if m.shape[0] != 6:
                full = np.eye(6)
                k = min(6, m.shape[0])
                full[:k, :k] = m[:k, :k]
                m = full
            for r, c in _UPPER:
                vals.append(f"{m[r, c]:.12g}")
            fh.write(f"EDGE_SE3:QUAT {e.i} {e.j} "
                     f"{e.relative.t[0]:.12g} {e.relative.t[1]:.12g} {e.relative.t[2]:.12g} "
                     f"{q.x:.12g} {q.y:.12g} {q.z:.12g} {q.w:.12g} "
                     + " ".join(vals) + "\n")
