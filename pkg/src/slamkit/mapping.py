"""Unified map container: frames, landmarks, pose graph, observation graph.

Frames and points cross-reference each other through observations; every
mutator keeps the two sides consistent, and :meth:`Map.audit` verifies it.
Poses are stored as SIM3 with scale fixed to 1 in rigid mode, so one type
serves both metric and scale-drifting (monocular) maps.

The on-disk form is a directory of plain text tables (frames.txt,
points.txt, edges.txt, observations.txt, keypoints.txt); see
docs/formats.md for the field-by-field layout.  Pixel data, descriptors
and raw sensor records are not serialized.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import SlamkitError
from .transform import SIM3, SO3


class MapError(SlamkitError):
    pass


class DuplicateIdError(MapError):
    pass


class DanglingReferenceError(MapError):
    pass


class Image:
    """Shared-buffer image view; construction never copies pixel data."""

    _DTYPES = (np.uint8, np.float32)

    def __init__(self, data: np.ndarray):
        data = np.asarray(data)
        if data.dtype.type not in self._DTYPES:
            raise MapError(f"unsupported element type {data.dtype}; use u8 or f32")
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3, 4):
            raise MapError("image must be HxW or HxWxC with 1, 3 or 4 channels")
        self.data = data

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    @property
    def element_size(self):
        return self.data.dtype.itemsize

    @property
    def stride(self):
        return self.data.strides[0]


@dataclass
class Keypoint:
    uv: np.ndarray          # pixel position (2,)
    descriptor_index: int = -1

    def __post_init__(self):
        self.uv = np.asarray(self.uv, dtype=float).reshape(2)


@dataclass
class MapFrame:
    id: int
    timestamp: float
    pose: SIM3 = field(default_factory=SIM3.identity)
    camera: object | None = None
    image: Image | None = None
    imu: list | None = None
    gps: tuple | None = None
    keypoints: list[Keypoint] = field(default_factory=list)
    observations: dict[int, int] = field(default_factory=dict)  # point id -> keypoint index


@dataclass
class MapPoint:
    id: int
    position: np.ndarray
    descriptor: np.ndarray | None = None
    observations: dict[int, int] = field(default_factory=dict)  # frame id -> keypoint index

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)


@dataclass
class PoseEdge:
    i: int
    j: int
    relative: SIM3
    information: np.ndarray

    def __post_init__(self):
        self.information = np.asarray(self.information, dtype=float)
        if self.information.shape not in ((6, 6), (7, 7)):
            raise MapError("edge information must be 6x6 or 7x7")


class Map:
    """Pose graph plus observation graph shared by all consumers."""

    def __init__(self):
        self.frames: dict[int, MapFrame] = {}
        self.points: dict[int, MapPoint] = {}
        self.edges: list[PoseEdge] = []

    # -- mutation -------------------------------------------------------

    def insert_frame(self, frame: MapFrame) -> MapFrame:
        if frame.id in self.frames:
            raise DuplicateIdError(f"frame id {frame.id} already present")
        self.frames[frame.id] = frame
        return frame

    def insert_point(self, point: MapPoint) -> MapPoint:
        if point.id in self.points:
            raise DuplicateIdError(f"point id {point.id} already present")
        self.points[point.id] = point
        return point

    def add_observation(self, frame_id: int, point_id: int, keypoint_index: int):
        frame = self.frames.get(frame_id)
        if frame is None:
            raise DanglingReferenceError(f"frame {frame_id} does not exist")
        point = self.points.get(point_id)
        if point is None:
            raise DanglingReferenceError(f"point {point_id} does not exist")
        if frame.keypoints and not (0 <= keypoint_index < len(frame.keypoints)):
            raise DanglingReferenceError(
                f"keypoint index {keypoint_index} out of range for frame {frame_id}")
        frame.observations[point_id] = keypoint_index
        point.observations[frame_id] = keypoint_index

    def add_pose_edge(self, i: int, j: int, relative: SIM3,
                      information: np.ndarray | None = None) -> PoseEdge:
        for fid in (i, j):
            if fid not in self.frames:
                raise DanglingReferenceError(f"pose edge references missing frame {fid}")
        if information is None:
            information = np.eye(6)
        edge = PoseEdge(i, j, relative, information)
        self.edges.append(edge)
        return edge

    def remove_point(self, point_id: int):
        point = self.points.pop(point_id, None)
        if point is None:
            raise DanglingReferenceError(f"point {point_id} does not exist")
        for frame_id in point.observations:
            frame = self.frames.get(frame_id)
            if frame is not None:
                frame.observations.pop(point_id, None)

    # -- views ------------------------------------------------------------

    def snapshot(self) -> "Map":
        """Point-in-time copy; shares immutable pixel/descriptor payloads."""
        out = Map()
        for fid, f in self.frames.items():
            out.frames[fid] = MapFrame(
                id=f.id, timestamp=f.timestamp, pose=f.pose, camera=f.camera,
                image=f.image, imu=list(f.imu) if f.imu is not None else None,
                gps=f.gps, keypoints=list(f.keypoints),
                observations=dict(f.observations))
        for pid, p in self.points.items():
            out.points[pid] = MapPoint(id=p.id, position=p.position.copy(),
                                       descriptor=p.descriptor,
                                       observations=dict(p.observations))
        out.edges = [PoseEdge(e.i, e.j, e.relative, e.information.copy())
                     for e in self.edges]
        return out

    def audit(self) -> list[str]:
        """Return all consistency violations (empty list when healthy)."""
        problems = []
        for fid, f in self.frames.items():
            if f.id != fid:
                problems.append(f"frame table key {fid} != frame id {f.id}")
            for pid, k in f.observations.items():
                p = self.points.get(pid)
                if p is None:
                    problems.append(f"frame {fid} observes missing point {pid}")
                elif p.observations.get(fid) != k:
                    problems.append(f"observation {fid}<->{pid} not reciprocal")
        for pid, p in self.points.items():
            if p.id != pid:
                problems.append(f"point table key {pid} != point id {p.id}")
            for fid, k in p.observations.items():
                f = self.frames.get(fid)
                if f is None:
                    problems.append(f"point {pid} observed by missing frame {fid}")
                elif f.observations.get(pid) != k:
                    problems.append(f"observation {fid}<->{pid} not reciprocal")
                elif f.keypoints and not (0 <= k < len(f.keypoints)):
                    problems.append(f"observation {fid}<->{pid} keypoint {k} out of range")
        for e in self.edges:
            for fid in (e.i, e.j):
                if fid not in self.frames:
                    problems.append(f"pose edge ({e.i},{e.j}) references missing frame {fid}")
        return problems

    def structurally_equal(self, other: "Map") -> bool:
        if set(self.frames) != set(other.frames) or set(self.points) != set(other.points):
            return False
        for fid, f in self.frames.items():
            g = other.frames[fid]
            if (f.timestamp != g.timestamp or f.observations != g.observations
                    or not f.pose.approx_equal(g.pose, 1e-12)):
                return False
        for pid, p in self.points.items():
            q = other.points[pid]
            if p.observations != q.observations or not np.allclose(p.position, q.position):
                return False
        if len(self.edges) != len(other.edges):
            return False
        for e, d in zip(self.edges, other.edges):
            if (e.i, e.j) != (d.i, d.j) or not e.relative.approx_equal(d.relative, 1e-12):
                return False
            if not np.allclose(e.information, d.information):
                return False
        return True

    # -- serialization ----------------------------------------------------

    def save(self, dirpath: str):
        os.makedirs(dirpath, exist_ok=True)
        with open(os.path.join(dirpath, "frames.txt"), "w") as fh:
            fh.write("# id timestamp tx ty tz qx qy qz qw scale\n")
            for f in sorted(self.frames.values(), key=lambda f: f.id):
                q, t = f.pose.r, f.pose.t
                fh.write(f"{f.id} {f.timestamp:.17g} "
                         f"{t[0]:.17g} {t[1]:.17g} {t[2]:.17g} "
                         f"{q.x:.17g} {q.y:.17g} {q.z:.17g} {q.w:.17g} "
                         f"{f.pose.s:.17g}\n")
        with open(os.path.join(dirpath, "points.txt"), "w") as fh:
            fh.write("# id x y z\n")
            for p in sorted(self.points.values(), key=lambda p: p.id):
                fh.write(f"{p.id} {p.position[0]:.17g} {p.position[1]:.17g} "
                         f"{p.position[2]:.17g}\n")
        with open(os.path.join(dirpath, "edges.txt"), "w") as fh:
            fh.write("# i j tx ty tz qx qy qz qw scale info_row_major\n")
            for e in self.edges:
                q, t = e.relative.r, e.relative.t
                info = " ".join(f"{v:.17g}" for v in e.information.ravel())
                fh.write(f"{e.i} {e.j} {t[0]:.17g} {t[1]:.17g} {t[2]:.17g} "
                         f"{q.x:.17g} {q.y:.17g} {q.z:.17g} {q.w:.17g} "
                         f"{e.relative.s:.17g} {info}\n")
        with open(os.path.join(dirpath, "observations.txt"), "w") as fh:
            fh.write("# frame_id point_id keypoint_index\n")
            for f in sorted(self.frames.values(), key=lambda f: f.id):
                for pid, k in f.observations.items():
                    fh.write(f"{f.id} {pid} {k}\n")
        with open(os.path.join(dirpath, "keypoints.txt"), "w") as fh:
            fh.write("# frame_id index u v descriptor_index\n")
            for f in sorted(self.frames.values(), key=lambda f: f.id):
                for k, kp in enumerate(f.keypoints):
                    fh.write(f"{f.id} {k} {kp.uv[0]:.17g} {kp.uv[1]:.17g} "
                             f"{kp.descriptor_index}\n")

    @classmethod
    def load(cls, dirpath: str) -> "Map":
        m = cls()
        for fields in _rows(os.path.join(dirpath, "frames.txt"), 10):
            pose = SIM3(SO3(*map(float, fields[5:9])),
                        [float(v) for v in fields[2:5]], float(fields[9]))
            m.insert_frame(MapFrame(id=int(fields[0]), timestamp=float(fields[1]),
                                    pose=pose))
        for fields in _rows(os.path.join(dirpath, "points.txt"), 4):
            m.insert_point(MapPoint(id=int(fields[0]),
                                    position=[float(v) for v in fields[1:4]]))
        kp_path = os.path.join(dirpath, "keypoints.txt")
        if os.path.exists(kp_path):
            for fields in _rows(kp_path, 5):
                frame = m.frames[int(fields[0])]
                idx = int(fields[1])
                while len(frame.keypoints) <= idx:
                    frame.keypoints.append(Keypoint(np.zeros(2)))
                frame.keypoints[idx] = Keypoint([float(fields[2]), float(fields[3])],
                                                int(fields[4]))
        for fields in _rows(os.path.join(dirpath, "observations.txt"), 3):
            m.add_observation(int(fields[0]), int(fields[1]), int(fields[2]))
        for fields in _rows(os.path.join(dirpath, "edges.txt"), 10, exact=False):
            rel = SIM3(SO3(*map(float, fields[5:9])),
                       [float(v) for v in fields[2:5]], float(fields[9]))
            info = np.array([float(v) for v in fields[10:]])
            dim = int(round(len(info) ** 0.5))
            m.add_pose_edge(int(fields[0]), int(fields[1]), rel,
                            info.reshape(dim, dim) if len(info) else None)
        return m


def _rows(path: str, min_fields: int, exact: bool = True):
    if not os.path.exists(path):
        return
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if (exact and len(fields) != min_fields) or len(fields) < min_fields:
                raise MapError(f"{path}:{lineno}: expected {min_fields} fields, "
                               f"got {len(fields)}")
            yield fields
