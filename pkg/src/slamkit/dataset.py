"""Dataset ingestion: suffix-dispatched readers and a synthetic generator.

A dataset path is handled by the plugin registered for its suffix:
``seq.tumrgbd`` directories hold frame-list text files, ``orbit.synthetic``
files hold a generator configuration.  Streams publish their events on the
standard bus topics (``dataset/image``, ``dataset/imu``, ``dataset/gps``,
``dataset/ground_truth``).

Trajectory files follow the usual one-pose-per-line text layout
``timestamp tx ty tz qx qy qz qw`` with ``#`` comments.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .camera import MODEL_IDEAL, Camera
from .config import ConfigTree, load_tree
from .errors import SlamkitError
from .messenger import (
    TOPIC_GPS,
    TOPIC_GROUND_TRUTH,
    TOPIC_IMAGE,
    TOPIC_IMU,
    Messenger,
)
from .transform import SE3, SO3


class DatasetError(SlamkitError):
    pass


# -- trajectories --------------------------------------------------------


class Trajectory:
    """Timestamped pose sequence (camera-to-world), strictly increasing."""

    def __init__(self, timestamps, poses):
        self.timestamps = np.asarray(timestamps, dtype=float)
        self.poses = list(poses)
        if len(self.timestamps) != len(self.poses):
            raise DatasetError("timestamp/pose count mismatch")
        if np.any(np.diff(self.timestamps) <= 0):
            bad = int(np.flatnonzero(np.diff(self.timestamps) <= 0)[0]) + 1
            raise DatasetError(f"timestamps not strictly increasing at index {bad}")

    def __len__(self):
        return len(self.poses)

    def positions(self) -> np.ndarray:
        return np.array([p.t for p in self.poses]).reshape(-1, 3)

    def transformed(self, g) -> "Trajectory":
        """Trajectory with every pose left-multiplied by ``g``."""
        return Trajectory(self.timestamps.copy(), [g * p for p in self.poses])


def load_trajectory(path: str) -> Trajectory:
    if not os.path.exists(path):
        raise DatasetError(f"trajectory file does not exist: {path}")
    timestamps = []
    poses = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 8:
                raise DatasetError(f"{path}:{lineno}: expected 8 fields "
                                   f"'timestamp tx ty tz qx qy qz qw', got {len(fields)}")
            try:
                vals = [float(v) for v in fields]
            except ValueError as e:
                raise DatasetError(f"{path}:{lineno}: {e}") from e
            if timestamps and vals[0] <= timestamps[-1]:
                raise DatasetError(f"{path}:{lineno}: non-monotonic timestamp {vals[0]}")
            timestamps.append(vals[0])
            poses.append(SE3(SO3(*vals[4:8]), vals[1:4]))
    return Trajectory(timestamps, poses)


def save_trajectory(traj: Trajectory, path: str):
    with open(path, "w") as fh:
        fh.write("# timestamp tx ty tz qx qy qz qw\n")
        for t, pose in zip(traj.timestamps, traj.poses):
            q = pose.r
            vals = (t, *pose.t, q.x, q.y, q.z, q.w)
            fh.write(" ".join(f"{v:.9g}" for v in vals) + "\n")


# -- streams --------------------------------------------------------------


@dataclass
class StreamEvent:
    timestamp: float
    kind: str  # image | imu | gps | ground_truth
    payload: object


_TOPIC_BY_KIND = {
    "image": TOPIC_IMAGE,
    "imu": TOPIC_IMU,
    "gps": TOPIC_GPS,
    "ground_truth": TOPIC_GROUND_TRUTH,
}


class DatasetStream:
    """Time-ordered event sequence with optional live playback."""

    def __init__(self, events, camera: Camera | None = None,
                 ground_truth: Trajectory | None = None):
        self.events = sorted(events, key=lambda e: e.timestamp)
        self.camera = camera
        self.ground_truth = ground_truth

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def play(self, bus: Messenger, rate: float = 0.0) -> int:
        """Publish every event on its standard topic; returns event count.

        ``rate`` 0 plays as fast as possible; otherwise wall-clock pacing
        at that speed multiple.
        """
        pubs = {}
        for ev in self.events:
            key = (ev.kind, type(ev.payload))
            if key not in pubs:
                pubs[key] = bus.advertise(_TOPIC_BY_KIND[ev.kind], type(ev.payload))
        start_wall = time.monotonic()
        start_ts = self.events[0].timestamp if self.events else 0.0
        for ev in self.events:
            if rate > 0:
                due = start_wall + (ev.timestamp - start_ts) / rate
                delay = due - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            pubs[(ev.kind, type(ev.payload))].publish(ev.payload)
        return len(self.events)


@dataclass
class ImageRecord:
    """Frame reference; pixel data may be absent for pose-only runs."""

    timestamp: float
    path: str


@dataclass
class ImuSample:
    timestamp: float
    angular_velocity: tuple
    acceleration: tuple


@dataclass
class GroundTruthPose:
    timestamp: float
    pose: SE3


# -- suffix dispatch -------------------------------------------------------


def open_dataset(path: str) -> DatasetStream:
    """Open a dataset, choosing the reader by path suffix."""
    suffix = os.path.splitext(path)[1].lstrip(".").lower()
    reader = _READERS.get(suffix)
    if reader is None:
        raise DatasetError(f"no dataset plugin for suffix {suffix!r} "
                           f"(known: {sorted(_READERS)})")
    if not os.path.exists(path):
        raise DatasetError(f"dataset path does not exist: {path}")
    return reader(path)


def _read_tum_rgbd(path: str) -> DatasetStream:
    events = []
    rgb = os.path.join(path, "rgb.txt")
    if os.path.exists(rgb):
        with open(rgb) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                fields = line.split()
                if len(fields) != 2:
                    raise DatasetError(f"{rgb}:{lineno}: expected 'timestamp filename'")
                events.append(StreamEvent(float(fields[0]), "image",
                                          ImageRecord(float(fields[0]),
                                                      os.path.join(path, fields[1]))))
    gt = None
    gt_path = os.path.join(path, "groundtruth.txt")
    if os.path.exists(gt_path):
        gt = load_trajectory(gt_path)
        for t, pose in zip(gt.timestamps, gt.poses):
            events.append(StreamEvent(float(t), "ground_truth",
                                      GroundTruthPose(float(t), pose)))
    imu_path = os.path.join(path, "accelerometer.txt")
    if os.path.exists(imu_path):
        with open(imu_path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                v = [float(x) for x in line.split()]
                events.append(StreamEvent(v[0], "imu",
                                          ImuSample(v[0], (0.0, 0.0, 0.0),
                                                    tuple(v[1:4]))))
    camera = None
    cam_path = os.path.join(path, "camera.yaml")
    if os.path.exists(cam_path):
        camera = Camera.from_config(load_tree(cam_path))
    return DatasetStream(events, camera=camera, ground_truth=gt)


# -- synthetic generator -----------------------------------------------------


def _default_camera() -> Camera:
    return Camera(MODEL_IDEAL, 640, 480, 500.0, 500.0, 320.0, 240.0)


@dataclass
class SyntheticSpec:
    """Orbit of a camera around a landmark cloud with labeled tracks."""

    radius: float = 5.0
    angular_rate: float = math.pi / 10
    duration: float = 20.0
    frame_rate: float = 10.0
    landmark_count: int = 200
    pixel_noise: float = 0.0
    outlier_ratio: float = 0.0
    seed: int = 0
    camera: Camera = field(default_factory=_default_camera)

    def validate(self):
        if self.radius <= 0 or self.duration <= 0 or self.frame_rate <= 0:
            raise DatasetError("radius, duration and frame_rate must be positive")
        if self.landmark_count < 1:
            raise DatasetError("landmark_count must be >= 1")
        if not 0.0 <= self.outlier_ratio < 1.0:
            raise DatasetError("outlier_ratio must be in [0, 1)")
        if self.pixel_noise < 0:
            raise DatasetError("pixel_noise must be >= 0")


@dataclass
class SyntheticFrame:
    """Labeled feature tracks of one synthetic frame."""

    timestamp: float
    pose: SE3                 # ground-truth camera-to-world
    landmark_ids: np.ndarray  # (M,)
    pixels: np.ndarray        # (M, 2)
    is_outlier: np.ndarray    # (M,) bool


@dataclass
class SyntheticSequence:
    spec: SyntheticSpec
    camera: Camera
    trajectory: Trajectory
    landmarks: np.ndarray
    frames: list

    def stream(self) -> DatasetStream:
        events = [StreamEvent(f.timestamp, "image", f) for f in self.frames]
        events += [StreamEvent(float(t), "ground_truth", GroundTruthPose(float(t), p))
                   for t, p in zip(self.trajectory.timestamps, self.trajectory.poses)]
        return DatasetStream(events, camera=self.camera,
                             ground_truth=self.trajectory)


def _look_at(position, target, up=(0.0, 0.0, 1.0)):
    z = np.asarray(target, dtype=float) - position
    z = z / np.linalg.norm(z)
    x = np.cross(up, z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return SE3(SO3.from_matrix(np.column_stack([x, y, z])), position)


def generate_synthetic(spec: SyntheticSpec) -> SyntheticSequence:
    """Camera orbiting a landmark cloud; exact ground truth retained."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    cam = spec.camera

    # landmark ball well inside the orbit
    r = spec.radius * 0.55 * np.cbrt(rng.uniform(0.05, 1.0, size=spec.landmark_count))
    direction = rng.normal(size=(spec.landmark_count, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    landmarks = r[:, None] * direction

    n_frames = int(round(spec.duration * spec.frame_rate))
    timestamps = np.arange(n_frames) / spec.frame_rate
    poses = []
    frames = []
    for k, t in enumerate(timestamps):
        theta = spec.angular_rate * t
        position = spec.radius * np.array([math.cos(theta), math.sin(theta), 0.0])
        pose = _look_at(position, (0.0, 0.0, 0.0))
        poses.append(pose)

        p_c = pose.inverse().act(landmarks)
        pix = cam.project(p_c)
        visible = (~np.isnan(pix[:, 0]) & (pix[:, 0] >= 0) & (pix[:, 0] < cam.width)
                   & (pix[:, 1] >= 0) & (pix[:, 1] < cam.height))
        ids = np.flatnonzero(visible)
        pix = pix[ids]
        if spec.pixel_noise > 0:
            pix = pix + rng.normal(scale=spec.pixel_noise, size=pix.shape)
        outlier = rng.random(len(ids)) < spec.outlier_ratio
        if np.any(outlier):
            pix[outlier] = rng.uniform([0, 0], [cam.width, cam.height],
                                       size=(int(outlier.sum()), 2))
        frames.append(SyntheticFrame(float(t), pose, ids, pix, outlier))
    return SyntheticSequence(spec=spec, camera=cam,
                             trajectory=Trajectory(timestamps, poses),
                             landmarks=landmarks, frames=frames)


def _spec_from_config(tree: ConfigTree) -> SyntheticSpec:
    kwargs = {}
    for name in ("radius", "angular_rate", "duration", "frame_rate",
                 "landmark_count", "pixel_noise", "outlier_ratio", "seed"):
        if tree.has(name):
            value = tree.get(name)
            kwargs[name] = int(value) if name in ("landmark_count", "seed") \
                else float(value)
    if tree.has("camera.model"):
        kwargs["camera"] = Camera.from_config(tree)
    return SyntheticSpec(**kwargs)


def _read_synthetic(path: str) -> DatasetStream:
    import yaml
    with open(path) as fh:
        data = yaml.safe_load(fh.read()) or {}
    if not isinstance(data, dict):
        raise DatasetError(f"{path}: synthetic spec must be a map")
    spec = _spec_from_config(ConfigTree(data))
    return generate_synthetic(spec).stream()


_READERS = {
    "tumrgbd": _read_tum_rgbd,
    "synthetic": _read_synthetic,
}
