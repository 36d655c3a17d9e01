"""KITTI object-detection file readers and the LiDAR -> rectified camera transform.

All arrays are converted to float64 on load; the on-disk velodyne format is
float32 so converting back is lossless.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import DegenerateBoxError, FormatError, FrameError, KittiIOError, ValidationError

PathLike = Union[str, os.PathLike]

CLASSES = ("Car", "Pedestrian", "Cyclist")

_VELO_DTYPE = np.dtype("<f4")
_RECORD_BYTES = 16


class Frame(enum.Enum):
    LIDAR = "lidar"
    RECT_CAM = "rect_cam"


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points in one coordinate frame.

    ``xyz`` is an (N, 3) float64 array, ``reflectance`` an (N,) array or None.
    Both are made read-only on construction. ``xyz`` is stored column-major
    so per-axis slices are contiguous.
    """

    xyz: np.ndarray
    frame: Frame
    reflectance: Optional[np.ndarray] = None

    def __post_init__(self):
        xyz = np.asfortranarray(np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3))
        if np.may_share_memory(xyz, self.xyz):
            xyz = xyz.copy(order="F")
        object.__setattr__(self, "xyz", _readonly(xyz))
        if self.reflectance is not None:
            refl = np.array(self.reflectance, dtype=np.float64).reshape(-1)
            if refl.shape[0] != xyz.shape[0]:
                raise ValidationError("reflectance length does not match point count")
            object.__setattr__(self, "reflectance", _readonly(refl))

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @classmethod
    def empty(cls, frame: Frame = Frame.LIDAR) -> "PointCloud":
        return cls(np.zeros((0, 3)), frame, np.zeros(0))


@dataclass(frozen=True, eq=False)
class CalibrationSet:
    P2: np.ndarray
    R0_rect: np.ndarray
    Tr_velo_to_cam: np.ndarray

    def __post_init__(self):
        for name, shape in (("P2", (3, 4)), ("R0_rect", (3, 3)), ("Tr_velo_to_cam", (3, 4))):
            m = np.array(getattr(self, name), dtype=np.float64)
            if m.shape != shape:
                raise ValidationError(f"{name} must have shape {shape}, got {m.shape}")
            object.__setattr__(self, name, _readonly(m))
        check_rotation(self.R0_rect)
        if not (self.P2[0, 0] > 0 and self.P2[1, 1] > 0):
            raise ValidationError("P2 focal lengths must be positive")

    @classmethod
    def identity(cls) -> "CalibrationSet":
        return cls(np.eye(3, 4), np.eye(3), np.eye(3, 4))


def check_rotation(R: np.ndarray, tol: float = 1e-3) -> None:
    """Raise ValidationError unless rows of ``R`` are orthonormal within ``tol``."""
    gram = R @ R.T
    if not np.all(np.isfinite(gram)) or np.max(np.abs(gram - np.eye(3))) > tol:
        raise ValidationError("R0_rect is not orthonormal")


@dataclass(frozen=True)
class Box2D:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    class_label: str = "Car"
    score: Optional[float] = None

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DegenerateBoxError(
                f"degenerate box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self):
        return 0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max)


@dataclass(frozen=True)
class GroundTruthObject:
    """A labelled object. ``center`` is the volumetric center in RECT_CAM."""

    class_label: str
    center: tuple
    h: float
    w: float
    l: float
    yaw: float
    box2d: Box2D
    truncation: float = 0.0
    occlusion: int = 0

    def __post_init__(self):
        if not (self.h > 0 and self.w > 0 and self.l > 0):
            raise ValidationError("object dimensions must be positive")
        if not -math.pi <= self.yaw <= math.pi:
            raise ValidationError(f"yaw {self.yaw} outside [-pi, pi]")


@dataclass
class FrameData:
    """Everything needed to evaluate one KITTI frame."""

    frame_id: str
    cloud: PointCloud
    calib: CalibrationSet
    objects: List[GroundTruthObject] = field(default_factory=list)


def _read_bytes(path: PathLike) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as exc:
        raise KittiIOError(f"cannot read {os.fspath(path)}: {exc.strerror or exc}") from exc


def _read_text(path: PathLike) -> str:
    try:
        with open(path, "r") as f:
            return f.read()
    except OSError as exc:
        raise KittiIOError(f"cannot read {os.fspath(path)}: {exc.strerror or exc}") from exc


def load_point_cloud(path: PathLike) -> PointCloud:
    """Read a velodyne ``.bin`` file of little-endian float32 (x, y, z, r) records."""
    raw = _read_bytes(path)
    if len(raw) % _RECORD_BYTES:
        raise FormatError(f"{os.fspath(path)}: length {len(raw)} is not a multiple of 16")
    data = np.frombuffer(raw, dtype=_VELO_DTYPE).reshape(-1, 4).astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{os.fspath(path)}: non-finite value in point data")
    return PointCloud(data[:, :3], Frame.LIDAR, data[:, 3])


def point_cloud_to_bytes(cloud: PointCloud) -> bytes:
    n = len(cloud)
    out = np.empty((n, 4), dtype=_VELO_DTYPE)
    out[:, :3] = cloud.xyz
    out[:, 3] = cloud.reflectance if cloud.reflectance is not None else 0.0
    return out.tobytes()


def save_point_cloud(cloud: PointCloud, path: PathLike) -> None:
    Path(path).write_bytes(point_cloud_to_bytes(cloud))


_CALIB_SIZES = {"P2": (3, 4), "R0_rect": (3, 3), "Tr_velo_to_cam": (3, 4)}


def load_calibration(path: PathLike) -> CalibrationSet:
    values = {}
    for lineno, line in enumerate(_read_text(path).splitlines(), 1):
        if not line.strip():
            continue
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep or key not in _CALIB_SIZES:
            continue
        shape = _CALIB_SIZES[key]
        try:
            nums = [float(v) for v in rest.split()]
        except ValueError as exc:
            raise FormatError(f"{os.fspath(path)}:{lineno}: {exc}") from exc
        if len(nums) != shape[0] * shape[1]:
            raise FormatError(
                f"{os.fspath(path)}:{lineno}: {key} needs {shape[0] * shape[1]} values, got {len(nums)}"
            )
        values[key] = np.array(nums).reshape(shape)
    missing = [k for k in _CALIB_SIZES if k not in values]
    if missing:
        raise FormatError(f"{os.fspath(path)}: missing keys {', '.join(missing)}")
    return CalibrationSet(values["P2"], values["R0_rect"], values["Tr_velo_to_cam"])


def _parse_label_lines(path: PathLike, allow_score: bool):
    text = _read_text(path)
    for lineno, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 15 and not (allow_score and len(fields) == 16):
            raise FormatError(f"{os.fspath(path)}:{lineno}: expected 15 fields, got {len(fields)}")
        try:
            nums = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise FormatError(f"{os.fspath(path)}:{lineno}: {exc}") from exc
        yield lineno, fields[0], nums


def _label_object(path, lineno, label, nums) -> GroundTruthObject:
    trunc, occ, _alpha, x1, y1, x2, y2, h, w, l, x, y, z, ry = nums[:14]
    if not all(math.isfinite(v) for v in nums):
        raise FormatError(f"{os.fspath(path)}:{lineno}: non-finite value")
    box = Box2D(x1, y1, x2, y2, label, nums[14] if len(nums) > 14 else None)
    return GroundTruthObject(
        class_label=label,
        center=(x, y - h / 2.0, z),
        h=h,
        w=w,
        l=l,
        yaw=ry,
        box2d=box,
        truncation=trunc,
        occlusion=int(occ),
    )


def load_labels(path: PathLike) -> List[GroundTruthObject]:
    """Parse a ``label_2`` file, keeping only Car, Pedestrian and Cyclist rows.

    KITTI stores the bottom-center of each box; the returned centers are
    lifted by h/2 (camera y points down) to the volumetric center.
    """
    return [
        _label_object(path, lineno, label, nums)
        for lineno, label, nums in _parse_label_lines(path, allow_score=False)
        if label in CLASSES
    ]


def load_detections(path: PathLike) -> List[Box2D]:
    """Parse a detection file (label layout plus optional 16th score column)."""
    boxes = []
    for lineno, label, nums in _parse_label_lines(path, allow_score=True):
        if label not in CLASSES:
            continue
        score = nums[14] if len(nums) > 14 else None
        boxes.append(Box2D(nums[3], nums[4], nums[5], nums[6], label, score))
    return boxes


def velo_to_rect(cloud: PointCloud, calib: CalibrationSet) -> PointCloud:
    if cloud.frame is not Frame.LIDAR:
        raise FrameError("velo_to_rect expects a LIDAR-frame cloud")
    Tr = calib.Tr_velo_to_cam
    cam = cloud.xyz @ Tr[:, :3].T + Tr[:, 3]
    rect = cam @ calib.R0_rect.T
    return PointCloud(rect, Frame.RECT_CAM, cloud.reflectance)


def read_split(path: PathLike) -> List[str]:
    return [line.strip() for line in _read_text(path).splitlines() if line.strip()]


def frame_paths(data_root: PathLike, frame_id: str):
    root = Path(data_root)
    return (
        root / "velodyne" / f"{frame_id}.bin",
        root / "calib" / f"{frame_id}.txt",
        root / "label_2" / f"{frame_id}.txt",
    )


def load_frame(data_root: PathLike, frame_id: str, classes: Sequence[str] = CLASSES) -> FrameData:
    """Load one frame and return its cloud already in the RECT_CAM frame.

    The label file is not read when ``classes`` is empty.
    """
    velo, calib_path, label_path = frame_paths(data_root, frame_id)
    calib = load_calibration(calib_path)
    cloud = velo_to_rect(load_point_cloud(velo), calib)
    objects = []
    if classes:
        objects = [o for o in load_labels(label_path) if o.class_label in classes]
    return FrameData(frame_id, cloud, calib, objects)
