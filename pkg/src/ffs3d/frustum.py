"""Lifting 2D image boxes to 3D frustums in the rectified camera frame."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBoxError, FrameError
from .kitti_io import Box2D, CalibrationSet, Frame, PointCloud


@dataclass(frozen=True, eq=False)
class Frustum:
    """A pyramid with apex ``origin`` bounded by four planes through the apex.

    ``normals`` is (4, 3): inward unit normals of the left, top, right and
    bottom planes. ``near``/``far`` bound the axis coordinate.
    """

    origin: np.ndarray
    axis: np.ndarray
    normals: np.ndarray
    near: float
    far: float

    def __post_init__(self):
        for name in ("origin", "axis", "normals"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not 0.0 <= self.near < self.far:
            raise ValueError(f"need 0 <= near < far, got near={self.near}, far={self.far}")

    @property
    def length(self) -> float:
        return self.far - self.near


@dataclass(frozen=True, eq=False)
class FrustumSelection:
    indices: np.ndarray
    axis_coords: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        t = np.asarray(self.axis_coords, dtype=np.float64).reshape(-1)
        if idx.shape != t.shape:
            raise ValueError("indices and axis_coords differ in length")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "axis_coords", t)

    def __len__(self) -> int:
        return self.indices.shape[0]


def camera_center(P: np.ndarray) -> np.ndarray:
    """Optical center C of a 3x4 projection matrix (P @ [C; 1] = 0)."""
    return -np.linalg.solve(P[:, :3], P[:, 3])


def pixel_rays(P: np.ndarray, pixels) -> np.ndarray:
    """Back-project (u, v) pixels to (unnormalized) ray directions."""
    uv1 = np.column_stack([np.asarray(pixels, dtype=np.float64), np.ones(len(pixels))])
    return np.linalg.solve(P[:, :3], uv1.T).T


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def dilate_box(box: Box2D, pixels: float) -> Box2D:
    if pixels == 0:
        return box
    return Box2D(box.x_min - pixels, box.y_min - pixels, box.x_max + pixels,
                 box.y_max + pixels, box.class_label, box.score)


def build_frustum(box: Box2D, calib: CalibrationSet, far_plane: float = 70.0,
                  dilation: float = 0.0) -> Frustum:
    """Frustum spanned by ``box`` as seen through the left color camera (P2).

    The apex is the optical center of P2 in the rectified frame, so the
    stereo-baseline term in P2's last column shifts the origin rather than
    biasing the rays. ``dilation`` grows the box by that many pixels per side.
    """
    if far_plane <= 0:
        raise ValueError("far_plane must be positive")
    box = dilate_box(box, dilation)
    if not (box.x_min < box.x_max and box.y_min < box.y_max):
        raise DegenerateBoxError("box has no area")
    (a, b, c, p0), (d, e, f, p1), (g, h, i, p2) = calib.P2.tolist()
    # inverse of the left 3x3 block by cofactors; plain floats beat numpy at this size
    co = (e * i - f * h, c * h - b * i, b * f - c * e,
          f * g - d * i, a * i - c * g, c * d - a * f,
          d * h - e * g, b * g - a * h, a * e - b * d)
    det = a * co[0] + b * co[3] + c * co[6]
    if det == 0:
        raise DegenerateBoxError("P2 has a singular left 3x3 block")
    inv = [v / det for v in co]

    def back(u, v, w=1.0):
        return (inv[0] * u + inv[1] * v + inv[2] * w,
                inv[3] * u + inv[4] * v + inv[5] * w,
                inv[6] * u + inv[7] * v + inv[8] * w)

    origin = [-x for x in back(p0, p1, p2)]
    cu, cv = box.center
    r = back(cu, cv)
    rn = math.sqrt(r[0] ** 2 + r[1] ** 2 + r[2] ** 2)
    axis = (r[0] / rn, r[1] / rn, r[2] / rn)
    if axis[2] <= 0:
        raise DegenerateBoxError("box center does not back-project in front of the camera")
    corners = [back(box.x_min, box.y_min), back(box.x_max, box.y_min),
               back(box.x_max, box.y_max), back(box.x_min, box.y_max)]  # tl, tr, br, bl
    # planes: left (tl, bl), top (tl, tr), right (tr, br), bottom (br, bl)
    normals = []
    for j, k in ((0, 3), (0, 1), (1, 2), (2, 3)):
        n = _cross(corners[j], corners[k])
        norm = math.sqrt(n[0] ** 2 + n[1] ** 2 + n[2] ** 2)
        if norm == 0:
            raise DegenerateBoxError("corner rays are parallel")
        if n[0] * axis[0] + n[1] * axis[1] + n[2] * axis[2] < 0:
            norm = -norm
        normals.append((n[0] / norm, n[1] / norm, n[2] / norm))
    return Frustum(origin, axis, normals, 0.0, float(far_plane))


def _dot3(d, v):
    # explicit sum order keeps the scalar and vectorized paths bit-identical
    return d[0] * v[0] + d[1] * v[1] + d[2] * v[2]


def axis_coordinate(frustum: Frustum, p) -> float:
    d = np.asarray(p, dtype=np.float64).reshape(3) - frustum.origin
    return float(_dot3(d, frustum.axis))


def point_in_frustum(frustum: Frustum, p) -> bool:
    d = np.asarray(p, dtype=np.float64).reshape(3) - frustum.origin
    for n in frustum.normals:
        if _dot3(d, n) < 0:
            return False
    t = _dot3(d, frustum.axis)
    return bool(frustum.near <= t <= frustum.far)


def _dot3_into(d, v, out, tmp):
    # same (d0*v0 + d1*v1) + d2*v2 order as _dot3, without temporaries
    np.multiply(d[0], v[0], out=out)
    np.multiply(d[1], v[1], out=tmp)
    out += tmp
    np.multiply(d[2], v[2], out=tmp)
    out += tmp
    return out


def select_frustum_points(frustum: Frustum, cloud: PointCloud) -> FrustumSelection:
    if cloud.frame is not Frame.RECT_CAM:
        raise FrameError("select_frustum_points expects a RECT_CAM cloud")
    xyz = cloud.xyz
    o = frustum.origin.tolist()
    axis = frustum.axis.tolist()
    normals = frustum.normals.tolist()
    n = xyz.shape[0]
    # contiguous per-axis offsets from the apex
    d = np.empty((3, n))
    for k in range(3):
        np.subtract(xyz[:, k], o[k], out=d[k])
    tmp = np.empty(n)
    t = _dot3_into(d, axis, np.empty(n), tmp)
    # a point is inside when its smallest plane distance is non-negative
    lo = _dot3_into(d, normals[0], np.empty(n), tmp)
    s = np.empty(n)
    for normal in normals[1:]:
        np.minimum(lo, _dot3_into(d, normal, s, tmp), out=lo)
    mask = lo >= 0.0
    mask &= t >= frustum.near
    mask &= t <= frustum.far
    idx = np.flatnonzero(mask)
    return FrustumSelection(idx, t.take(idx))


def point_on_axis(frustum: Frustum, t: float) -> np.ndarray:
    return frustum.origin + t * frustum.axis

