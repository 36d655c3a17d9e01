"""Density-peak search along the frustum axis and RoI constraint.

A frustum's axis is cut into bins of ``bin_length`` meters. Each point adds
1 to its own bin and ``w`` to every bin within ``neighbor_bins`` on either
side. The heaviest bin's center ``c`` becomes the middle of a window of
length ``h``; only points inside that window are kept.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import EmptyFrustumError, InvalidCenterError, SmearTwiceError
from .frustum import (
    Frustum,
    FrustumSelection,
    axis_coordinate,
    build_frustum,
    select_frustum_points,
)
from .kitti_io import Box2D, CalibrationSet, GroundTruthObject, PointCloud

DEFAULT_BIN_LENGTH = 0.75
DEFAULT_NEIGHBOR_BINS = 7
DEFAULT_WEIGHT = 0.5
DEFAULT_ROI_LENGTH = 30.0
DEFAULT_FAR_PLANE = 70.0


@dataclass(frozen=True)
class HeuristicParams:
    bin_length: float = DEFAULT_BIN_LENGTH
    neighbor_bins: int = DEFAULT_NEIGHBOR_BINS
    w: float = DEFAULT_WEIGHT
    roi_length: float = DEFAULT_ROI_LENGTH
    far_plane: float = DEFAULT_FAR_PLANE
    dilation: float = 0.0

    def __post_init__(self):
        if not self.bin_length > 0:
            raise ValueError("bin_length must be > 0")
        if self.neighbor_bins < 0 or int(self.neighbor_bins) != self.neighbor_bins:
            raise ValueError("neighbor_bins must be a non-negative integer")
        if not self.w >= 0:
            raise ValueError("w must be >= 0")
        if not self.roi_length > 0:
            raise ValueError("roi_length must be > 0")
        if not self.far_plane > 0:
            raise ValueError("far_plane must be > 0")

    @property
    def h(self) -> float:
        return self.roi_length

    def with_(self, **kw) -> "HeuristicParams":
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class BinHistogram:
    near: float
    far: float
    bin_length: float
    counts: np.ndarray
    weights: np.ndarray
    smeared: bool = False

    @property
    def num_bins(self) -> int:
        return self.counts.shape[0]

    def bin_bounds(self, i: int):
        lo = self.near + i * self.bin_length
        return lo, min(self.far, lo + self.bin_length)


@dataclass(frozen=True)
class ConstrainedRoI:
    frustum: Frustum
    c: float
    near_c: float
    far_c: float
    params: Optional[HeuristicParams] = None
    fallback: bool = False

    @property
    def length(self) -> float:
        return self.far_c - self.near_c

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.near_c + self.far_c)


class PeakBin(NamedTuple):
    index: int
    c: float


def num_bins_for(near: float, far: float, bin_length: float) -> int:
    span = (far - near) / bin_length
    # 70 / 0.05 style ratios can land a hair above an integer
    n = math.ceil(span - 1e-9 * max(1.0, span))
    return max(n, 1)


def bin_indices(t: np.ndarray, near: float, bin_length: float, num_bins: int) -> np.ndarray:
    """floor((t - near) / bin_length), clamped to [0, num_bins - 1]."""
    # truncation equals floor for t >= near; anything below near clamps to 0 either way
    q = t / bin_length if near == 0 else (t - near) / bin_length
    idx = q.astype(np.int64)
    np.maximum(idx, 0, out=idx)
    np.minimum(idx, num_bins - 1, out=idx)
    return idx


def build_histogram(selection: FrustumSelection, frustum: Frustum,
                    params: HeuristicParams) -> BinHistogram:
    n = num_bins_for(frustum.near, frustum.far, params.bin_length)
    idx = bin_indices(selection.axis_coords, frustum.near, params.bin_length, n)
    counts = np.bincount(idx, minlength=n).astype(np.int64, copy=False)
    return BinHistogram(frustum.near, frustum.far, params.bin_length, counts,
                        counts.astype(np.float64), smeared=False)


def neighbor_totals(counts: np.ndarray, radius: int) -> np.ndarray:
    """Sum of counts[j] over 0 < |i - j| <= radius, truncated at the edges."""
    n = counts.shape[0]
    csum = np.concatenate([[0], np.cumsum(counts, dtype=np.int64)])
    i = np.arange(n)
    lo = np.maximum(i - radius, 0)
    hi = np.minimum(i + radius + 1, n)
    return csum[hi] - csum[lo] - counts


def smear_weights(hist: BinHistogram, params: HeuristicParams) -> BinHistogram:
    if hist.smeared:
        raise SmearTwiceError("histogram is already smeared")
    k = params.neighbor_bins
    if k == 0 or params.w == 0:
        weights = hist.counts.astype(np.float64)
    else:
        # integer tallies first, so the only rounding is one multiply-add per bin
        nbr = neighbor_totals(hist.counts, k).astype(np.float64)
        weights = hist.counts.astype(np.float64) + params.w * nbr
    return replace(hist, weights=weights, smeared=True)


def peak_bin(hist: BinHistogram) -> PeakBin:
    """Heaviest bin (lowest index on ties) and the axis distance of its center.

    The last bin is cut off at ``far`` when the frustum length is not a
    multiple of the bin length; its center is taken over the part that exists.
    """
    if hist.counts.sum() == 0:
        raise EmptyFrustumError("no points in frustum")
    i = int(np.argmax(hist.weights))
    lo, hi = hist.bin_bounds(i)
    return PeakBin(i, 0.5 * (lo + hi))


def constrain_roi(frustum: Frustum, c: float, h: float,
                  params: Optional[HeuristicParams] = None) -> ConstrainedRoI:
    if not h > 0:
        raise ValueError("h must be > 0")
    if not frustum.near <= c <= frustum.far:
        raise InvalidCenterError(f"c={c} outside [{frustum.near}, {frustum.far}]")
    near_c = max(frustum.near, c - h / 2.0)
    far_c = min(frustum.far, c + h / 2.0)
    return ConstrainedRoI(frustum, float(c), near_c, far_c, params)


def full_roi(frustum: Frustum, params: Optional[HeuristicParams] = None) -> ConstrainedRoI:
    """Unconstrained RoI used when the frustum is empty."""
    mid = 0.5 * (frustum.near + frustum.far)
    return ConstrainedRoI(frustum, mid, frustum.near, frustum.far, params, fallback=True)


def filter_points(roi: ConstrainedRoI, selection: FrustumSelection) -> FrustumSelection:
    t = selection.axis_coords
    keep = t >= roi.near_c
    keep &= t <= roi.far_c
    k = np.flatnonzero(keep)
    return FrustumSelection(selection.indices.take(k), t.take(k))


def constrain_selection(frustum: Frustum, selection: FrustumSelection,
                        params: HeuristicParams) -> ConstrainedRoI:
    """Histogram, smear, peak and window steps on an existing selection."""
    hist = smear_weights(build_histogram(selection, frustum, params), params)
    try:
        _, c = peak_bin(hist)
    except EmptyFrustumError:
        return full_roi(frustum, params)
    return constrain_roi(frustum, c, params.roi_length, params)


def run_ffs(cloud: PointCloud, box: Box2D, calib: CalibrationSet,
            params: HeuristicParams = HeuristicParams()):
    """Full pipeline for one 2D box.

    Returns ``(roi, kept)`` where ``kept`` are the cloud points inside the
    constrained RoI. An empty frustum yields the full-length RoI with
    ``roi.fallback`` set.
    """
    frustum = build_frustum(box, calib, params.far_plane, params.dilation)
    selection = select_frustum_points(frustum, cloud)
    roi = constrain_selection(frustum, selection, params)
    return roi, filter_points(roi, selection)


def ground_truth_constrain(gt: GroundTruthObject, frustum: Frustum, h: float,
                           params: Optional[HeuristicParams] = None) -> ConstrainedRoI:
    c = axis_coordinate(frustum, gt.center)
    return constrain_roi(frustum, c, h, params)

