"""Accuracy, containment, reduction and timing measurements for the heuristic."""
from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .core import (
    ConstrainedRoI,
    HeuristicParams,
    constrain_selection,
    filter_points,
    full_roi,
    ground_truth_constrain,
    run_ffs,
)
from .errors import InvalidCenterError
from .frustum import (
    axis_coordinate,
    build_frustum,
    point_on_axis,
    select_frustum_points,
)
from .kitti_io import CLASSES, CalibrationSet, Frame, FrameData, GroundTruthObject, PointCloud, velo_to_rect

logger = logging.getLogger(__name__)

BASELINES = ("ffs", "gt-center")
POOLED_PED_CYC = "Pedestrian+Cyclist"

# standard KITTI difficulty levels: (min box height px, max occlusion, max truncation)
_DIFFICULTY = (("Easy", 40.0, 0, 0.15), ("Moderate", 25.0, 1, 0.30), ("Hard", 25.0, 2, 0.50))


def difficulty(gt: GroundTruthObject) -> str:
    for name, min_h, max_occ, max_trunc in _DIFFICULTY:
        if gt.box2d.height >= min_h and gt.occlusion <= max_occ and gt.truncation <= max_trunc:
            return name
    return "Ignored"


@dataclass
class EvalRecord:
    frame_id: str
    object_id: int
    class_label: str
    c_pred: float
    c_gt: float
    axial_error: float
    center_error_3d: float
    contained: bool
    points_before: int
    points_after: int
    fallback: bool
    near_c: float
    far_c: float
    difficulty: str = "Ignored"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TimingSummary:
    mean_us: Optional[float]
    median_us: Optional[float]
    p95_us: Optional[float]
    points_per_second: float
    num_frustums: int
    repetitions: int
    num_measurements: int
    samples_us: List[float] = field(default_factory=list, repr=False)

    def to_dict(self, with_samples: bool = False) -> dict:
        d = asdict(self)
        if not with_samples:
            d.pop("samples_us")
        return d


@dataclass
class EvalReport:
    """Aggregated metrics. Undefined values (nothing to average) are None."""

    rmse: Dict[str, Optional[float]]
    rmse_3d: Dict[str, Optional[float]]
    rmse_by_difficulty: Dict[str, Dict[str, Optional[float]]]
    overall_rmse: Optional[float]
    containment_rate: Optional[float]
    mean_reduction_ratio: Optional[float]
    counts: Dict[str, int]
    fallback_counts: Dict[str, int]
    num_records: int
    timing: Optional[TimingSummary] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["timing"] = self.timing.to_dict() if self.timing else None
        return d


def _rmse(errors: Sequence[float]) -> Optional[float]:
    if not errors:
        return None
    return math.sqrt(math.fsum(e * e for e in errors) / len(errors))


def _as_rect(cloud: PointCloud, calib: CalibrationSet) -> PointCloud:
    return velo_to_rect(cloud, calib) if cloud.frame is Frame.LIDAR else cloud


def evaluate_frame(cloud: PointCloud, calib: CalibrationSet, gts: Sequence[GroundTruthObject],
                   params: HeuristicParams = HeuristicParams(), frame_id: str = "",
                   baseline: str = "ffs") -> List[EvalRecord]:
    """One record per ground-truth object, using its 2D box as the detection.

    ``baseline="gt-center"`` centers the window on the projected ground-truth
    center instead of the density peak. Objects whose center falls outside
    the frustum's range then get the full RoI and are flagged as fallback.
    """
    if baseline not in BASELINES:
        raise ValueError(f"unknown baseline {baseline!r}")
    cloud = _as_rect(cloud, calib)
    records = []
    for k, gt in enumerate(gts):
        frustum = build_frustum(gt.box2d, calib, params.far_plane, params.dilation)
        selection = select_frustum_points(frustum, cloud)
        if baseline == "ffs":
            roi = constrain_selection(frustum, selection, params)
        else:
            try:
                roi = ground_truth_constrain(gt, frustum, params.roi_length, params)
            except InvalidCenterError:
                roi = full_roi(frustum, params)
        records.append(_record(frame_id, k, gt, roi, selection, filter_points(roi, selection)))
    return records


def _record(frame_id, k, gt, roi: ConstrainedRoI, selection, kept) -> EvalRecord:
    c_gt = axis_coordinate(roi.frustum, gt.center)
    mid = point_on_axis(roi.frustum, roi.midpoint)
    return EvalRecord(
        frame_id=frame_id,
        object_id=k,
        class_label=gt.class_label,
        c_pred=roi.c,
        c_gt=c_gt,
        axial_error=abs(roi.c - c_gt),
        center_error_3d=float(np.linalg.norm(mid - np.asarray(gt.center, dtype=np.float64))),
        contained=bool(roi.near_c <= c_gt <= roi.far_c),
        points_before=len(selection),
        points_after=len(kept),
        fallback=roi.fallback,
        near_c=roi.near_c,
        far_c=roi.far_c,
        difficulty=difficulty(gt),
    )


def aggregate(records: Sequence[EvalRecord]) -> EvalReport:
    """Fold records into a report.

    RMSE uses only non-fallback records; containment counts every record.
    The pooled ``Pedestrian+Cyclist`` entry mirrors how the two small classes
    are often quoted together.
    """
    valid = [r for r in records if not r.fallback]
    labels = sorted({r.class_label for r in records}, key=_class_order)
    rmse, rmse_3d, by_diff = {}, {}, {}
    for label in labels:
        rs = [r for r in valid if r.class_label == label]
        rmse[label] = _rmse([r.axial_error for r in rs])
        rmse_3d[label] = _rmse([r.center_error_3d for r in rs])
        by_diff[label] = {
            d: _rmse([r.axial_error for r in rs if r.difficulty == d])
            for d in ("Easy", "Moderate", "Hard")
        }
    small = [r for r in valid if r.class_label in ("Pedestrian", "Cyclist")]
    if small:
        rmse[POOLED_PED_CYC] = _rmse([r.axial_error for r in small])
        rmse_3d[POOLED_PED_CYC] = _rmse([r.center_error_3d for r in small])
    ratios = [1.0 - r.points_after / r.points_before for r in records if r.points_before > 0]
    return EvalReport(
        rmse=rmse,
        rmse_3d=rmse_3d,
        rmse_by_difficulty=by_diff,
        overall_rmse=_rmse([r.axial_error for r in valid]),
        containment_rate=(sum(r.contained for r in records) / len(records)) if records else None,
        mean_reduction_ratio=math.fsum(ratios) / len(ratios) if ratios else None,
        counts={label: sum(r.class_label == label for r in records) for label in labels},
        fallback_counts={label: sum(r.fallback and r.class_label == label for r in records)
                         for label in labels},
        num_records=len(records),
    )


def _class_order(label: str):
    return (CLASSES.index(label) if label in CLASSES else len(CLASSES), label)


def evaluate_dataset(dataset: Iterable[FrameData], params: HeuristicParams = HeuristicParams(),
                     baseline: str = "ffs") -> List[EvalRecord]:
    records = []
    for fd in dataset:
        records.extend(evaluate_frame(fd.cloud, fd.calib, fd.objects, params, fd.frame_id, baseline))
    return records


@dataclass
class GridCell:
    params: HeuristicParams
    report: Optional[EvalReport]
    error: Optional[str] = None

    def sort_key(self):
        p = self.params
        rmse = self.report.overall_rmse if self.report and self.report.overall_rmse is not None else math.inf
        return (self.error is not None, rmse, p.bin_length, p.neighbor_bins, p.w, p.roi_length)

    def to_row(self) -> dict:
        p = self.params
        rep = self.report
        return {
            "bin_length": p.bin_length,
            "neighbor_bins": p.neighbor_bins,
            "w": p.w,
            "roi_length": p.roi_length,
            "far_plane": p.far_plane,
            "rmse": rep.overall_rmse if rep else None,
            **{f"rmse_{k}": v for k, v in (rep.rmse.items() if rep else ())},
            "containment_rate": rep.containment_rate if rep else None,
            "mean_reduction_ratio": rep.mean_reduction_ratio if rep else None,
            "num_records": rep.num_records if rep else 0,
            "error": self.error,
        }


def _as_list(v) -> list:
    if isinstance(v, (int, float)):
        return [v]
    return list(v)


def grid_search(dataset: Iterable[FrameData], bin_lengths, neighbor_bins_values, w_values,
                h: Union[float, Sequence[float]], base: HeuristicParams = HeuristicParams(),
                baseline: str = "ffs") -> List[GridCell]:
    """Evaluate every parameter combination, best RMSE first.

    Frustum point selections depend only on the far plane and dilation, so
    they are computed once per object and reused across cells. A cell that
    raises is kept with its error message instead of aborting the sweep.
    """
    if any(b <= 0 for b in _as_list(bin_lengths)):
        raise ValueError("bin lengths must be strictly positive")
    prepared = []
    for fd in dataset:
        cloud = _as_rect(fd.cloud, fd.calib)
        for k, gt in enumerate(fd.objects):
            frustum = build_frustum(gt.box2d, fd.calib, base.far_plane, base.dilation)
            prepared.append((fd.frame_id, k, gt, frustum, select_frustum_points(frustum, cloud)))

    cells = []
    for bl, nb, w, hh in itertools.product(_as_list(bin_lengths), _as_list(neighbor_bins_values),
                                           _as_list(w_values), _as_list(h)):
        try:
            params = base.with_(bin_length=float(bl), neighbor_bins=int(nb), w=float(w),
                                roi_length=float(hh))
        except ValueError as exc:
            cells.append(GridCell(base, None, str(exc)))
            continue
        try:
            records = []
            for frame_id, k, gt, frustum, selection in prepared:
                if baseline == "ffs":
                    roi = constrain_selection(frustum, selection, params)
                else:
                    try:
                        roi = ground_truth_constrain(gt, frustum, params.roi_length, params)
                    except InvalidCenterError:
                        roi = full_roi(frustum, params)
                records.append(_record(frame_id, k, gt, roi, selection, filter_points(roi, selection)))
            cells.append(GridCell(params, aggregate(records)))
        except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the sweep
            logger.warning("grid cell %s failed: %s", params, exc)
            cells.append(GridCell(params, None, f"{type(exc).__name__}: {exc}"))
    cells.sort(key=GridCell.sort_key)
    return cells


def summarize_timings(samples_ns: Sequence[int], points: int, num_frustums: int,
                      repetitions: int) -> TimingSummary:
    us = np.asarray(samples_ns, dtype=np.float64) / 1e3
    total_s = float(us.sum()) / 1e6
    return TimingSummary(
        mean_us=float(us.mean()),
        median_us=float(np.median(us)),
        p95_us=float(np.percentile(us, 95)),
        points_per_second=points / total_s if total_s > 0 else math.inf,
        num_frustums=num_frustums,
        repetitions=repetitions,
        num_measurements=int(us.size),
        samples_us=us.tolist(),
    )


def bench(dataset: Iterable[FrameData], params: HeuristicParams = HeuristicParams(),
          repetitions: int = 5) -> TimingSummary:
    """Per-frustum wall-clock latency of ``run_ffs`` (file I/O excluded).

    One untimed warm-up pass precedes ``repetitions`` timed passes; each
    (frustum, pass) pair is one sample. Throughput counts cloud points scanned.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    jobs = []
    for fd in dataset:
        cloud = _as_rect(fd.cloud, fd.calib)
        jobs.extend((cloud, gt.box2d, fd.calib) for gt in fd.objects)
    for cloud, box, calib in jobs:
        run_ffs(cloud, box, calib, params)
    samples, points = [], 0
    for _ in range(repetitions):
        for cloud, box, calib in jobs:
            t0 = time.perf_counter_ns()
            run_ffs(cloud, box, calib, params)
            samples.append(time.perf_counter_ns() - t0)
            points += len(cloud)
    if not samples:
        return TimingSummary(None, None, None, 0.0, 0, repetitions, 0)
    return summarize_timings(samples, points, len(jobs), repetitions)
