"""Frustum search-space reduction for camera-LiDAR 3D detection.

Given a LiDAR scan, KITTI calibration and a 2D box, find the densest stretch
of the box's frustum and keep only a window of length ``h`` around it.
"""

__version__ = "0.1.0"

from .core import (
    BinHistogram,
    ConstrainedRoI,
    HeuristicParams,
    PeakBin,
    build_histogram,
    constrain_roi,
    filter_points,
    ground_truth_constrain,
    peak_bin,
    run_ffs,
    smear_weights,
)
from .errors import (
    DegenerateBoxError,
    EmptyFrustumError,
    FFSError,
    FormatError,
    FrameError,
    InvalidCenterError,
    KittiIOError,
    SmearTwiceError,
    ValidationError,
)
from .evaluation import EvalRecord, EvalReport, aggregate, bench, evaluate_frame, grid_search
from .frustum import (
    Frustum,
    FrustumSelection,
    axis_coordinate,
    build_frustum,
    point_in_frustum,
    select_frustum_points,
)
from .kitti_io import (
    Box2D,
    CalibrationSet,
    Frame,
    FrameData,
    GroundTruthObject,
    PointCloud,
    load_calibration,
    load_detections,
    load_frame,
    load_labels,
    load_point_cloud,
    velo_to_rect,
)
