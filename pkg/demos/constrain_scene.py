"""
Constraining one frustum
========================

A synthetic scan with a single car, seen through KITTI's left color camera.
We lift the car's 2D box to a frustum, look at the axial histogram and keep
a 30 m window around its densest stretch.
"""
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
import synth  # synthetic KITTI-like scenes shared with the test suite

from ffs3d import (HeuristicParams, build_frustum, build_histogram, peak_bin,
                   run_ffs, select_frustum_points, smear_weights, velo_to_rect)

rng = np.random.default_rng(0)
calib = synth.kitti_calib()
lidar, objects = synth.make_frame(rng, n_objects=1, n_background=6000, calib=calib)
car = objects[0]
print("car center (rect cam):", np.round(car.center, 2))

# the heuristic works in the rectified camera frame
cloud = velo_to_rect(lidar, calib)
params = HeuristicParams()

# frustum and the raw per-bin counts along its axis
frustum = build_frustum(car.box2d, calib, params.far_plane)
sel = select_frustum_points(frustum, cloud)
hist = build_histogram(sel, frustum, params)
print("points in frustum:", len(sel), "in", hist.num_bins, "bins")

# smearing lets each point vote for its neighbors, which favors wide dense runs
smeared = smear_weights(hist, params)
peak = peak_bin(smeared)
print("peak bin %d, center %.2f m along the axis" % peak)

# a text histogram: counts per 3 m, with the peak marked
edges = np.arange(0, params.far_plane + 3, 3.0)
coarse, _ = np.histogram(sel.axis_coords, edges)
for lo, n in zip(edges[:-1], coarse):
    mark = " <- peak" if lo <= peak.c < lo + 3 else ""
    print("%5.1f m %s%s" % (lo, "#" * int(60 * n / coarse.max()), mark))

# the one-call version of the above
roi, kept = run_ffs(cloud, car.box2d, calib, params)
print("RoI [%.2f, %.2f] m, kept %d of %d points" % (roi.near_c, roi.far_c, len(kept), len(sel)))
