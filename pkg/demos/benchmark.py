"""
How fast is it?
===============

Per-frustum latency of the full pipeline (frustum, histogram, peak, window)
with file I/O excluded, then a quick look at how it grows with point count.
"""
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
import synth

from ffs3d import Box2D, Frame, HeuristicParams, PointCloud, bench, build_frustum, load_frame, run_ffs

root = Path(tempfile.mkdtemp()) / "kitti"
frames = [load_frame(root, fid) for fid in synth.write_dataset(root, n_frames=6, seed=3)]
summary = bench(frames, HeuristicParams(), repetitions=20)
print("mean %.0f us, median %.0f us, p95 %.0f us" % (summary.mean_us, summary.median_us, summary.p95_us))
print("throughput %.2e points/s" % summary.points_per_second)

# scaling: fill one frustum with N points and time run_ffs
calib = synth.kitti_calib()
box = Box2D(560, 150, 660, 210)
frustum = build_frustum(box, calib)
rng = np.random.default_rng(0)
for n in (1_000, 10_000, 100_000):
    uv = rng.uniform([box.x_min, box.y_min], [box.x_max, box.y_max], size=(n, 2))
    rays = np.linalg.solve(calib.P2[:, :3], np.column_stack([uv, np.ones(n)]).T).T
    depth = rng.uniform(1, 69, n) / (rays @ frustum.axis)
    cloud = PointCloud(frustum.origin + rays * depth[:, None], Frame.RECT_CAM)
    run_ffs(cloud, box, calib)  # warm-up
    t = []
    for _ in range(30):
        t0 = time.perf_counter()
        run_ffs(cloud, box, calib)
        t.append(time.perf_counter() - t0)
    print("N=%7d  median %8.0f us" % (n, 1e6 * np.median(t)))
