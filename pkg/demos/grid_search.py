"""
Searching heuristic parameters
==============================

Bin length, neighbor count and neighbor weight trade smoothing against
resolution. A small grid over a synthetic split shows the trade-off.
"""
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
import synth

from ffs3d import grid_search, load_frame

root = Path(tempfile.mkdtemp()) / "kitti"
frames = [load_frame(root, fid) for fid in synth.write_dataset(root, n_frames=8, seed=2)]

# frustum selections are computed once and shared by all 27 cells
cells = grid_search(frames, bin_lengths=[0.25, 0.75, 2.0], neighbor_bins_values=[0, 3, 7],
                    w_values=[0.25, 0.5, 1.0], h=30.0)

def show(cell):
    row = cell.to_row()
    print("bl=%.2f nb=%d w=%.2f  rmse %.3f  reduction %.3f"
          % (row["bin_length"], row["neighbor_bins"], row["w"], row["rmse"], row["mean_reduction_ratio"]))


print("best five cells:")
for cell in cells[:5]:
    show(cell)
print("worst:")
show(cells[-1])
