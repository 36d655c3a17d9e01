import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffs3d.core import HeuristicParams
from ffs3d.evaluation import (
    EvalRecord,
    aggregate,
    bench,
    difficulty,
    evaluate_dataset,
    evaluate_frame,
    grid_search,
)
from ffs3d.kitti_io import Box2D, CalibrationSet, Frame, FrameData, GroundTruthObject, PointCloud

import synth

IDENT = CalibrationSet.identity()


def rec(err, label="Car", fallback=False, before=10, after=5, contained=True):
    return EvalRecord("f", 0, label, 10.0 + err, 10.0, err, err, contained, before, after,
                      fallback, 0.0, 40.0)


@pytest.fixture(scope="module")
def frames():
    rng = np.random.default_rng(42)
    calib = synth.kitti_calib()
    out = []
    for i in range(6):
        cloud, objs = synth.make_frame(rng, 3, calib=calib)
        out.append(FrameData(f"{i:06d}", cloud, calib, objs))
    return out


class TestEvaluateFrame:
    def test_point_cluster_at_center(self):
        z = 23.3
        gt = GroundTruthObject("Car", (0.0, 0.0, z), 1.5, 1.6, 3.9, 0.0, Box2D(-0.1, -0.1, 0.1, 0.1))
        cloud = PointCloud(np.tile([0.0, 0.0, z], (50, 1)), Frame.RECT_CAM)
        (r,) = evaluate_frame(cloud, IDENT, [gt], HeuristicParams())
        assert r.axial_error <= 0.75 / 2
        assert r.contained and not r.fallback
        assert r.points_before == r.points_after == 50

    def test_no_objects(self, frames):
        fd = frames[0]
        assert evaluate_frame(fd.cloud, fd.calib, [], HeuristicParams()) == []

    def test_empty_frustum_fallback(self):
        gt = GroundTruthObject("Car", (0.0, 0.0, 20.0), 1.5, 1.6, 3.9, 0.0, Box2D(-0.1, -0.1, 0.1, 0.1))
        cloud = PointCloud([[50.0, 0.0, 1.0]], Frame.RECT_CAM)
        (r,) = evaluate_frame(cloud, IDENT, [gt], HeuristicParams())
        assert r.fallback and r.points_before == 0
        assert aggregate([r]).rmse["Car"] is None

    def test_lidar_cloud_accepted(self, frames):
        fd = frames[0]
        recs = evaluate_frame(fd.cloud, fd.calib, fd.objects, HeuristicParams(), fd.frame_id)
        assert len(recs) == len(fd.objects)
        assert all(r.points_after <= r.points_before for r in recs)

    def test_gt_baseline_zero_error(self, frames):
        fd = frames[1]
        recs = evaluate_frame(fd.cloud, fd.calib, fd.objects, HeuristicParams(), baseline="gt-center")
        assert all(r.axial_error == 0 and r.contained for r in recs if not r.fallback)

    def test_unknown_baseline(self, frames):
        with pytest.raises(ValueError):
            evaluate_frame(frames[0].cloud, frames[0].calib, [], baseline="oracle")

    def test_monotone_reduction_in_h(self, frames):
        a = evaluate_dataset(frames, HeuristicParams(roi_length=10))
        b = evaluate_dataset(frames, HeuristicParams(roi_length=30))
        for ra, rb in zip(a, b):
            assert ra.c_pred == rb.c_pred
            assert ra.points_after <= rb.points_after

    def test_containment_consistent_with_error(self, frames):
        p = HeuristicParams(roi_length=30)
        for r in evaluate_dataset(frames, p):
            # holds whenever the true center is inside the frustum's axis range
            if not r.fallback and r.axial_error < p.roi_length / 2 and 0 <= r.c_gt <= p.far_plane:
                assert r.contained


class TestAggregate:
    def test_rmse_two_records(self):
        rep = aggregate([rec(3), rec(4)])
        assert rep.rmse["Car"] == pytest.approx(math.sqrt(12.5), rel=1e-15)
        assert rep.rmse["Car"] == pytest.approx(3.5355339059327378)

    def test_fallback_excluded_from_rmse_only(self):
        rep = aggregate([rec(3), rec(100, fallback=True, contained=False)])
        assert rep.rmse["Car"] == 3
        assert rep.containment_rate == 0.5
        assert rep.fallback_counts["Car"] == 1 and rep.counts["Car"] == 2

    def test_pooled_small_classes(self):
        rep = aggregate([rec(3, "Pedestrian"), rec(4, "Cyclist"), rec(1)])
        assert rep.rmse["Pedestrian"] == 3 and rep.rmse["Cyclist"] == 4
        assert rep.rmse["Pedestrian+Cyclist"] == pytest.approx(math.sqrt(12.5))

    def test_reduction_ratio(self):
        rep = aggregate([rec(1, before=10, after=5), rec(1, before=4, after=1), rec(1, before=0, after=0)])
        assert rep.mean_reduction_ratio == pytest.approx((0.5 + 0.75) / 2)

    def test_empty(self):
        rep = aggregate([])
        assert rep.num_records == 0
        assert rep.overall_rmse is None and rep.containment_rate is None
        assert rep.mean_reduction_ratio is None

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 70), min_size=1, max_size=200))
    def test_rmse_recomputable(self, errors):
        rep = aggregate([rec(e) for e in errors])
        direct = math.sqrt(math.fsum(e * e for e in errors) / len(errors))
        assert rep.rmse["Car"] == direct
        np.testing.assert_allclose(rep.rmse["Car"], np.sqrt(np.mean(np.square(errors))), rtol=1e-13)


def test_difficulty_levels():
    def gt(height, occ, trunc):
        return GroundTruthObject("Car", (0, 0, 10), 1.5, 1.6, 3.9, 0.0, Box2D(0, 0, 50, height), trunc, occ)
    assert difficulty(gt(45, 0, 0.1)) == "Easy"
    assert difficulty(gt(30, 1, 0.2)) == "Moderate"
    assert difficulty(gt(30, 2, 0.4)) == "Hard"
    assert difficulty(gt(20, 0, 0.0)) == "Ignored"


class TestGridSearch:
    def test_singleton_matches_direct(self, frames):
        p = HeuristicParams()
        (cell,) = grid_search(frames, [0.75], [7], [p.w], 30.0)
        direct = aggregate(evaluate_dataset(frames, p))
        assert cell.report.to_dict() == direct.to_dict()

    def test_sorted_and_complete(self, frames):
        cells = grid_search(frames, [0.5, 0.75, 1.0], [0, 3, 7], [0.5], [20.0, 30.0])
        assert len(cells) == 18
        rmses = [c.report.overall_rmse for c in cells]
        assert rmses == sorted(rmses)

    def test_deterministic(self, frames):
        a = grid_search(frames, [0.5, 1.0], [0, 7], [0.5, 1.0], 30.0)
        b = grid_search(frames, [0.5, 1.0], [0, 7], [0.5, 1.0], 30.0)
        assert [c.to_row() for c in a] == [c.to_row() for c in b]

    def test_paper_grid_size(self):
        from ffs3d.cli import parse_values

        bins = parse_values("0.05:0.05:2.0")
        nbs = parse_values("0:1:10", int)
        assert len(bins) == 40 and bins[0] == 0.05 and bins[-1] == 2.0
        assert len(bins) * len(nbs) == 440

    def test_rejects_zero_bin_length(self, frames):
        with pytest.raises(ValueError):
            grid_search(frames, [0.0, 0.5], [7], [0.5], 30.0)

    def test_failed_cell_recorded(self, frames):
        cells = grid_search(frames, [0.75], [7], [0.5, -1.0], 30.0)
        assert len(cells) == 2
        assert cells[0].error is None and cells[1].error is not None


class TestBench:
    def test_summary_fields(self, frames):
        s = bench(frames[:2], HeuristicParams(), repetitions=3)
        n = sum(len(f.objects) for f in frames[:2])
        assert s.num_measurements == 3 * n and s.num_frustums == n
        assert 0 < s.median_us <= s.p95_us
        assert s.points_per_second > 0

    def test_single_measurement(self):
        gt = GroundTruthObject("Car", (0.0, 0.0, 20.0), 1.5, 1.6, 3.9, 0.0, Box2D(-0.1, -0.1, 0.1, 0.1))
        fd = FrameData("x", PointCloud(np.tile([0, 0, 20.0], (10, 1)), Frame.RECT_CAM), IDENT, [gt])
        s = bench([fd], HeuristicParams(), repetitions=1)
        assert s.num_measurements == 1
        assert s.mean_us == s.median_us == s.p95_us == s.samples_us[0]

    def test_invalid_repetitions(self, frames):
        with pytest.raises(ValueError):
            bench(frames, HeuristicParams(), repetitions=0)
