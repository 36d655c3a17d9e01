import csv
import io
import json

import pytest

from ffs3d.cli import main, parse_values, UsageError


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_values():
    assert parse_values("10,20,26,30,40,50,60,70") == [10, 20, 26, 30, 40, 50, 60, 70]
    assert parse_values("0:1:10", int) == list(range(11))
    with pytest.raises(UsageError):
        parse_values("1:0:3")
    with pytest.raises(UsageError):
        parse_values("a,b")
    with pytest.raises(UsageError):
        parse_values("0.5", int)


class TestConstrain:
    def test_schema(self, capsys, kitti_tree):
        root, ids = kitti_tree
        code, out, _ = run(capsys, "constrain", "--data-root", root, "--frame", ids[0],
                           "--box", "500,150,700,220", "--roi-length", 30, "--bin-length", 0.75,
                           "--neighbor-bins", 7)
        assert code == 0
        doc = json.loads(out)
        assert {"c", "near", "far", "points_before", "points_after", "fallback"} <= doc.keys()
        assert doc["params"]["bin_length"] == 0.75 and doc["params"]["neighbor_bins"] == 7
        assert doc["points_after"] <= doc["points_before"]

    def test_indices(self, capsys, kitti_tree):
        root, ids = kitti_tree
        code, out, _ = run(capsys, "constrain", "--data-root", root, "--frame", ids[0],
                           "--box", "500,150,700,220", "--emit-indices")
        doc = json.loads(out)
        assert code == 0 and len(doc["indices"]) == doc["points_after"]

    def test_missing_velodyne(self, capsys, kitti_tree):
        root, _ = kitti_tree
        code, _, err = run(capsys, "constrain", "--data-root", root, "--frame", "999999",
                           "--box", "1,1,20,20")
        assert code != 0
        assert "999999" in err

    def test_env_data_root(self, capsys, kitti_tree, monkeypatch):
        root, ids = kitti_tree
        monkeypatch.setenv("FFS_DATA_ROOT", str(root))
        code, out, _ = run(capsys, "constrain", "--frame", ids[0], "--box", "500,150,700,220")
        assert code == 0 and "c" in json.loads(out)


def test_flag_defaults():
    from ffs3d.cli import build_parser

    args = build_parser().parse_args(["evaluate"])
    assert (args.bin_length, args.neighbor_bins, args.far_plane) == (0.75, 7, 70.0)


class TestEvaluate:
    def test_json_report(self, capsys, kitti_tree, tmp_path):
        root, ids = kitti_tree
        out = tmp_path / "r.json"
        code, stdout, _ = run(capsys, "evaluate", "--data-root", root, "--split", root / "val.txt",
                              "--output", out)
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["num_frames"] == len(ids)
        assert doc["report"]["num_records"] == len(doc["records"]) > 0
        assert "RMSE Car" in stdout
        counts = doc["report"]["counts"]
        pooled = counts.get("Pedestrian", 0) + counts.get("Cyclist", 0)
        if pooled:
            assert f"({pooled} objects)" in stdout.split("RMSE Pedestrian+Cyclist")[1].splitlines()[0]

    def test_two_frame_fixture(self, capsys, kitti_tree, tmp_path):
        root, ids = kitti_tree
        split = tmp_path / "two.txt"
        split.write_text("\n".join(ids[:2]) + "\n")
        outs = []
        for k in range(2):
            p = tmp_path / f"r{k}.json"
            assert run(capsys, "evaluate", "--data-root", root, "--split", split, "-o", p)[0] == 0
            outs.append(p.read_bytes())
        assert outs[0] == outs[1]
        doc = json.loads(outs[0])
        assert doc["num_frames"] == 2
        assert {r["frame_id"] for r in doc["records"]} == set(ids[:2])

    def test_empty_split(self, capsys, kitti_tree, tmp_path):
        root, _ = kitti_tree
        split = tmp_path / "empty.txt"
        split.write_text("")
        code, out, _ = run(capsys, "evaluate", "--data-root", root, "--split", split)
        assert code == 0
        assert json.loads(out)["report"]["num_records"] == 0

    def test_csv(self, capsys, kitti_tree):
        root, _ = kitti_tree
        code, out, _ = run(capsys, "evaluate", "--data-root", root, "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and rows and "axial_error" in rows[0]

    def test_gt_baseline(self, capsys, kitti_tree):
        root, _ = kitti_tree
        code, out, _ = run(capsys, "evaluate", "--data-root", root, "--baseline", "gt-center")
        doc = json.loads(out)
        assert code == 0 and doc["baseline"] == "gt-center"
        assert all(r["axial_error"] == 0 for r in doc["records"] if not r["fallback"])

    def test_partial_failure(self, capsys, kitti_tree, tmp_path):
        root, ids = kitti_tree
        split = tmp_path / "s.txt"
        split.write_text(f"{ids[0]}\nmissing\n")
        code, out, _ = run(capsys, "evaluate", "--data-root", root, "--split", split)
        doc = json.loads(out)
        assert code == 0 and [f["frame_id"] for f in doc["failed_frames"]] == ["missing"]

    def test_all_fail(self, capsys, kitti_tree, tmp_path):
        root, _ = kitti_tree
        split = tmp_path / "s.txt"
        split.write_text("missing\n")
        out = tmp_path / "never.json"
        code, _, _ = run(capsys, "evaluate", "--data-root", root, "--split", split, "-o", out)
        assert code != 0 and not out.exists()


class TestGridsearch:
    def test_rows_sorted(self, capsys, kitti_tree):
        root, _ = kitti_tree
        code, out, _ = run(capsys, "gridsearch", "--data-root", root, "--bin-length", "0.5,0.75,1.0",
                           "--neighbor-bins", "0:1:2")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 9
        rmse = [float(r["rmse"]) for r in rows]
        assert rmse == sorted(rmse)

    def test_roi_length_sweep(self, capsys, kitti_tree):
        root, _ = kitti_tree
        code, out, _ = run(capsys, "gridsearch", "--data-root", root,
                           "--roi-length", "10,20,26,30,40,50,60,70", "--format", "json")
        cells = json.loads(out)["cells"]
        assert code == 0
        assert sorted(c["roi_length"] for c in cells) == [10, 20, 26, 30, 40, 50, 60, 70]

    def test_singleton_matches_evaluate(self, capsys, kitti_tree):
        root, _ = kitti_tree
        _, out, _ = run(capsys, "gridsearch", "--data-root", root, "--format", "json")
        (cell,) = json.loads(out)["cells"]
        _, out, _ = run(capsys, "evaluate", "--data-root", root)
        assert cell["rmse"] == json.loads(out)["report"]["overall_rmse"]

    def test_bad_range_exits_early(self, capsys, tmp_path):
        code, _, err = run(capsys, "gridsearch", "--data-root", tmp_path / "nothing",
                           "--bin-length", "0.05:0:2")
        assert code == 2 and "range" in err


class TestBench:
    def test_schema(self, capsys, kitti_tree):
        root, _ = kitti_tree
        code, out, _ = run(capsys, "bench", "--data-root", root, "--repetitions", 5)
        doc = json.loads(out)
        assert code == 0
        assert {"mean_us", "median_us", "p95_us", "points_per_second"} <= doc.keys()
        assert doc["repetitions"] == 5 and doc["warmup_passes"] == 1
        assert doc["num_measurements"] == 5 * doc["num_frustums"]

    def test_zero_repetitions(self, capsys, kitti_tree):
        root, _ = kitti_tree
        assert run(capsys, "bench", "--data-root", root, "--repetitions", 0)[0] == 2
