"""``ffs3d`` command line: constrain, evaluate, gridsearch, bench."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .core import (
    DEFAULT_BIN_LENGTH,
    DEFAULT_FAR_PLANE,
    DEFAULT_NEIGHBOR_BINS,
    DEFAULT_ROI_LENGTH,
    DEFAULT_WEIGHT,
    HeuristicParams,
    run_ffs,
)
from .errors import FFSError
from .frustum import build_frustum, select_frustum_points
from .evaluation import BASELINES, aggregate, bench, evaluate_frame, grid_search
from .kitti_io import CLASSES, Box2D, load_frame, read_split

logger = logging.getLogger("ffs3d")

RECORD_FIELDS = ["frame_id", "object_id", "class_label", "difficulty", "c_pred", "c_gt",
                 "axial_error", "center_error_3d", "contained", "near_c", "far_c",
                 "points_before", "points_after", "fallback"]
GRID_FIELDS = ["bin_length", "neighbor_bins", "w", "roi_length", "far_plane", "rmse",
               "rmse_Car", "rmse_Pedestrian", "rmse_Cyclist", "rmse_Pedestrian+Cyclist",
               "containment_rate", "mean_reduction_ratio", "num_records", "error"]


class UsageError(Exception):
    pass


def parse_values(text: str, kind=float) -> List:
    """Parse ``"a,b,c"`` or an inclusive ``"start:step:stop"`` range."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise UsageError(f"range {text!r} must be start:step:stop")
            start, step, stop = (float(p) for p in parts)
            if not step > 0 or stop < start:
                raise UsageError(f"range {text!r} needs step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [round(start + i * step, 10) for i in range(n)]
        else:
            values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse {text!r}: {exc}") from None
    if not values:
        raise UsageError(f"empty value list {text!r}")
    if kind is int:
        if any(v != int(v) for v in values):
            raise UsageError(f"{text!r} must contain integers")
        values = [int(v) for v in values]
    return values


def parse_box(spec: str, label: str) -> Box2D:
    try:
        x1, y1, x2, y2 = (float(v) for v in spec.split(","))
    except ValueError:
        raise UsageError(f"--box needs x_min,y_min,x_max,y_max, got {spec!r}") from None
    return Box2D(x1, y1, x2, y2, label)


def _params(args, **override) -> HeuristicParams:
    kw = dict(bin_length=args.bin_length, neighbor_bins=args.neighbor_bins, w=args.weight,
              roi_length=args.roi_length, far_plane=args.far_plane, dilation=args.dilation)
    kw.update(override)
    try:
        return HeuristicParams(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _classes(args) -> List[str]:
    classes = [c.strip() for c in args.classes.split(",") if c.strip()]
    bad = [c for c in classes if c not in CLASSES]
    if bad:
        raise UsageError(f"unknown classes: {', '.join(bad)}")
    return classes


def _data_root(args) -> Path:
    if not args.data_root:
        raise UsageError("no data root: pass --data-root or set FFS_DATA_ROOT")
    return Path(args.data_root)


def _frame_ids(args, root: Path) -> List[str]:
    if args.split:
        return read_split(args.split)
    velo = root / "velodyne"
    if not velo.is_dir():
        raise UsageError(f"{velo} is not a directory")
    return sorted(p.stem for p in velo.glob("*.bin"))


def _write(args, text: str) -> None:
    """Write the artifact atomically, or to stdout when no path is given."""
    if not args.output or args.output == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    out = Path(args.output)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, out)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _dump_csv(rows: Sequence[dict], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()


def _params_dict(p: HeuristicParams) -> dict:
    return {"bin_length": p.bin_length, "neighbor_bins": p.neighbor_bins, "w": p.w,
            "roi_length": p.roi_length, "far_plane": p.far_plane, "dilation": p.dilation}


# --- constrain ------------------------------------------------------------------

def cmd_constrain(args) -> int:
    root = _data_root(args)
    params = _params(args)
    box = parse_box(args.box, args.class_label)
    fd = load_frame(root, args.frame, classes=())
    roi, kept = run_ffs(fd.cloud, box, fd.calib, params)
    frustum_pts = _frustum_count(fd, box, params)
    out = {
        "frame_id": args.frame,
        "c": roi.c,
        "near": roi.near_c,
        "far": roi.far_c,
        "points_before": frustum_pts,
        "points_after": len(kept),
        "fallback": roi.fallback,
        "params": _params_dict(params),
    }
    if args.emit_indices:
        out["indices"] = kept.indices.tolist()
    _write(args, _dump_json(out))
    return 0


def _frustum_count(fd, box, params) -> int:
    return len(select_frustum_points(build_frustum(box, fd.calib, params.far_plane, params.dilation),
                                     fd.cloud))


# --- evaluate -------------------------------------------------------------------

def _evaluate_one(job):
    root, frame_id, classes, params, baseline = job
    try:
        fd = load_frame(root, frame_id, classes)
        return frame_id, evaluate_frame(fd.cloud, fd.calib, fd.objects, params, frame_id, baseline), None
    except (FFSError, OSError) as exc:
        return frame_id, [], f"{type(exc).__name__}: {exc}"


def _run_frames(jobs, parallelism: int):
    if parallelism <= 1 or len(jobs) <= 1:
        return [_evaluate_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        # map preserves submission order, so output order is independent of scheduling
        return list(pool.map(_evaluate_one, jobs, chunksize=max(1, len(jobs) // (4 * parallelism))))


def cmd_evaluate(args) -> int:
    root = _data_root(args)
    params = _params(args)
    classes = _classes(args)
    ids = _frame_ids(args, root)
    jobs = [(str(root), fid, tuple(classes), params, args.baseline) for fid in ids]
    results = _run_frames(jobs, args.parallelism)

    records, failed = [], []
    for frame_id, recs, err in results:
        if err is not None:
            logger.error("frame %s failed: %s", frame_id, err)
            failed.append({"frame_id": frame_id, "error": err})
        records.extend(recs)
    if ids and len(failed) == len(ids):
        print(f"error: all {len(ids)} frames failed", file=sys.stderr)
        return 1

    report = aggregate(records)
    if args.format == "csv":
        text = _dump_csv([r.to_dict() for r in records], RECORD_FIELDS)
    else:
        text = _dump_json({
            "baseline": args.baseline,
            "params": _params_dict(params),
            "classes": classes,
            "num_frames": len(ids),
            "failed_frames": failed,
            "report": report.to_dict(),
            "records": [r.to_dict() for r in records],
        })
    _write(args, text)

    summary = sys.stderr if (not args.output or args.output == "-") else sys.stdout
    for label, value in report.rmse.items():
        shown = "n/a" if value is None else f"{value:.3f} m"
        n = sum(report.counts.get(part, 0) for part in label.split("+"))
        print(f"RMSE {label}: {shown} ({n} objects)", file=summary)
    print(f"frames: {len(ids)} ok: {len(ids) - len(failed)} failed: {len(failed)}; "
          f"records: {report.num_records}", file=summary)
    return 0


# --- gridsearch -----------------------------------------------------------------

def _load_dataset(root: Path, ids, classes):
    frames = []
    for fid in ids:
        try:
            frames.append(load_frame(root, fid, classes))
        except (FFSError, OSError) as exc:
            logger.error("frame %s failed: %s", fid, exc)
    return frames


def cmd_gridsearch(args) -> int:
    bins = parse_values(args.bin_length)
    nbs = parse_values(str(args.neighbor_bins), int)
    ws = parse_values(args.weight)
    hs = parse_values(args.roi_length)
    if any(b <= 0 for b in bins):
        raise UsageError("bin lengths must be > 0")
    if any(n < 0 for n in nbs) or any(w < 0 for w in ws) or any(h <= 0 for h in hs):
        raise UsageError("neighbor bins and weights must be >= 0, RoI lengths > 0")
    root = _data_root(args)
    classes = _classes(args)
    ids = _frame_ids(args, root)
    frames = _load_dataset(root, ids, classes)
    if ids and not frames:
        print("error: no frame could be loaded", file=sys.stderr)
        return 1
    base = HeuristicParams(far_plane=args.far_plane, dilation=args.dilation)
    cells = grid_search(frames, bins, nbs, ws, hs, base=base, baseline=args.baseline)
    rows = [c.to_row() for c in cells]
    if args.format == "csv":
        text = _dump_csv(rows, GRID_FIELDS)
    else:
        text = _dump_json({"baseline": args.baseline, "num_frames": len(frames), "cells": rows})
    _write(args, text)
    return 0


# --- bench ----------------------------------------------------------------------

def cmd_bench(args) -> int:
    if args.repetitions < 1:
        raise UsageError("--repetitions must be >= 1")
    root = _data_root(args)
    params = _params(args)
    ids = _frame_ids(args, root)
    frames = _load_dataset(root, ids, _classes(args))
    summary = bench(frames, params, args.repetitions)
    out = summary.to_dict()
    out.update(params=_params_dict(params), warmup_passes=1, num_frames=len(frames))
    _write(args, _dump_json(out))
    return 0


# --- parser ---------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, grid: bool = False) -> None:
    """Heuristic flags; gridsearch takes them as lists/ranges parsed later."""
    num = str if grid else float
    p.add_argument("--data-root", default=os.environ.get("FFS_DATA_ROOT"),
                   help="KITTI training directory (default: $FFS_DATA_ROOT)")
    p.add_argument("--bin-length", type=num, default=num(DEFAULT_BIN_LENGTH))
    p.add_argument("--neighbor-bins", type=str if grid else int, default=DEFAULT_NEIGHBOR_BINS)
    p.add_argument("--weight", type=num, default=num(DEFAULT_WEIGHT),
                   help="weight each point adds to neighboring bins")
    p.add_argument("--roi-length", type=num, default=num(DEFAULT_ROI_LENGTH),
                   help="constrained RoI length h in meters")
    p.add_argument("--far-plane", type=float, default=DEFAULT_FAR_PLANE)
    p.add_argument("--dilation", type=float, default=0.0, help="grow 2D boxes by this many pixels")
    p.add_argument("--output", "-o", default=None, help="output path (default: stdout)")


def _add_dataset(p: argparse.ArgumentParser) -> None:
    p.add_argument("--split", default=None, help="file of frame ids, one per line")
    p.add_argument("--classes", default=",".join(CLASSES))
    p.add_argument("--parallelism", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ffs3d", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constrain", help="constrain the frustum of one 2D box")
    _add_common(p)
    p.add_argument("--frame", required=True)
    p.add_argument("--box", required=True, help="x_min,y_min,x_max,y_max in pixels")
    p.add_argument("--class", dest="class_label", default="Car", choices=CLASSES)
    p.add_argument("--emit-indices", action="store_true", help="include kept point indices")
    p.set_defaults(func=cmd_constrain)

    p = sub.add_parser("evaluate", help="RMSE/containment/reduction over a split")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--baseline", choices=BASELINES, default="ffs")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gridsearch", help="sweep heuristic parameters")
    _add_common(p, grid=True)
    _add_dataset(p)
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--baseline", choices=BASELINES, default="ffs")
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("bench", help="time the heuristic per frustum")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--repetitions", type=int, default=5)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "parallelism", 1) < 1:
        print("error: --parallelism must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FFSError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
