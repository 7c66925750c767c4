"""Command-line pipeline: simulate, calibrate, restim, track, gps-correct,
eval, report — plus a manifest-driven runner chaining them.

Exit codes: 0 success, 1 malformed input or configuration, 2 data
invariant violation (e.g. non-monotonic timestamps).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from . import drift, gps, io_formats as iof, moteval, plots, tracking
from .errors import (AllOutliers, ConfigInvalid, CurvitrackError,
                     DataInvariantViolation, InsufficientAnnotations)
from .geometry import (CorrespondencePoint, Homography, ImagePoint,
                       StatePlanePoint, fit_homography)
from .io_formats import MalformedInput
from .simulator import (DetectionConfig, Detection, DriftConfig, GpsConfig,
                        RoadConfig, SceneConfig, simulate)

log = logging.getLogger("curvitrack")


# ---------------------------------------------------------------------------
# config plumbing

def scene_config_from_dict(d: dict) -> SceneConfig:
    d = dict(d)
    nested = {"road": RoadConfig, "drift": DriftConfig,
              "detection": DetectionConfig, "gps": GpsConfig}
    kwargs = {}
    for key, cls in nested.items():
        if key in d:
            sub = d.pop(key)
            unknown = set(sub) - {f.name for f in dataclasses.fields(cls)}
            if unknown:
                raise ConfigInvalid(f"unknown {key} config fields {sorted(unknown)}")
            kwargs[key] = cls(**sub)
    unknown = set(d) - {f.name for f in dataclasses.fields(SceneConfig)}
    if unknown:
        raise ConfigInvalid(f"unknown config fields {sorted(unknown)}")
    if "state_offset" in d:
        d["state_offset"] = tuple(d["state_offset"])
    return SceneConfig(**d, **kwargs)


def _load_scene_config(args) -> SceneConfig:
    cfg = scene_config_from_dict(iof.read_json(args.config)) if args.config \
        else SceneConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _records_to_points(records) -> list[CorrespondencePoint]:
    return [CorrespondencePoint(r["id"],
                                ImagePoint(*map(float, r["im"])),
                                StatePlanePoint(*map(float, r["st"]), 0.0))
            for r in records]


def _points_to_records(cam_id, direction, points):
    return [{"id": p.id, "camera": cam_id, "direction": direction,
             "im": [p.image.x, p.image.y], "st": [p.world.x, p.world.y]}
            for p in points]


def _read_detections(path) -> list[Detection]:
    return [Detection(float(r["t"]), r.get("camera", ""),
                      tuple(float(b) for b in r["box"]),
                      r.get("class", ""), float(r["conf"]))
            for r in iof.read_detections(path)]


class _GtTrace:
    """Ground-truth trajectory reconstructed from a track file."""

    def __init__(self, series):
        self.vehicle_id = series.id
        self.times = series.times
        self.x = series.boxes[:, 0]
        self.y = series.boxes[:, 1]
        self.dims = tuple(np.median(series.boxes[:, 2:5], axis=0))


# ---------------------------------------------------------------------------
# stages

def cmd_simulate(args) -> int:
    cfg = _load_scene_config(args)
    out = args.out
    os.makedirs(out, exist_ok=True)
    result = simulate(cfg)

    iof.write_json(os.path.join(out, "spline.json"), result.spline.to_dict())
    pts = []
    for cam in result.cameras:
        pts.extend(_points_to_records(cam.camera_id, cam.direction, cam.points))
    iof.write_points(os.path.join(out, "points.jsonl"), pts)
    iof.write_homographies(
        os.path.join(out, "reference.json"),
        [{"camera": c.camera_id, "direction": c.direction,
          "h": iof.h_to_list(c.reference.h)} for c in result.cameras])
    iof.write_snapshots(
        os.path.join(out, "snapshots.jsonl"),
        [{"epoch": s.epoch, "camera": s.camera_id, "direction": s.direction,
          "points": [{"id": pid, "im": [im.x, im.y]} for pid, im in s.points]}
         for s in result.snapshots])
    iof.write_json(
        os.path.join(out, "sift_maps.json"),
        [{"camera": cid,
          "maps": [{"epoch": e, "m": iof.h_to_list(m)} for e, m in maps]}
         for cid, maps in sorted(result.sift_maps.items())])
    iof.write_detections(os.path.join(out, "detections.jsonl"),
                         result.detections)
    iof.write_gt_tracks(os.path.join(out, "gt_tracks.jsonl"),
                        result.ground_truth.trajectories)
    iof.write_gps(os.path.join(out, "gps.csv"), result.gps_traces)
    iof.write_annotations(os.path.join(out, "annotations.csv"),
                          result.annotations)
    log.info("simulate: %d cameras, %d detections, %d snapshots",
             len(result.cameras), len(result.detections), len(result.snapshots))
    return 0


def cmd_calibrate(args) -> int:
    records = iof.read_points(args.points)
    groups: dict = {}
    for r in records:
        groups.setdefault((r["camera"], r["direction"]), []).append(r)
    entries = []
    for i, ((cam, direction), recs) in enumerate(sorted(groups.items())):
        points = _records_to_points(recs)
        h, inliers = fit_homography(points, camera_id=cam,
                                    direction=direction,
                                    seed=(args.seed or 0) + i)
        entries.append({"camera": cam, "direction": direction,
                        "h": iof.h_to_list(h.h), "inliers": len(inliers)})
    iof.write_homographies(args.out, entries)
    return 0


def cmd_restim(args) -> int:
    records = iof.read_points(args.points)
    ref_entries = {e["camera"]: e for e in iof.read_homographies(args.reference)}
    snaps_raw = iof.read_snapshots(args.snapshots)
    sift = {}
    if args.sift:
        for e in iof.read_json(args.sift):
            sift[e["camera"]] = [(m["epoch"], np.asarray(m["m"], dtype=float))
                                 for m in e["maps"]]
    os.makedirs(args.out, exist_ok=True)

    points_by_cam: dict = {}
    for r in records:
        points_by_cam.setdefault(r["camera"], []).append(r)
    snaps_by_cam: dict = {}
    for s in snaps_raw:
        snaps_by_cam.setdefault(s["camera"], []).append(s)

    timelines = []
    rows = []
    for cam in sorted(ref_entries):
        if cam not in snaps_by_cam or cam not in points_by_cam:
            continue
        entry = ref_entries[cam]
        direction = entry.get("direction", "EB")
        reference = Homography(np.asarray(entry["h"], dtype=float),
                               cam, direction)
        points = _records_to_points(points_by_cam[cam])
        snapshots = [
            drift.RediscoverySnapshot(
                float(s["epoch"]), cam, direction,
                tuple((p["id"], ImagePoint(*map(float, p["im"])))
                      for p in s["points"]))
            for s in snaps_by_cam[cam]]
        tl, rejected = drift.build_timeline(reference, points, snapshots)
        if len(tl.instants) < 3:
            log.warning("restim: %s has %d usable instants, skipping",
                        cam, len(tl.instants))
            continue
        tl.sift_maps = sift.get(cam, [])
        try:
            static = drift.build_static(tl)
            dynamic = drift.build_dynamic(tl)
        except AllOutliers as exc:
            log.warning("restim: %s skipped: %s", cam, exc)
            continue
        baseline = drift.build_baseline(tl) if tl.sift_maps else []

        snap_by_epoch = {s.epoch: s for s in snapshots}
        for epoch, h_t, _ in tl.instants:
            fit = drift.metric_fitness(points, snap_by_epoch[epoch], h_t)
            fd_ref = drift.metric_full_drift(points, reference, h_t)
            fd_stat = drift.metric_full_drift(points, static, h_t)
            fd_dyn = drift.metric_full_drift(
                points, drift.dynamic_at(dynamic, epoch), h_t)
            fd_base = (drift.metric_full_drift(
                points, drift.dynamic_at(baseline, epoch), h_t)
                if baseline else None)
            rows.append((cam, epoch, fit.mean, fd_ref.mean, fd_stat.mean,
                         fd_dyn.mean,
                         fd_base.mean if fd_base is not None else ""))

        timelines.append({
            "camera": cam, "direction": direction,
            "reference": iof.h_to_list(reference.h),
            "instants": [{"epoch": e, "h": iof.h_to_list(h.h),
                          "inliers": inl} for e, h, inl in tl.instants],
            "rejected": [{"epoch": e, "reason": r} for e, r in rejected],
            "static": iof.h_to_list(static.h),
            "dynamic": [{"epoch": e, "h": iof.h_to_list(h.h)}
                        for e, h in dynamic],
            "baseline": [{"epoch": e, "h": iof.h_to_list(h.h)}
                         for e, h in baseline],
        })

    iof.write_json(os.path.join(args.out, "timelines.json"), timelines)
    iof.write_csv(os.path.join(args.out, "drift.csv"),
                  ("camera", "epoch", "fitness_mean", "fd_uncorrected",
                   "fd_static", "fd_dynamic", "fd_baseline"), rows)
    return 0


def cmd_track(args) -> int:
    detections = _read_detections(args.detections)
    if args.algo == "oracle":
        if not args.gt:
            raise MalformedInput("oracle tracker requires --gt")
        traces = [_GtTrace(s) for s in iof.read_gt_series(args.gt)]
        tracklets = tracking.run_oracle(detections, traces)
    else:
        tracklets = tracking.run_tracker(args.algo, detections)
    iof.write_tracklets(args.out, tracklets)
    log.info("track: %s produced %d tracklets", args.algo, len(tracklets))
    return 0


def cmd_gps_correct(args) -> int:
    traces = iof.read_gps(args.gps)
    annotations = iof.read_annotations(args.annotations)
    os.makedirs(args.out, exist_ok=True)
    corrected, summary = [], {}
    for trace in traces:
        try:
            res = gps.refine(trace, annotations)
        except InsufficientAnnotations as exc:
            summary[trace.vehicle_id] = {"skipped": str(exc)}
            corrected.append(trace)
            continue
        corrected.append(res.trace)
        summary[trace.vehicle_id] = {
            "bias_ft": res.bias_ft,
            "time_offset_s": res.time_offset_s,
            "degenerate_offset": res.degenerate_offset,
            "sawtooth_dropped": res.sawtooth_dropped,
        }
    iof.write_gps(os.path.join(args.out, "gps_corrected.csv"), corrected)
    iof.write_json(os.path.join(args.out, "gps_summary.json"), summary)
    return 0


def cmd_eval(args) -> int:
    gt_series = iof.read_gt_series(args.gt)
    tracklets = iof.read_tracklets(args.tracks)
    report = moteval.evaluate(gt_series, tracklets)
    iof.write_json(args.out, report.to_dict())
    root, _ = os.path.splitext(args.out)
    iof.write_csv(root + ".csv", report.COLUMNS, [report.row()])
    print("HOTA {:.3f}  DetA {:.3f}  AssA {:.3f}  Recall {:.3f}".format(
        report.hota, report.det_a, report.ass_a, report.recall))
    return 0


def cmd_report(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.drift:
        header, rows = iof.read_csv(args.drift)
        methods = [c for c in header if c.startswith("fd_")]
        series = {}
        means = {}
        for m in methods:
            j = header.index(m)
            pts = [(float(r[1]), float(r[j])) for r in rows if r[j] != ""]
            if not pts:
                continue
            pts.sort()
            series[m[3:]] = (np.array([p[0] for p in pts]),
                             np.array([p[1] for p in pts]))
            means[m[3:]] = float(np.mean([p[1] for p in pts]))
        iof.write_csv(os.path.join(args.out, "drift_summary.csv"),
                      ("method", "mean_fulldrift_ft"),
                      sorted(means.items()))
        plots.line_chart(os.path.join(args.out, "drift_timeline.svg"),
                         series, "FullDrift vs time", "epoch (s)", "drift (ft)")
        items = sorted(means.items())
        plots.bar_chart(os.path.join(args.out, "drift_means.svg"),
                        [k for k, _ in items], [v for _, v in items],
                        "Mean FullDrift by method", "feet")
    if args.eval:
        rep = iof.read_json(args.eval)
        cols = [c for c in moteval.EvalReport.COLUMNS if c in rep]
        iof.write_csv(os.path.join(args.out, "eval_summary.csv"),
                      cols, [[rep[c] for c in cols]])
        plots.bar_chart(os.path.join(args.out, "eval_metrics.svg"),
                        cols, [rep[c] for c in cols], "Tracking metrics")
    if not args.drift and not args.eval:
        plots.line_chart(os.path.join(args.out, "drift_timeline.svg"),
                         {}, "FullDrift vs time")
    return 0


def cmd_pipeline(args) -> int:
    manifest = iof.read_json(args.manifest)
    out = manifest.get("out", args.out or "pipeline_out")
    os.makedirs(out, exist_ok=True)

    def p(name):
        return os.path.join(out, name)

    stages = manifest.get("stages", ["simulate", "calibrate", "restim",
                                     "track", "gps-correct", "eval", "report"])
    cfg_path = None
    if "scene" in manifest:
        cfg_path = p("scene_config.json")
        iof.write_json(cfg_path, manifest["scene"])
    seed = manifest.get("seed")

    for stage in stages:
        log.info("pipeline: stage %s", stage)
        if stage == "simulate":
            argv = ["simulate", "--out", out]
            if cfg_path:
                argv += ["--config", cfg_path]
            if seed is not None:
                argv += ["--seed", str(seed)]
        elif stage == "calibrate":
            _require_files(p("points.jsonl"))
            argv = ["calibrate", "--points", p("points.jsonl"),
                    "--out", p("fitted.json")]
        elif stage == "restim":
            _require_files(p("points.jsonl"), p("reference.json"),
                           p("snapshots.jsonl"))
            argv = ["restim", "--points", p("points.jsonl"),
                    "--reference", p("reference.json"),
                    "--snapshots", p("snapshots.jsonl"),
                    "--sift", p("sift_maps.json"), "--out", out]
        elif stage == "track":
            _require_files(p("detections.jsonl"))
            algo = manifest.get("track", {}).get("algo", "sort")
            argv = ["track", "--detections", p("detections.jsonl"),
                    "--algo", algo, "--out", p("tracks.jsonl"),
                    "--gt", p("gt_tracks.jsonl")]
        elif stage == "gps-correct":
            _require_files(p("gps.csv"), p("annotations.csv"))
            argv = ["gps-correct", "--gps", p("gps.csv"),
                    "--annotations", p("annotations.csv"), "--out", out]
        elif stage == "eval":
            _require_files(p("gt_tracks.jsonl"), p("tracks.jsonl"))
            argv = ["eval", "--gt", p("gt_tracks.jsonl"),
                    "--tracks", p("tracks.jsonl"), "--out", p("report.json")]
        elif stage == "report":
            argv = ["report", "--out", out]
            if os.path.exists(p("drift.csv")):
                argv += ["--drift", p("drift.csv")]
            if os.path.exists(p("report.json")):
                argv += ["--eval", p("report.json")]
        else:
            raise MalformedInput(f"{args.manifest}: unknown stage {stage!r}")
        rc = main(argv)
        if rc != 0:
            return rc
    return 0


def _require_files(*paths):
    missing = [q for q in paths if not os.path.exists(q)]
    if missing:
        raise MalformedInput(f"missing stage inputs: {missing}")


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="curvitrack",
        description="Multi-camera roadway geometry and tracking pipeline")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1,
                       help="worker pool size (advisory)")
        p.add_argument("--out", required=out_required)

    p = sub.add_parser("simulate", help="generate a synthetic scene")
    p.add_argument("--config", help="scene config JSON")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="fit homographies from points")
    p.add_argument("--points", required=True)
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("restim", help="re-estimate drifting homographies")
    p.add_argument("--points", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--snapshots", required=True)
    p.add_argument("--sift", help="image-to-image alignment maps JSON")
    common(p)
    p.set_defaults(func=cmd_restim)

    p = sub.add_parser("track", help="run a tracker on detections")
    p.add_argument("--detections", required=True)
    p.add_argument("--algo", required=True,
                   choices=sorted(tracking.PARAM_FACTORIES) + ["oracle"])
    p.add_argument("--gt", help="ground truth (oracle tracker only)")
    common(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("gps-correct", help="refine GPS traces")
    p.add_argument("--gps", required=True)
    p.add_argument("--annotations", required=True)
    common(p)
    p.set_defaults(func=cmd_gps_correct)

    p = sub.add_parser("eval", help="evaluate tracklets against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--tracks", required=True)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="summaries and SVG figures")
    p.add_argument("--drift", help="drift.csv from restim")
    p.add_argument("--eval", help="report.json from eval")
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="run stages from a manifest")
    p.add_argument("--manifest", required=True)
    common(p, out_required=False)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("CURVITRACK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (MalformedInput, ConfigInvalid, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataInvariantViolation, CurvitrackError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
