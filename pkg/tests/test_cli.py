import filecmp
import json
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from curvitrack import io_formats as iof
from curvitrack.cli import main
from curvitrack.errors import DataInvariantViolation


def run(args):
    return main([str(a) for a in args])


def simulate(out, seed=3, extra=None):
    cfg = {"extent_ft": 1500.0, "vehicle_count": 5, "duration_s": 20.0,
           "snapshot_interval_s": 5.0}
    if extra:
        cfg.update(extra)
    cfg_path = out / "scene.json"
    cfg_path.write_text(json.dumps(cfg))
    assert run(["simulate", "--config", cfg_path, "--seed", seed,
                "--out", out]) == 0


# ---------------------------------------------------------------------------
# serialization round trips

def test_fmt_round_trips_floats():
    for v in (0.1, 1.0 / 3.0, 1e-17, 123456.789, -2.5):
        assert float(iof.fmt(v)) == v


def test_atomic_write_leaves_no_temp_files(tmp_path):
    p = tmp_path / "x.json"
    iof.write_json(str(p), {"a": 1})
    assert [f.name for f in tmp_path.iterdir()] == ["x.json"]


def test_jsonl_round_trip(tmp_path):
    recs = [{"a": 1, "b": [1.5, 2.5]}, {"a": 2, "b": []}]
    p = str(tmp_path / "r.jsonl")
    iof.write_jsonl(p, recs)
    assert iof.read_jsonl(p) == recs


def test_malformed_jsonl_raises(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"a": 1}\nnot json\n')
    with pytest.raises(iof.MalformedInput):
        iof.read_jsonl(str(p))


def test_tracklet_round_trip(tmp_path):
    from curvitrack.tracking import Tracklet
    tk = Tracklet(7)
    for i in range(30):
        tk.times.append(i * 0.1)
        tk.boxes.append((100.0 + 9.0 * i, 6.0, 16.0, 6.0, 5.0))
        tk.dims_reported.append((16.0 + 0.01 * i, 6.0, 5.0))
    p = str(tmp_path / "tracks.jsonl")
    iof.write_tracklets(p, [tk])
    (back,) = iof.read_tracklets(p)
    assert back.id == 7
    assert back.times == pytest.approx(tk.times)
    assert np.allclose(back.boxes, tk.boxes)
    assert back.median_dims == pytest.approx(tk.median_dims)


def test_gps_round_trip(tmp_path):
    from curvitrack.gps import GpsTrace
    tr = GpsTrace("v1", np.arange(0.0, 3.0, 0.1),
                  np.linspace(0, 270, 30), np.full(30, 6.0))
    p = str(tmp_path / "gps.csv")
    iof.write_gps(p, [tr])
    (back,) = iof.read_gps(p)
    assert back.vehicle_id == "v1"
    assert np.array_equal(back.times, tr.times)
    assert np.array_equal(back.x, tr.x)


# ---------------------------------------------------------------------------
# subcommands

def test_simulate_writes_expected_files(tmp_path):
    simulate(tmp_path)
    for name in ("spline.json", "points.jsonl", "reference.json",
                 "snapshots.jsonl", "sift_maps.json", "detections.jsonl",
                 "gt_tracks.jsonl", "gps.csv", "annotations.csv"):
        assert (tmp_path / name).exists(), name


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    simulate(a)
    simulate(b)
    for name in os.listdir(a):
        assert filecmp.cmp(a / name, b / name, shallow=False), name


def test_calibrate_fits_references(tmp_path):
    simulate(tmp_path)
    assert run(["calibrate", "--points", tmp_path / "points.jsonl",
                "--out", tmp_path / "fitted.json"]) == 0
    fitted = iof.read_homographies(str(tmp_path / "fitted.json"))
    reference = iof.read_homographies(str(tmp_path / "reference.json"))
    by_cam = {e["camera"]: np.array(e["h"]) for e in fitted}
    for e in reference:
        assert np.abs(by_cam[e["camera"]] - np.array(e["h"])).max() < 1e-6


def test_track_and_eval_pipeline(tmp_path):
    simulate(tmp_path, extra={"duration_s": 40.0, "vehicle_count": 10})
    assert run(["track", "--detections", tmp_path / "detections.jsonl",
                "--algo", "kiou", "--out", tmp_path / "tracks.jsonl"]) == 0
    assert (tmp_path / "tracks.jsonl").exists()
    assert run(["eval", "--gt", tmp_path / "gt_tracks.jsonl",
                "--tracks", tmp_path / "tracks.jsonl",
                "--out", tmp_path / "report.json"]) == 0
    rep = iof.read_json(str(tmp_path / "report.json"))
    assert 0.0 <= rep["HOTA"] <= 1.0
    header, rows = iof.read_csv(str(tmp_path / "report.csv"))
    assert "HOTA" in header


def test_missing_input_file_exits_one(tmp_path):
    assert run(["track", "--detections", tmp_path / "absent.jsonl",
                "--algo", "sort", "--out", tmp_path / "tracks.jsonl"]) == 1


def test_malformed_input_exits_one(tmp_path):
    bad = tmp_path / "detections.jsonl"
    bad.write_text('{"t": 0.0}\n')  # missing required fields
    assert run(["track", "--detections", bad, "--algo", "sort",
                "--out", tmp_path / "tracks.jsonl"]) == 1


def test_invalid_config_exits_one(tmp_path):
    cfg = tmp_path / "scene.json"
    cfg.write_text(json.dumps({"duration_s": -5.0}))
    assert run(["simulate", "--config", cfg, "--out", tmp_path]) == 1


def test_data_invariant_violation_exits_two(tmp_path):
    gps = tmp_path / "gps.csv"
    gps.write_text("vehicle_id,t,x,y\nv1,0.0,1.0,0.0\nv1,0.13,2.0,0.0\n")
    ann = tmp_path / "annotations.csv"
    ann.write_text("vehicle_id,t,x,y,pole\nv1,0.05,1.5,0.0,0\n")
    assert run(["gps-correct", "--gps", gps, "--annotations", ann,
                "--out", tmp_path]) == 2


def test_report_empty_inputs_yield_valid_svg(tmp_path):
    assert run(["report", "--out", tmp_path]) == 0
    svgs = list(tmp_path.glob("*.svg"))
    assert svgs
    for p in svgs:
        root = ET.parse(p).getroot()
        assert root.tag.endswith("svg")
        assert "no data" in ET.tostring(root, encoding="unicode")


def test_report_drift_svg_labels_match_csv(tmp_path):
    simulate(tmp_path, extra={"duration_s": 120.0, "snapshot_interval_s": 10.0})
    assert run(["restim", "--points", tmp_path / "points.jsonl",
                "--reference", tmp_path / "reference.json",
                "--snapshots", tmp_path / "snapshots.jsonl",
                "--out", tmp_path]) == 0
    assert run(["report", "--drift", tmp_path / "drift.csv",
                "--out", tmp_path]) == 0
    header, rows = iof.read_csv(str(tmp_path / "drift_summary.csv"))
    svg = (tmp_path / "drift_means.svg").read_text()
    # every bar label in the figure is the exact string written to the CSV
    numeric = [c for row in rows for c in row[1:]]
    labeled = [v for v in numeric if v in svg]
    assert len(labeled) >= len(rows)  # at least the plotted column matches


def test_full_pipeline_rerun_byte_identical(tmp_path):
    manifest = {
        "out": str(tmp_path / "run"),
        "seed": 11,
        "scene": {"extent_ft": 1500.0, "vehicle_count": 6,
                  "duration_s": 30.0, "snapshot_interval_s": 10.0},
        "stages": ["simulate", "calibrate", "restim", "track",
                   "gps-correct", "eval", "report"],
        "track": {"algo": "kiou"},
    }
    mpath = tmp_path / "manifest.json"

    def execute(out):
        m = dict(manifest, out=str(out))
        mpath.write_text(json.dumps(m))
        assert run(["pipeline", "--manifest", mpath]) == 0

    execute(tmp_path / "run1")
    execute(tmp_path / "run2")
    names1 = sorted(os.listdir(tmp_path / "run1"))
    assert names1 == sorted(os.listdir(tmp_path / "run2"))
    for name in names1:
        assert filecmp.cmp(tmp_path / "run1" / name, tmp_path / "run2" / name,
                           shallow=False), name
