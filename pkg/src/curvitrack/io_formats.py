"""On-disk formats: JSON-lines streams, CSV tables, JSON documents.

All writers are atomic (temp file in the destination directory, then
rename), so a crashed run never leaves a half-written artifact.  Readers
raise MalformedInput naming the file and the offending record.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile

import numpy as np

from .errors import CurvitrackError


class MalformedInput(CurvitrackError):
    """Unparseable or schema-violating input file (CLI exit code 1)."""


def fmt(v) -> str:
    """Canonical scalar formatting shared by CSV tables and SVG labels."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest repr; round-trips exactly
    return str(v)


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path: str, records) -> None:
    atomic_write(path, "".join(json.dumps(r) + "\n" for r in records))


def read_jsonl(path: str) -> list:
    out = []
    with open(path) as f:
        for i, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise MalformedInput(f"{path}: line {i}: {e}") from e
    return out


def write_json(path: str, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=1) + "\n")


def read_json(path: str):
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise MalformedInput(f"{path}: {e}") from e


def write_csv(path: str, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path: str) -> tuple[list, list]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        rows = list(reader)
    if not rows:
        raise MalformedInput(f"{path}: empty CSV")
    return rows[0], rows[1:]


def _require(record: dict, keys, path: str, where: str) -> None:
    missing = [k for k in keys if k not in record]
    if missing:
        raise MalformedInput(f"{path}: {where}: missing fields {missing}")


# --- correspondence points --------------------------------------------------

def write_points(path: str, points) -> None:
    """points: iterable of dicts {id, camera, direction, im: [u,v], st: [x,y]}."""
    write_jsonl(path, points)


def read_points(path: str) -> list[dict]:
    records = read_jsonl(path)
    for i, r in enumerate(records, start=1):
        _require(r, ("id", "camera", "direction", "im", "st"), path, f"record {i}")
    return records


# --- homographies & timelines -----------------------------------------------

def h_to_list(h: np.ndarray) -> list:
    return np.asarray(h, dtype=float).reshape(3, 3).tolist()


def write_homographies(path: str, entries) -> None:
    """entries: [{camera, direction, h: 3x3}, ...]"""
    write_json(path, list(entries))


def read_homographies(path: str) -> list[dict]:
    entries = read_json(path)
    if not isinstance(entries, list):
        raise MalformedInput(f"{path}: expected a JSON list")
    for i, r in enumerate(entries, start=1):
        _require(r, ("camera", "h"), path, f"entry {i}")
        a = np.asarray(r["h"], dtype=float)
        if a.shape != (3, 3):
            raise MalformedInput(f"{path}: entry {i}: h is not 3x3")
    return entries


def write_timeline(path: str, doc: dict) -> None:
    write_json(path, doc)


def read_timeline(path: str) -> dict:
    doc = read_json(path)
    _require(doc, ("camera", "reference", "instants"), path, "document")
    return doc


# --- snapshots ----------------------------------------------------------------

def write_snapshots(path: str, snapshots) -> None:
    """snapshots: [{epoch, camera, direction, points: [{id, im: [u,v]}]}]"""
    write_jsonl(path, snapshots)


def read_snapshots(path: str) -> list[dict]:
    records = read_jsonl(path)
    for i, r in enumerate(records, start=1):
        _require(r, ("epoch", "camera", "points"), path, f"record {i}")
        for p in r["points"]:
            _require(p, ("id", "im"), path, f"record {i}")
    return records


# --- detections / tracklets / trajectories ------------------------------------

def write_detections(path: str, detections) -> None:
    write_jsonl(path, ({"t": d.t, "camera": d.camera,
                        "box": [float(b) for b in d.box],
                        "class": d.cls, "conf": d.conf} for d in detections))


def read_detections(path: str) -> list[dict]:
    records = read_jsonl(path)
    for i, r in enumerate(records, start=1):
        _require(r, ("t", "box", "conf"), path, f"record {i}")
        if len(r["box"]) != 5:
            raise MalformedInput(f"{path}: record {i}: box must have 5 fields")
    return records


def write_tracklets(path: str, tracklets) -> None:
    """One row per state plus a sidecar of per-tracklet median dimensions."""
    rows = []
    dims = {}
    for tl in tracklets:
        dims[str(tl.id)] = [float(v) for v in tl.median_dims]
        for t, box in zip(tl.times, tl.boxes):
            rows.append({"id": tl.id, "t": t, "box": [float(b) for b in box]})
    write_jsonl(path, rows)
    write_json(_sidecar(path), dims)


def _sidecar(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".dims.json"


def read_tracklets(path: str):
    from .tracking import Tracklet

    records = read_jsonl(path)
    dims_path = _sidecar(path)
    dims = read_json(dims_path) if os.path.exists(dims_path) else {}
    by_id: dict = {}
    for i, r in enumerate(records, start=1):
        _require(r, ("id", "t", "box"), path, f"record {i}")
        tl = by_id.setdefault(r["id"], Tracklet(r["id"]))
        tl.times.append(float(r["t"]))
        tl.boxes.append(tuple(float(b) for b in r["box"]))
    for tid, tl in by_id.items():
        order = np.argsort(tl.times)
        tl.times = [tl.times[i] for i in order]
        tl.boxes = [tl.boxes[i] for i in order]
        d = dims.get(str(tid))
        tl.dims_reported = [tuple(d)] if d else [tuple(tl.boxes[0][2:5])]
        tl.status = "terminated"
    return [by_id[k] for k in sorted(by_id)]


def write_gt_tracks(path: str, tracks) -> None:
    """tracks: objects with vehicle_id, times, x, y, dims."""
    rows = []
    for tr in tracks:
        l, w, h = tr.dims
        for t, x, y in zip(tr.times, tr.x, tr.y):
            rows.append({"id": tr.vehicle_id, "t": float(t),
                         "box": [float(x), float(y), l, w, h]})
    write_jsonl(path, rows)


def read_gt_series(path: str):
    from .moteval import TrajectorySeries

    records = read_jsonl(path)
    by_id: dict = {}
    for i, r in enumerate(records, start=1):
        _require(r, ("id", "t", "box"), path, f"record {i}")
        by_id.setdefault(str(r["id"]), []).append((float(r["t"]), r["box"]))
    series = []
    for sid in sorted(by_id):
        items = sorted(by_id[sid])
        times = np.array([t for t, _ in items])
        boxes = np.array([b for _, b in items], dtype=float)
        series.append(TrajectorySeries(sid, times, boxes))
    return series


# --- GPS & annotations ---------------------------------------------------------

def write_gps(path: str, traces) -> None:
    rows = []
    for tr in traces:
        for t, x, y in zip(tr.times, tr.x, tr.y):
            rows.append((tr.vehicle_id, t, x, y))
    write_csv(path, ("vehicle_id", "t", "x", "y"), rows)


def read_gps(path: str):
    from .gps import GpsTrace

    header, rows = read_csv(path)
    if header[:4] != ["vehicle_id", "t", "x", "y"]:
        raise MalformedInput(f"{path}: unexpected header {header}")
    by_id: dict = {}
    for i, row in enumerate(rows, start=2):
        try:
            by_id.setdefault(row[0], []).append(
                (float(row[1]), float(row[2]), float(row[3])))
        except (ValueError, IndexError) as e:
            raise MalformedInput(f"{path}: line {i}: {e}") from e
    traces = []
    for vid in sorted(by_id):
        items = sorted(by_id[vid])
        traces.append(GpsTrace(vid,
                               np.array([a for a, _, _ in items]),
                               np.array([b for _, b, _ in items]),
                               np.array([c for _, _, c in items])))
    return traces


def write_annotations(path: str, annotations) -> None:
    rows = [(a.vehicle_id, a.epoch, a.x, a.y, a.pole) for a in annotations]
    write_csv(path, ("vehicle_id", "t", "x", "y", "pole"), rows)


def read_annotations(path: str):
    from .gps import PoleAnnotation

    header, rows = read_csv(path)
    if header[:5] != ["vehicle_id", "t", "x", "y", "pole"]:
        raise MalformedInput(f"{path}: unexpected header {header}")
    out = []
    for i, row in enumerate(rows, start=2):
        try:
            out.append(PoleAnnotation(row[0], float(row[1]), float(row[2]),
                                      float(row[3]), int(row[4])))
        except (ValueError, IndexError) as e:
            raise MalformedInput(f"{path}: line {i}: {e}") from e
    return out
