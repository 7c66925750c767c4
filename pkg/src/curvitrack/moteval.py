"""Tracking evaluation on roadway-coordinate trajectories.

Ground truth is sparse (manual pole crossings interpolated onto a grid),
so there is no notion of a false positive outside the instants where a
ground-truth vehicle exists: detection accuracy is the FP-free DetA* =
TP / (TP + FN), and association accuracy is accumulated only over those
instants.  HOTA is the alpha-averaged sqrt(DetA* * AssA).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tracking import hungarian_match, iou_matrix

DEFAULT_STEP_S = 0.1
DEFAULT_MATCH_IOU = 0.1


@dataclass(frozen=True)
class EvalConfig:
    step_s: float = DEFAULT_STEP_S
    match_iou: float = DEFAULT_MATCH_IOU
    hota_alphas: tuple = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))
    x_clip: tuple = (0.0, 23000.0)


@dataclass(frozen=True)
class TrajectorySeries:
    """A trajectory sampled at increasing times with (x,y,l,w,h) boxes."""

    id: str
    times: np.ndarray
    boxes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "boxes",
                           np.asarray(self.boxes, dtype=float).reshape(-1, 5))


def series_from_tracklet(tracklet) -> TrajectorySeries:
    """Tracklet -> series with per-state dims replaced by the median."""
    boxes = np.asarray(tracklet.boxes, dtype=float).reshape(-1, 5)
    med = tracklet.median_dims
    boxes = boxes.copy()
    boxes[:, 2:5] = med
    return TrajectorySeries(str(tracklet.id), np.asarray(tracklet.times), boxes)


def resample(series: TrajectorySeries, times: np.ndarray) -> np.ndarray:
    """Interpolated (N,5) boxes at the requested times; rows outside the
    series' span are NaN (no extrapolation)."""
    times = np.asarray(times, dtype=float)
    out = np.full((len(times), 5), np.nan)
    if len(series.times) == 0:
        return out
    inside = (times >= series.times[0] - 1e-9) & (times <= series.times[-1] + 1e-9)
    for j in range(5):
        out[inside, j] = np.interp(times[inside], series.times, series.boxes[:, j])
    return out


def match_frame(gt_boxes: np.ndarray, tr_boxes: np.ndarray,
                min_iou: float) -> list[tuple[int, int, float]]:
    """Hungarian matching on 1 - IOU; returns (gt_idx, tr_idx, iou)."""
    if len(gt_boxes) == 0 or len(tr_boxes) == 0:
        return []
    iou = iou_matrix(gt_boxes, tr_boxes)
    cost = np.where(iou >= min_iou, 1.0 - iou, np.inf)
    pairs = hungarian_match(cost, 1.0 - min_iou)
    return [(g, t, float(iou[g, t])) for g, t in pairs]


@dataclass
class TrajectoryScore:
    gt_id: str
    instants: int
    matched: int
    ids: int
    lcss_t: float
    lcss_d: float
    motp_i: float | None
    motp_e: float | None

    @property
    def recall(self) -> float:
        return self.matched / self.instants if self.instants else 0.0


@dataclass
class EvalReport:
    hota: float
    det_a: float
    ass_a: float
    recall: float
    ids_per_gt: float
    lcss_t: float
    lcss_d: float
    motp_i: float
    motp_e: float
    td: float
    n_gt: int
    n_tracklets: int
    per_trajectory: list = field(default_factory=list)

    COLUMNS = ("HOTA", "DetA", "AssA", "Recall", "IDs/GT",
               "LCSS_t", "LCSS_d", "MOTP_i", "MOTP_e", "TD")

    def row(self) -> tuple:
        return (self.hota, self.det_a, self.ass_a, self.recall,
                self.ids_per_gt, self.lcss_t, self.lcss_d,
                self.motp_i, self.motp_e, self.td)

    def to_dict(self) -> dict:
        d = dict(zip(self.COLUMNS, self.row()))
        d["n_gt"] = self.n_gt
        d["n_tracklets"] = self.n_tracklets
        d["per_trajectory"] = [
            {"gt_id": s.gt_id, "instants": s.instants, "matched": s.matched,
             "recall": s.recall, "ids": s.ids, "lcss_t": s.lcss_t,
             "lcss_d": s.lcss_d, "motp_i": s.motp_i, "motp_e": s.motp_e}
            for s in self.per_trajectory]
        return d


def det_a_star(matched: int, gt_instants: int) -> float:
    """Detection accuracy without a false-positive term: TP / (TP + FN)."""
    return matched / gt_instants if gt_instants else 0.0


def lcss(seq: list, gt_x: np.ndarray, step: float) -> tuple[float, float]:
    """Public wrapper over the longest-consecutive-run computation."""
    return _lcss(seq, np.asarray(gt_x, dtype=float), step)


def _lcss(seq: list, gt_x: np.ndarray, step: float) -> tuple[float, float]:
    """Longest run of strictly consecutive instants matched to one id.

    Returns (duration seconds, longitudinal distance feet) of that run.
    """
    best_len, best_span = 0, (0, 0)
    run_len, run_start = 0, 0
    prev = None
    for i, tid in enumerate(seq):
        if tid is not None and tid == prev:
            run_len += 1
        elif tid is not None:
            run_len, run_start = 1, i
        else:
            run_len = 0
        prev = tid
        if run_len > best_len:
            best_len = run_len
            best_span = (run_start, i)
    if best_len == 0:
        return 0.0, 0.0
    i0, i1 = best_span
    return (i1 - i0) * step, float(abs(gt_x[i1] - gt_x[i0]))


def evaluate(gt_series: list, track_series: list,
             config: EvalConfig | None = None) -> EvalReport:
    cfg = config or EvalConfig()
    step = cfg.step_s
    gt_series = [s if isinstance(s, TrajectorySeries) else s for s in gt_series]
    tracks = [s if isinstance(s, TrajectorySeries)
              else series_from_tracklet(s) for s in track_series]

    td = (float(np.mean([s.times[-1] - s.times[0] for s in tracks]))
          if tracks else 0.0)

    if not gt_series:
        return EvalReport(0, 0, 0, 0, 0, 0, 0, 0, 0, td, 0, len(tracks))

    t_lo = min(s.times[0] for s in gt_series)
    t_hi = max(s.times[-1] for s in gt_series)
    k0, k1 = int(np.ceil(t_lo / step - 1e-9)), int(np.floor(t_hi / step + 1e-9))
    grid = np.arange(k0, k1 + 1) * step
    nf = len(grid)

    # sampled boxes: NaN rows mark absence
    gt_s = np.stack([resample(s, grid) for s in gt_series])      # (G,F,5)
    tr_s = (np.stack([resample(s, grid) for s in tracks])
            if tracks else np.zeros((0, nf, 5)))
    lo, hi = cfg.x_clip
    gt_present = (~np.isnan(gt_s[:, :, 0])) & (gt_s[:, :, 0] >= lo) & (gt_s[:, :, 0] <= hi)
    tr_present = ~np.isnan(tr_s[:, :, 0]) if tracks else np.zeros((0, nf), bool)

    n_gt, n_tr = len(gt_series), len(tracks)
    # per-frame IOU computed once, reused across alphas
    frame_ious = []
    for f in range(nf):
        gi = np.flatnonzero(gt_present[:, f])
        ti = np.flatnonzero(tr_present[:, f])
        if len(gi) and len(ti):
            frame_ious.append((gi, ti, iou_matrix(gt_s[gi, f], tr_s[ti, f])))
        else:
            frame_ious.append((gi, ti, None))

    def _match_all(alpha):
        """Per-frame Hungarian at IOU threshold alpha; yields (f, g, t, iou)."""
        out = []
        for f, (gi, ti, iou) in enumerate(frame_ious):
            if iou is None:
                continue
            cost = np.where(iou >= alpha, 1.0 - iou, np.inf)
            for r, c in hungarian_match(cost, 1.0 - alpha):
                out.append((f, int(gi[r]), int(ti[c]), float(iou[r, c])))
        return out

    total_gt = int(gt_present.sum())
    hotas, detas, assas = [], [], []
    matches_at_working = None
    for alpha in cfg.hota_alphas:
        matches = _match_all(alpha)
        tp = len(matches)
        deta = tp / total_gt if total_gt else 0.0
        if tp == 0:
            detas.append(deta)
            assas.append(0.0)
            hotas.append(0.0)
            if abs(alpha - cfg.match_iou) < 1e-9:
                matches_at_working = matches
            continue
        # association counts over instants where the gt exists
        tpa = np.zeros((n_gt, n_tr))
        pr_matched = np.zeros(n_tr)
        gt_matched_frames = np.zeros(n_gt)
        for _, g, t, _ in matches:
            tpa[g, t] += 1
            pr_matched[t] += 1
            gt_matched_frames[g] += 1
        gt_count = gt_present.sum(axis=1).astype(float)
        acc = 0.0
        for _, g, t, _ in matches:
            fna = gt_count[g] - tpa[g, t]
            fpa = pr_matched[t] - tpa[g, t]
            acc += tpa[g, t] / (tpa[g, t] + fna + fpa)
        assa = acc / tp
        detas.append(deta)
        assas.append(assa)
        hotas.append(float(np.sqrt(deta * assa)))
        if abs(alpha - cfg.match_iou) < 1e-9:
            matches_at_working = matches
    if matches_at_working is None:
        matches_at_working = _match_all(cfg.match_iou)

    # per-trajectory statistics at the working threshold
    per_frame_id = [[None] * nf for _ in range(n_gt)]
    ious_by_gt = [[] for _ in range(n_gt)]
    dists_by_gt = [[] for _ in range(n_gt)]
    for f, g, t, iou in matches_at_working:
        per_frame_id[g][f] = tracks[t].id
        ious_by_gt[g].append(iou)
        d = np.linalg.norm(gt_s[g, f, :2] - tr_s[t, f, :2])
        dists_by_gt[g].append(float(d))

    scores = []
    for g, series in enumerate(gt_series):
        frames = np.flatnonzero(gt_present[g])
        seq = [per_frame_id[g][f] for f in frames]
        lcss_t, lcss_d = _lcss(seq, gt_s[g, frames, 0], step)
        matched = sum(1 for s in seq if s is not None)
        ids = len({s for s in seq if s is not None})
        motp_i = float(np.mean(ious_by_gt[g])) if ious_by_gt[g] else None
        motp_e = float(np.mean(dists_by_gt[g])) if dists_by_gt[g] else None
        scores.append(TrajectoryScore(series.id, len(frames), matched, ids,
                                      lcss_t, lcss_d, motp_i, motp_e))

    recall = (sum(s.matched for s in scores) / total_gt) if total_gt else 0.0
    with_match = [s for s in scores if s.matched > 0]
    report = EvalReport(
        hota=float(np.mean(hotas)),
        det_a=float(np.mean(detas)),
        ass_a=float(np.mean(assas)),
        recall=recall,
        ids_per_gt=float(np.mean([s.ids for s in scores])),
        lcss_t=float(np.mean([s.lcss_t for s in with_match])) if with_match else 0.0,
        lcss_d=float(np.mean([s.lcss_d for s in with_match])) if with_match else 0.0,
        motp_i=float(np.mean([s.motp_i for s in with_match])) if with_match else 0.0,
        motp_e=float(np.mean([s.motp_e for s in with_match])) if with_match else 0.0,
        td=td,
        n_gt=n_gt,
        n_tracklets=n_tr,
        per_trajectory=scores,
    )
    return report
