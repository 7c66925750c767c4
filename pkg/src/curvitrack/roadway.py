"""Curvilinear roadway coordinate system.

The centerline is an arc-length-parameterized quadratic spline fit midway
between the two interior yellow lines; boxes convert between state-plane
and roadway coordinates (x along the centerline, y lateral with the
eastbound side positive).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import interpolate, optimize
from scipy.spatial import cKDTree

from .errors import AmbiguousMedian, NonMonotonic, OutOfExtent, TooShort
from .geometry import Prism3D, StatePlanePoint

KNOT_SPACING_FT = 200.0
GAMMA_SPACING_FT = 5.0
MIN_SPAN_FT = 400.0
YELLOW_LINE_Y = 12.0  # desired constant |y| of each yellow line post-shift
MEDIAN_AMBIGUITY_FT = 0.5
SEED_WINDOW_FT = 300.0


@dataclass(frozen=True)
class RoadwayBox:
    """Box in roadway coordinates: back-bottom-center reference point."""

    x: float
    y: float
    l: float = 0.0
    w: float = 0.0
    h: float = 0.0

    def __post_init__(self):
        if self.l < 0 or self.w < 0 or self.h < 0:
            raise ValueError("box dimensions must be non-negative")

    @property
    def direction(self) -> str:
        return "WB" if self.y < 0 else "EB"


class RoadwaySpline:
    """Arc-length centerline spline plus per-side yellow-line offset table."""

    def __init__(self, tck_x, tck_y, tck_inv, gamma_grid, gamma_eb, gamma_wb,
                 extent, eb_sign):
        self._tck_x = tck_x
        self._tck_y = tck_y
        self._tck_inv = tck_inv
        self.gamma_grid = np.asarray(gamma_grid, dtype=float)
        self.gamma_eb = np.asarray(gamma_eb, dtype=float)
        self.gamma_wb = np.asarray(gamma_wb, dtype=float)
        self.extent = (float(extent[0]), float(extent[1]))
        self.eb_sign = int(eb_sign)

    # -- evaluation ---------------------------------------------------------

    def point(self, s):
        return np.stack([interpolate.splev(s, self._tck_x),
                         interpolate.splev(s, self._tck_y)], axis=-1)

    def tangent(self, s):
        d = np.stack([interpolate.splev(s, self._tck_x, der=1),
                      interpolate.splev(s, self._tck_y, der=1)], axis=-1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def normal(self, s):
        """Unit lateral direction; positive side is eastbound."""
        t = self.tangent(s)
        n = np.stack([-t[..., 1], t[..., 0]], axis=-1)
        return self.eb_sign * n

    def inverse_hint(self, x_st: float) -> float:
        s = float(interpolate.splev(x_st, self._tck_inv))
        return float(np.clip(s, self.extent[0], self.extent[1]))

    def gamma(self, s: float, direction: str) -> float:
        """Signed yellow-line y-coordinate at arc position s (nearest sample)."""
        idx = int(np.clip(np.round((s - self.gamma_grid[0]) / GAMMA_SPACING_FT),
                          0, len(self.gamma_grid) - 1))
        if direction == "EB":
            return float(self.gamma_eb[idx])
        return float(-self.gamma_wb[idx])

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        def pack(tck):
            return {"t": list(map(float, tck[0])),
                    "c": list(map(float, tck[1])),
                    "k": int(tck[2])}
        return {
            "centerline_x": pack(self._tck_x),
            "centerline_y": pack(self._tck_y),
            "inverse_hint": pack(self._tck_inv),
            "gamma_grid": self.gamma_grid.tolist(),
            "gamma_eb": self.gamma_eb.tolist(),
            "gamma_wb": self.gamma_wb.tolist(),
            "extent": list(self.extent),
            "eb_sign": self.eb_sign,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoadwaySpline":
        def unpack(obj):
            return (np.array(obj["t"]), np.array(obj["c"]), int(obj["k"]))
        return cls(unpack(d["centerline_x"]), unpack(d["centerline_y"]),
                   unpack(d["inverse_hint"]), d["gamma_grid"], d["gamma_eb"],
                   d["gamma_wb"], d["extent"], d["eb_sign"])


def _as_xy(points) -> np.ndarray:
    if len(points) and isinstance(points[0], StatePlanePoint):
        return np.array([[p.x, p.y] for p in points], dtype=float)
    return np.asarray(points, dtype=float)[:, :2]


def _fit_param_spline(xy: np.ndarray, spacing: float = KNOT_SPACING_FT):
    """Quadratic least-squares splines x(u), y(u) with chord parameter u."""
    seg = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    keep = np.concatenate([[True], seg > 1e-9])
    xy = xy[keep]
    seg = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    u = np.concatenate([[0.0], np.cumsum(seg)])
    knots = np.arange(spacing, u[-1] - spacing / 2.0, spacing)
    tck_x = interpolate.splrep(u, xy[:, 0], k=2, task=-1, t=knots)
    tck_y = interpolate.splrep(u, xy[:, 1], k=2, task=-1, t=knots)
    return tck_x, tck_y, u[-1]


def _sample(tck_x, tck_y, umax: float, step: float) -> np.ndarray:
    u = np.arange(0.0, umax + step / 2.0, step)
    return np.stack([interpolate.splev(u, tck_x), interpolate.splev(u, tck_y)], axis=1)


def fit_centerline(yellow_eb, yellow_wb) -> RoadwaySpline:
    """Build the roadway frame from labeled yellow-line points.

    Fits a spline per side, takes midpoints from fine EB samples to the
    nearest WB point, fits a median spline, reparameterizes it by cumulative
    arc length, and samples the per-side gamma offset table.
    """
    sides = {}
    for name, pts in (("EB", yellow_eb), ("WB", yellow_wb)):
        xy = _as_xy(pts)
        if xy.shape[0] < 3:
            raise TooShort(f"{name} yellow line needs >= 3 points")
        if np.any(np.diff(xy[:, 0]) <= 0):
            raise NonMonotonic(f"{name} yellow line x must be strictly increasing")
        span = float(np.linalg.norm(np.diff(xy, axis=0), axis=1).sum())
        if span < MIN_SPAN_FT:
            raise TooShort(f"{name} yellow line spans {span:.0f} ft < {MIN_SPAN_FT:.0f}")
        sides[name] = _fit_param_spline(xy)

    eb_x, eb_y, eb_umax = sides["EB"]
    wb_x, wb_y, wb_umax = sides["WB"]
    eb_pts = _sample(eb_x, eb_y, eb_umax, 1.0)
    wb_pts = _sample(wb_x, wb_y, wb_umax, 1.0)
    mid = (eb_pts + wb_pts[cKDTree(wb_pts).query(eb_pts)[1]]) / 2.0

    med_x, med_y, med_umax = _fit_param_spline(mid)
    fine = _sample(med_x, med_y, med_umax, 0.1)
    seg = np.linalg.norm(np.diff(fine, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])

    knots = np.arange(KNOT_SPACING_FT, s[-1] - KNOT_SPACING_FT / 2.0, KNOT_SPACING_FT)
    tck_x = interpolate.splrep(s, fine[:, 0], k=2, task=-1, t=knots)
    tck_y = interpolate.splrep(s, fine[:, 1], k=2, task=-1, t=knots)

    x_st = fine[:, 0]
    if np.any(np.diff(x_st) <= 0):
        raise NonMonotonic("centerline x^(st) must be strictly increasing")
    inv_knots = x_st[0] + np.arange(
        KNOT_SPACING_FT, (x_st[-1] - x_st[0]) - KNOT_SPACING_FT / 2.0, KNOT_SPACING_FT)
    tck_inv = interpolate.splrep(x_st, s, k=2, task=-1, t=inv_knots)

    extent = (0.0, float(s[-1]))
    spline = RoadwaySpline(tck_x, tck_y, tck_inv, [0.0], [0.0], [0.0], extent, 1)

    # Orient the normal toward the EB yellow line.
    s_mid = s[-1] / 2.0
    p_mid = spline.point(s_mid)
    n0 = spline.normal(s_mid)
    nearest_eb = eb_pts[cKDTree(eb_pts).query(p_mid[None, :])[1][0]]
    if float((nearest_eb - p_mid) @ n0) < 0:
        spline.eb_sign = -1

    # Gamma offset table at 5 ft sampling.
    grid = np.arange(0.0, s[-1] + GAMMA_SPACING_FT / 2.0, GAMMA_SPACING_FT)
    center = spline.point(grid)
    eb_tree, wb_tree = cKDTree(eb_pts), cKDTree(wb_pts)
    spline.gamma_grid = grid
    spline.gamma_eb = eb_tree.query(center)[0]
    spline.gamma_wb = wb_tree.query(center)[0]
    return spline


# ---------------------------------------------------------------------------
# conversions

_BACK = (0, 1, 2, 3)
_FRONT = (4, 5, 6, 7)
_LEFTS = (0, 2, 4, 6)
_RIGHTS = (1, 3, 5, 7)
_BOTTOMS = (0, 1, 4, 5)
_TOPS = (2, 3, 6, 7)


def _nearest_arc(spline: RoadwaySpline, p: np.ndarray) -> float:
    """Arc coordinate of the closest centerline point, seeded by the hint."""
    s0 = spline.inverse_hint(p[0])
    lo = max(spline.extent[0], s0 - SEED_WINDOW_FT)
    hi = min(spline.extent[1], s0 + SEED_WINDOW_FT)

    def dist(s):
        return float(np.linalg.norm(spline.point(s) - p))

    res = optimize.minimize_scalar(dist, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-5})
    s = float(res.x)
    eps = 1e-3
    if s - spline.extent[0] < eps or spline.extent[1] - s < eps:
        raise OutOfExtent(f"nearest centerline point at s={s:.1f} is an endpoint")
    return s


def world_to_roadway(spline: RoadwaySpline, prism: Prism3D,
                     yellow_shift: bool = True) -> RoadwayBox:
    """Convert a state-plane prism to a roadway box.

    Dimensions are mean opposing-corner distances; x is the arc coordinate
    of the closest centerline point to the back-bottom-center; y is the
    signed lateral distance, then shifted by the constant-yellow-line rule.
    """
    c = prism.corners
    length = float(np.mean(np.linalg.norm(
        c[list(_FRONT), :2] - c[list(_BACK), :2], axis=1)))
    width = float(np.mean(np.linalg.norm(
        c[list(_RIGHTS), :2] - c[list(_LEFTS), :2], axis=1)))
    height = float(np.mean(c[list(_TOPS), 2] - c[list(_BOTTOMS), 2]))
    o_c = prism.back_bottom_center[:2]

    s = _nearest_arc(spline, o_c)
    d = o_c - spline.point(s)
    y = float(d @ spline.normal(s))
    if yellow_shift:
        if abs(y) < MEDIAN_AMBIGUITY_FT:
            raise AmbiguousMedian(f"|y|={abs(y):.3f} ft too close to the median")
        direction = "EB" if y > 0 else "WB"
        c_target = YELLOW_LINE_Y if direction == "EB" else -YELLOW_LINE_Y
        y += c_target - spline.gamma(s, direction)
    return RoadwayBox(s, y, length, width, height)


def roadway_to_world(spline: RoadwaySpline, box: RoadwayBox,
                     yellow_shift: bool = True) -> Prism3D:
    """Convert a roadway box back to a state-plane prism.

    The inverse yellow-line shift is applied first; corners are built from
    the unit tangent and the EB-positive unit normal, with the front offset
    negated for westbound boxes.
    """
    if not (spline.extent[0] <= box.x <= spline.extent[1]):
        raise OutOfExtent(f"x={box.x:.1f} outside extent {spline.extent}")
    y = box.y
    direction = box.direction
    if yellow_shift:
        c_target = YELLOW_LINE_Y if direction == "EB" else -YELLOW_LINE_Y
        y -= c_target - spline.gamma(box.x, direction)

    u_f = spline.tangent(box.x)
    u_perp = spline.normal(box.x)
    sign = 1.0 if direction == "EB" else -1.0
    o_c = spline.point(box.x) + y * u_perp

    left = -sign * u_perp
    front = sign * box.l * u_f
    bbl = o_c + (box.w / 2.0) * left
    bbr = o_c - (box.w / 2.0) * left
    corners = np.zeros((8, 3))
    corners[0, :2] = bbl
    corners[1, :2] = bbr
    corners[4, :2] = bbl + front
    corners[5, :2] = bbr + front
    corners[2, :2] = bbl
    corners[3, :2] = bbr
    corners[6, :2] = bbl + front
    corners[7, :2] = bbr + front
    corners[list(_TOPS), 2] = box.h
    return Prism3D(corners)


def point_prism(p: StatePlanePoint) -> Prism3D:
    """Zero-size prism wrapping a single ground-plane point."""
    c = np.tile([p.x, p.y, 0.0], (8, 1))
    return Prism3D(c)
