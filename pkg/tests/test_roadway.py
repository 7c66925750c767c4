import numpy as np
import pytest

from curvitrack import roadway as rw
from curvitrack.errors import AmbiguousMedian, NonMonotonic, OutOfExtent, TooShort
from curvitrack.geometry import Prism3D, StatePlanePoint
from curvitrack.roadway import RoadwayBox, fit_centerline, point_prism


def straight_road(length=3000.0, gamma=24.0):
    xs = np.arange(0.0, length + 1, 20.0)
    eb = np.column_stack([xs, np.full_like(xs, gamma)])
    wb = np.column_stack([xs, np.full_like(xs, -gamma)])
    return fit_centerline(eb, wb)


def arc_road(radius=20000.0, length=3000.0, gamma=24.0):
    """Gentle circular arc; centerline arc length is known analytically."""
    theta = np.arange(0.0, length / radius, 20.0 / radius)
    cx, cy = 0.0, radius
    out = {}
    for name, r in (("EB", radius - gamma), ("WB", radius + gamma)):
        out[name] = np.column_stack([cx + r * np.sin(theta),
                                     cy - r * np.cos(theta)])
    return fit_centerline(out["EB"], out["WB"]), radius, theta


# ---------------------------------------------------------------------------
# fitting

def test_straight_centerline_is_y_zero():
    sp = straight_road()
    s = np.linspace(100.0, sp.extent[1] - 100.0, 25)
    pts = sp.point(s)
    assert np.abs(pts[:, 1]).max() < 1e-6


def test_straight_arc_length_equals_x():
    sp = straight_road()
    for s in (100.0, 500.0, 1500.0, 2500.0):
        assert sp.point(s)[0] == pytest.approx(s + sp.point(0.0)[0], abs=1e-3)


def test_straight_gamma_is_constant():
    sp = straight_road(gamma=24.0)
    for s in (50.0, 1000.0, 2800.0):
        assert sp.gamma(s, "EB") == pytest.approx(24.0, abs=1e-3)
        assert sp.gamma(s, "WB") == pytest.approx(-24.0, abs=1e-3)


def test_arc_length_matches_circle_formula():
    sp, radius, theta = arc_road()
    # Points at known fractions of the arc: s should match R * theta.
    for frac in (0.2, 0.5, 0.8):
        th = theta[-1] * frac
        p = np.array([radius * np.sin(th), radius - radius * np.cos(th)])
        s = rw._nearest_arc(sp, p)
        assert s == pytest.approx(radius * th, rel=1e-3)


def test_too_short_raises():
    xs = np.arange(0.0, 100.0, 20.0)
    eb = np.column_stack([xs, np.full_like(xs, 24.0)])
    wb = np.column_stack([xs, np.full_like(xs, -24.0)])
    with pytest.raises(TooShort):
        fit_centerline(eb, wb)


def test_non_monotonic_raises():
    xs = np.arange(0.0, 3000.0, 20.0)
    eb = np.column_stack([xs, np.full_like(xs, 24.0)])
    eb[10, 0] = eb[9, 0] - 5.0
    wb = np.column_stack([xs, np.full_like(xs, -24.0)])
    with pytest.raises(NonMonotonic):
        fit_centerline(eb, wb)


# ---------------------------------------------------------------------------
# coordinate conversion

def test_shift_example_lane_offset():
    # gamma = 24, target +12: a point at raw lateral 18 lands at 18 + (12-24) = 6
    sp = straight_road(gamma=24.0)
    box = rw.world_to_roadway(sp, point_prism(StatePlanePoint(1500.0, 18.0, 0.0)))
    assert box.y == pytest.approx(6.0, abs=1e-2)


def test_centerline_point_without_shift_is_zero():
    sp = straight_road()
    p = sp.point(1200.0)
    box = rw.world_to_roadway(sp, point_prism(StatePlanePoint(p[0], p[1], 0.0)),
                              yellow_shift=False)
    assert abs(box.y) < 1e-4


def test_yellow_line_points_map_to_twelve():
    sp = straight_road(gamma=24.0)
    for y_raw, want in ((24.0, 12.0), (-24.0, -12.0)):
        box = rw.world_to_roadway(sp, point_prism(StatePlanePoint(900.0, y_raw, 0.0)))
        assert box.y == pytest.approx(want, abs=1e-2)


def test_direction_follows_sign_of_y():
    assert RoadwayBox(10.0, 5.0).direction == "EB"
    assert RoadwayBox(10.0, -5.0).direction == "WB"


def test_ambiguous_median_raises():
    sp = straight_road()
    with pytest.raises(AmbiguousMedian):
        rw.world_to_roadway(sp, point_prism(StatePlanePoint(900.0, 0.2, 0.0)))


def test_out_of_extent_raises():
    sp = straight_road()
    with pytest.raises(OutOfExtent):
        rw.roadway_to_world(sp, RoadwayBox(sp.extent[1] + 500.0, 6.0))


def round_trip(sp, box):
    prism = rw.roadway_to_world(sp, box)
    back = rw.world_to_roadway(sp, prism)
    for attr in ("x", "y", "l", "w", "h"):
        assert getattr(back, attr) == pytest.approx(getattr(box, attr), abs=1e-3)


def test_round_trip_straight():
    sp = straight_road()
    for box in (RoadwayBox(500.0, 6.0, 16.0, 6.0, 5.0),
                RoadwayBox(1500.0, -18.0, 70.0, 8.5, 13.0),
                RoadwayBox(2400.0, 30.0, 14.0, 6.0, 5.0)):
        round_trip(sp, box)


def test_round_trip_arc():
    sp, _, _ = arc_road()
    for box in (RoadwayBox(600.0, 6.0, 16.0, 6.0, 5.0),
                RoadwayBox(1800.0, -18.0, 70.0, 8.5, 13.0)):
        round_trip(sp, box)


def test_eastbound_corner_expansion_by_hand():
    # On a straight road the corners are axis-aligned and easily written out.
    sp = straight_road(gamma=24.0)
    box = RoadwayBox(1000.0, 6.0, 16.0, 6.0, 5.0)
    prism = rw.roadway_to_world(sp, box, yellow_shift=False)
    x0 = sp.point(0.0)[0]
    c = prism.corners
    # back-bottom-center at (x0 + 1000, 6); front extends +x for EB
    assert np.allclose(c[0, :2], [x0 + 1000.0, 3.0], atol=1e-3)   # bbl
    assert np.allclose(c[1, :2], [x0 + 1000.0, 9.0], atol=1e-3)   # bbr
    assert np.allclose(c[4, :2], [x0 + 1016.0, 3.0], atol=1e-3)   # fbl
    assert np.allclose(c[5, :2], [x0 + 1016.0, 9.0], atol=1e-3)   # fbr
    assert np.allclose(c[[2, 3, 6, 7], 2], 5.0)
    assert np.allclose(c[[0, 1, 4, 5], 2], 0.0)


def test_westbound_front_extends_negative_x():
    sp = straight_road()
    box = RoadwayBox(1000.0, -18.0, 20.0, 6.0, 5.0)
    prism = rw.roadway_to_world(sp, box)
    c = prism.corners
    assert (c[4:8, 0] < c[0:4, 0]).all()


def test_spline_serialization_round_trip():
    sp = straight_road()
    sp2 = rw.RoadwaySpline.from_dict(sp.to_dict())
    s = np.linspace(100.0, sp.extent[1] - 100.0, 10)
    assert np.allclose(sp.point(s), sp2.point(s), atol=1e-9)
    assert sp2.extent == sp.extent
    assert sp2.gamma(1000.0, "EB") == sp.gamma(1000.0, "EB")
