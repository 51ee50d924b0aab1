import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnplan.dynamics import VehicleParams
from nnplan.geometry import (
    ObstaclePoint,
    Pose2,
    chassis_corners,
    collision,
    extrapolate,
    from_ev_frame,
    to_ev_frame,
)

P = VehicleParams()
coord = st.floats(-50, 50, allow_nan=False)
angle = st.floats(-math.pi, math.pi, allow_nan=False)


def polygon_contains(poly, q):
    """Independent strict point-in-convex-polygon test (winding by cross products)."""
    signs = []
    for i in range(len(poly)):
        (ax, ay), (bx, by) = poly[i], poly[(i + 1) % len(poly)]
        signs.append((bx - ax) * (q[1] - ay) - (by - ay) * (q[0] - ax))
    return all(s > 0 for s in signs) or all(s < 0 for s in signs)


def edge_distance(poly, q):
    d = math.inf
    for i in range(len(poly)):
        a, b = np.asarray(poly[i]), np.asarray(poly[(i + 1) % len(poly)])
        t = np.clip(np.dot(q - a, b - a) / np.dot(b - a, b - a), 0, 1)
        d = min(d, float(np.linalg.norm(q - (a + t * (b - a)))))
    return d


def test_frame_round_trip():
    pose = Pose2(3.0, -2.0, 1.1)
    q = (7.5, 4.25)
    back = from_ev_frame(pose, to_ev_frame(pose, q))
    assert back == pytest.approx(q, abs=1e-12)


def test_ev_frame_axes():
    pose = Pose2(1.0, 1.0, math.pi / 2)
    xi, eta = to_ev_frame(pose, (1.0, 3.0))
    assert xi == pytest.approx(2.0) and eta == pytest.approx(0.0, abs=1e-15)
    xi, eta = to_ev_frame(pose, (0.0, 1.0))
    assert xi == pytest.approx(0.0, abs=1e-15) and eta == pytest.approx(1.0)


def test_collision_examples():
    o = Pose2(0.0, 0.0, 0.0)
    assert collision(o, [(0.0, 0.0)], P)
    assert collision(o, [(1.79, 0.99)], P)
    assert collision(o, [(-1.99, -0.99)], P)
    assert not collision(o, [(1.8, 0.0)], P)  # on the front edge
    assert not collision(o, [(0.0, 1.0)], P)  # on the side edge
    assert not collision(o, [(-2.0, 0.0)], P)
    assert not collision(o, [], P)
    assert collision(Pose2(0, 0, math.pi / 2), [(0.0, 1.7)], P)
    assert not collision(Pose2(0, 0, math.pi / 2), [(1.5, 0.0)], P)


def test_collision_matches_polygon_oracle():
    rng = np.random.default_rng(2024)
    used = 0
    for _ in range(10_000):
        pose = Pose2(*rng.uniform(-20, 20, 2), rng.uniform(-math.pi, math.pi))
        q = np.array([pose.x, pose.y]) + rng.uniform(-4, 4, 2)
        poly = chassis_corners(pose, P)
        if edge_distance(poly, q) < 1e-9:
            continue
        used += 1
        assert collision(pose, [tuple(q)], P) == polygon_contains(poly, q)
    assert used > 9_900


@settings(max_examples=300)
@given(coord, coord, angle, coord, coord, angle, st.floats(-4, 4), st.floats(-3, 3))
def test_rigid_motion_invariance(px, py, pphi, gx, gy, gphi, bx, by):
    pose = Pose2(px, py, pphi)
    q = from_ev_frame(pose, (bx, by))
    # stay clear of the boundary where rounding decides
    if min(abs(bx - 1.8), abs(bx + 2.0), abs(abs(by) - 1.0)) < 1e-6:
        return
    g = Pose2(gx, gy, gphi)
    moved_pose = Pose2(*from_ev_frame(g, (px, py)), pphi + gphi)
    moved_q = from_ev_frame(g, q)
    assert collision(pose, [q], P) == collision(moved_pose, [moved_q], P)


def test_extrapolation_constant_velocity():
    pts = [ObstaclePoint(10.0, 0.0, math.pi, 5.0), ObstaclePoint(1.0, 2.0)]
    f = extrapolate(pts, 20, 0.1)
    assert f.positions.shape == (21, 2, 2)
    assert f.positions[10, 0] == pytest.approx([5.0, 0.0], abs=1e-12)
    assert np.all(f.positions[:, 1] == [1.0, 2.0])


@settings(max_examples=100)
@given(coord, coord, angle, st.floats(-20, 20), st.integers(1, 200))
def test_extrapolation_linearity(x, y, hd, sp, h):
    f = extrapolate([ObstaclePoint(x, y, hd, sp)], 200, 0.1)
    pos = f.positions[:, 0]
    np.testing.assert_allclose(pos[h] - pos[0], h * (pos[1] - pos[0]), rtol=1e-9, atol=1e-9)


def test_empty_field():
    f = extrapolate([], 5, 0.1)
    assert f.positions.shape == (6, 0, 2)
    assert not collision(Pose2(0, 0, 0), f.positions[3], P)
