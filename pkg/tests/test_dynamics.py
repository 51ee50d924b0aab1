import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnplan.dynamics import (
    ActuatorState,
    ControlAction,
    VehicleParams,
    VehicleState,
    idle_longitudinal,
    longitudinal_accel,
    map_controls,
    step,
)
from nnplan.verify import euler_errors

P = VehicleParams()
unit = st.floats(-1.0, 1.0, allow_nan=False)


def test_derived_limits():
    assert P.u_v_min == pytest.approx(-7.309941520467836, abs=1e-12)
    assert P.u_v_max == pytest.approx(3.7537537537537538, abs=1e-12)
    assert P.front_extent == pytest.approx(1.8)
    assert P.rear_extent == pytest.approx(2.0)


def test_affine_endpoints_are_exact():
    assert longitudinal_accel(-1.0, P) == P.u_v_min
    assert longitudinal_accel(1.0, P) == P.u_v_max


def test_idle_maps_to_zero():
    a1 = idle_longitudinal(P)
    assert a1 == pytest.approx(0.321429, abs=1e-6)
    assert abs(longitudinal_accel(a1, P)) < 1e-12


def test_steering_rate_limit_from_rest():
    delta, _ = map_controls(ControlAction(1.0, 0.0), ActuatorState(0.0), P)
    assert delta == pytest.approx(2.0 * math.pi / 180.0)


def test_steering_magnitude_clamp():
    act = ActuatorState(P.delta_max)
    delta, _ = map_controls(ControlAction(1.0, 0.0), act, P)
    assert delta == P.delta_max


def test_straight_line_step():
    z = step(VehicleState(1.0, 2.0, 0.0, 10.0), 0.0, 2.0, P)
    assert z.y == 2.0 and z.phi == 0.0
    assert z.x == pytest.approx(2.0, abs=1e-15)
    assert z.v == pytest.approx(10.2, abs=1e-12)


def test_straight_line_exact_at_any_heading():
    z0 = VehicleState(-3.0, 4.0, 0.7, -2.5)
    z = step(z0, 0.0, 0.0, P)
    assert z.phi == z0.phi
    assert z.x == z0.x + P.T_s * (z0.v * math.cos(z0.phi))
    assert z.y == z0.y + P.T_s * (z0.v * math.sin(z0.phi))


def test_step_matches_slip_angle_form():
    z0 = VehicleState(0.3, -1.0, 0.4, 7.0)
    delta = 0.5
    z = step(z0, delta, -1.0, P)
    beta = math.atan(P.l_r * math.tan(delta) / P.wheelbase)
    assert z.x == pytest.approx(z0.x + P.T_s * z0.v * math.cos(z0.phi + beta) / math.cos(beta), abs=1e-12)
    assert z.y == pytest.approx(z0.y + P.T_s * z0.v * math.sin(z0.phi + beta) / math.cos(beta), abs=1e-12)
    assert z.phi == pytest.approx(z0.phi + P.T_s * z0.v * math.tan(delta) / P.wheelbase, abs=1e-12)


@settings(max_examples=200)
@given(st.lists(st.tuples(unit, unit), min_size=1, max_size=60), st.floats(-0.7, 0.7))
def test_rate_limit_property(actions, d0):
    act = ActuatorState(max(-P.delta_max, min(P.delta_max, d0)))
    for a0, a1 in actions:
        delta, u = map_controls(ControlAction(a0, a1), act, P)
        assert abs(delta - act.delta) <= P.delta_rate_max * P.T_s + 1e-12
        assert abs(delta) <= P.delta_max
        assert P.u_v_min <= u <= P.u_v_max
        act = ActuatorState(delta)


def test_control_action_is_clamped():
    a = ControlAction(3.0, -7.0).clamped()
    assert (a.a0, a.a1) == (1.0, -1.0)


def test_first_order_convergence():
    e = euler_errors()
    assert 8 <= e[0] / e[1] <= 12
    assert 8 <= e[1] / e[2] <= 12


@pytest.mark.parametrize("kw", [dict(l_f=0.0), dict(delta_max=2.0), dict(u_v_min=1.0), dict(T_s=0.0)])
def test_invalid_params_rejected(kw):
    with pytest.raises(ValueError):
        VehicleParams(**kw)
