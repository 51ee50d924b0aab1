"""Kinematic bicycle model with 4 states and 2 normalized controls.

States are ``(x, y, phi, v)``; controls are the network outputs ``a0`` (steering)
and ``a1`` (longitudinal), both in ``[-1, 1]``. Integration is explicit Euler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class VehicleParams:
    l_f: float = 1.1
    l_r: float = 1.4
    delta_max: float = 40.0 * math.pi / 180.0
    delta_rate_max: float = 20.0 * math.pi / 180.0
    u_v_min: float = -100.0 / (3.8 * 3.6)
    u_v_max: float = 100.0 / (7.4 * 3.6)
    overhang_front: float = 0.7
    overhang_rear: float = 0.6
    half_width: float = 1.0
    T_s: float = 0.1

    def __post_init__(self):
        if not (self.l_f > 0 and self.l_r > 0):
            raise ValueError("axle distances must be positive")
        if not (0 < self.delta_max < math.pi / 2):
            raise ValueError("delta_max must lie in (0, pi/2)")
        if self.delta_rate_max <= 0:
            raise ValueError("delta_rate_max must be positive")
        if not (self.u_v_min < 0 < self.u_v_max):
            raise ValueError("need u_v_min < 0 < u_v_max")
        if self.T_s <= 0:
            raise ValueError("T_s must be positive")

    @property
    def wheelbase(self) -> float:
        return self.l_f + self.l_r

    @property
    def front_extent(self) -> float:
        """Distance from CoG to the front bumper."""
        return self.l_f + self.overhang_front

    @property
    def rear_extent(self) -> float:
        """Distance from CoG to the rear bumper."""
        return self.l_r + self.overhang_rear


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    phi: float
    v: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.phi, self.v)


@dataclass(frozen=True)
class ControlAction:
    a0: float
    a1: float

    def clamped(self) -> "ControlAction":
        return ControlAction(_clamp(self.a0, -1.0, 1.0), _clamp(self.a1, -1.0, 1.0))


@dataclass(frozen=True)
class ActuatorState:
    delta: float = 0.0


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def longitudinal_accel(a1: float, p: VehicleParams) -> float:
    """Affine map from ``a1 in [-1, 1]`` to ``[u_v_min, u_v_max]``, exact at both ends."""
    return ((1.0 - a1) * p.u_v_min + (1.0 + a1) * p.u_v_max) / 2.0


def map_controls(a: ControlAction, act: ActuatorState, p: VehicleParams) -> tuple[float, float]:
    """Realized ``(delta, u_v)`` for a normalized action.

    The commanded angle ``delta_max * a0`` is first limited to one sampling
    interval of steering rate around the current actuator angle, then to the
    absolute steering limit.
    """
    a0 = _clamp(a.a0, -1.0, 1.0)
    a1 = _clamp(a.a1, -1.0, 1.0)
    step = p.delta_rate_max * p.T_s
    delta = _clamp(p.delta_max * a0, act.delta - step, act.delta + step)
    delta = _clamp(delta, -p.delta_max, p.delta_max)
    return delta, longitudinal_accel(a1, p)


def step(z: VehicleState, delta: float, u_v: float, p: VehicleParams) -> VehicleState:
    # cos(phi + beta) / cos(beta) == cos(phi) - sin(phi) * tan(beta), with
    # tan(beta) = l_r * tan(delta) / (l_f + l_r); avoids atan/cos per step.
    # The batched rollout kernel evaluates the identical expression order.
    L = p.l_f + p.l_r
    td = math.tan(delta)
    k = p.l_r * td / L
    c = math.cos(z.phi)
    s = math.sin(z.phi)
    v = z.v
    return VehicleState(
        z.x + p.T_s * (v * (c - s * k)),
        z.y + p.T_s * (v * (s + c * k)),
        z.phi + p.T_s * (v * td / L),
        v + p.T_s * u_v,
    )


def idle_longitudinal(p: VehicleParams) -> float:
    """Value of ``a1`` producing zero longitudinal acceleration."""
    return -(p.u_v_max + p.u_v_min) / (p.u_v_max - p.u_v_min)
