"""Vehicle-aligned frames, obstacle point extrapolation and chassis collision checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import VehicleParams


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    phi: float


@dataclass(frozen=True)
class ObstaclePoint:
    """Obstacle datum: planar position, heading and speed.

    A negative speed is equivalent to driving along ``heading + pi``.
    """

    xi: float
    eta: float
    heading: float = 0.0
    speed: float = 0.0

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.speed * math.cos(self.heading), self.speed * math.sin(self.heading))


@dataclass(frozen=True)
class ExtrapolatedField:
    """Constant-velocity obstacle positions for every prediction step.

    ``positions`` has shape ``(H + 1, N, 2)`` and is expressed in the frame of
    ``anchor``.
    """

    positions: np.ndarray
    anchor: Pose2
    H: int
    T_s: float

    @property
    def n_points(self) -> int:
        return self.positions.shape[1]

    def at(self, h: int) -> np.ndarray:
        return self.positions[h]


def to_ev_frame(anchor: Pose2, world_pt) -> tuple[float, float]:
    dx = world_pt[0] - anchor.x
    dy = world_pt[1] - anchor.y
    c = math.cos(anchor.phi)
    s = math.sin(anchor.phi)
    return (c * dx + s * dy, -s * dx + c * dy)


def from_ev_frame(anchor: Pose2, ev_pt) -> tuple[float, float]:
    c = math.cos(anchor.phi)
    s = math.sin(anchor.phi)
    return (anchor.x + c * ev_pt[0] - s * ev_pt[1], anchor.y + s * ev_pt[0] + c * ev_pt[1])


def extrapolate(points: Sequence[ObstaclePoint], H: int, T_s: float, anchor: Pose2 | None = None) -> ExtrapolatedField:
    if H < 0:
        raise ValueError("horizon must be non-negative")
    if anchor is None:
        anchor = Pose2(0.0, 0.0, 0.0)
    n = len(points)
    pos = np.empty((H + 1, n, 2))
    if n:
        p0 = np.array([[p.xi, p.eta] for p in points])
        vel = np.array([p.velocity for p in points])
        h = np.arange(H + 1, dtype=float)[:, None, None]
        pos[:] = p0[None] + (h * T_s) * vel[None]
    return ExtrapolatedField(pos, anchor, H, T_s)


def chassis_halfplanes(p: VehicleParams) -> tuple[np.ndarray, np.ndarray]:
    """Body-frame half-plane description ``A q < b`` of the chassis rectangle.

    Rows are ordered front, left, rear, right.
    """
    A = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    b = np.array([p.front_extent, p.half_width, p.rear_extent, p.half_width])
    return A, b


def chassis_corners(pose: Pose2, p: VehicleParams) -> np.ndarray:
    """World-frame chassis corners, counter-clockwise starting front-left."""
    body = [
        (p.front_extent, p.half_width),
        (-p.rear_extent, p.half_width),
        (-p.rear_extent, -p.half_width),
        (p.front_extent, -p.half_width),
    ]
    return np.array([from_ev_frame(pose, q) for q in body])


def collision(pose: Pose2, pts_at_h, p: VehicleParams) -> bool:
    """True iff some point lies strictly inside the chassis rectangle at ``pose``."""
    c = math.cos(pose.phi)
    s = math.sin(pose.phi)
    front = p.front_extent
    rear = p.rear_extent
    hw = p.half_width
    for px, py in pts_at_h:
        dx = px - pose.x
        dy = py - pose.y
        xi = c * dx + s * dy
        eta = -s * dx + c * dy
        if -rear < xi < front and -hw < eta < hw:
            return True
    return False
