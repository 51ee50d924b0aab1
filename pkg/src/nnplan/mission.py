"""Closed-loop mission harness: sense, pick a goal, plan, apply, log."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import ActuatorState, ControlAction, VehicleState, idle_longitudinal, map_controls, step
from .geometry import ObstaclePoint, Pose2, collision, extrapolate, from_ev_frame, to_ev_frame
from .planner import (
    GoalSetpoint,
    GoalTolerance,
    PlannerConfig,
    PlanningSnapshot,
    RolloutEngine,
    plan_step,
)
from .policy import MlpArchitecture, param_count, wrap_angle

log = logging.getLogger(__name__)

__all__ = [
    "GoalSetpoint", "Mission", "RangeField", "TickRecord", "SimulationLog", "MissionStats",
    "sense", "select_goal", "waypoint_reached", "run_mission", "stats", "collision_ticks",
]


@dataclass(frozen=True)
class RangeField:
    """Rectangular sensing region in the EV frame."""

    ahead: float = 30.0
    behind: float = 10.0
    half_width: float = 10.0

    def contains(self, xi: float, eta: float) -> bool:
        return -self.behind <= xi <= self.ahead and abs(eta) <= self.half_width


@dataclass(frozen=True)
class Mission:
    """Mission data. Obstacle points use world coordinates in ``xi``/``eta``.

    ``dynamic_points`` move at constant velocity from their t=0 position. When
    ``sense_dynamic`` is false they still exist in the world (and count for
    collision audits) but are never perceived.
    """

    initial_state: VehicleState
    waypoints: tuple[GoalSetpoint, ...]
    static_points: tuple[ObstaclePoint, ...] = ()
    dynamic_points: tuple[ObstaclePoint, ...] = ()
    range_field: RangeField = field(default_factory=RangeField)
    time_limit: float = 20.0
    sense_dynamic: bool = True

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("a mission needs at least one waypoint")
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        object.__setattr__(self, "static_points", tuple(self.static_points))
        object.__setattr__(self, "dynamic_points", tuple(self.dynamic_points))

    def moving_points(self, t: int, T_s: float) -> list[ObstaclePoint]:
        tt = t * T_s
        out = []
        for p in self.dynamic_points:
            vx, vy = p.velocity
            out.append(ObstaclePoint(p.xi + tt * vx, p.eta + tt * vy, p.heading, p.speed))
        return out

    def world_points(self, t: int, T_s: float, include_hidden: bool = True) -> list[ObstaclePoint]:
        """Ground-truth obstacle points at tick ``t`` (world frame)."""
        pts = list(self.static_points)
        if self.sense_dynamic or include_hidden:
            pts.extend(self.moving_points(t, T_s))
        return pts


@dataclass
class TickRecord:
    t: int
    state: VehicleState
    action: ControlAction | None
    delta: float
    success: bool
    waypoint_idx: int
    evaluated: int
    plan_time: float


@dataclass
class MissionStats:
    path_length: float
    v_min: float
    v_avg: float
    v_max: float
    y_abs_max: float
    tau_avg: float
    completed: bool
    ticks: int


@dataclass
class SimulationLog:
    records: list[TickRecord]
    completed: bool
    T_s: float
    stats: MissionStats | None = None


def _relative_ev_point(ev: VehicleState, p: ObstaclePoint) -> ObstaclePoint:
    xi, eta = to_ev_frame(Pose2(ev.x, ev.y, ev.phi), (p.xi, p.eta))
    return ObstaclePoint(xi, eta, p.heading - ev.phi, p.speed)


def sense(mission: Mission, ev: VehicleState, t: int, cfg: PlannerConfig) -> list[ObstaclePoint]:
    """Perceived obstacle points in the EV frame, at most ``cfg.N_obstPts``.

    Points outside the range field are dropped. When too many remain, moving
    points are kept first, then static ones, each group nearest-first.
    """
    rf = mission.range_field
    groups = []
    moving = mission.moving_points(t, cfg.T_s) if mission.sense_dynamic else []
    for src in (moving, mission.static_points):
        rel = [_relative_ev_point(ev, p) for p in src]
        rel = [p for p in rel if rf.contains(p.xi, p.eta)]
        rel.sort(key=lambda p: math.hypot(p.xi, p.eta))
        groups.extend(rel)
    return groups[:cfg.N_obstPts]


def _ev_errors(ev: VehicleState, wp: GoalSetpoint) -> tuple[float, float, float, float]:
    xi, eta = to_ev_frame(Pose2(ev.x, ev.y, ev.phi), (wp.x, wp.y))
    return xi, eta, wrap_angle(wp.phi - ev.phi), wp.v - ev.v


def waypoint_reached(ev: VehicleState, wp: GoalSetpoint, tol: GoalTolerance) -> bool:
    return tol.satisfied(*_ev_errors(ev, wp))


def clip_to_field(ev: VehicleState, wp: GoalSetpoint, rf: RangeField) -> GoalSetpoint:
    """Pull a waypoint back onto the range-field boundary along the EV-waypoint segment."""
    xi, eta = to_ev_frame(Pose2(ev.x, ev.y, ev.phi), (wp.x, wp.y))
    if rf.contains(xi, eta):
        return wp
    s = 1.0
    if xi > rf.ahead:
        s = min(s, rf.ahead / xi)
    if xi < -rf.behind:
        s = min(s, -rf.behind / xi)
    if abs(eta) > rf.half_width:
        s = min(s, rf.half_width / abs(eta))
    x, y = from_ev_frame(Pose2(ev.x, ev.y, ev.phi), (s * xi, s * eta))
    return GoalSetpoint(x, y, wp.phi, wp.v)


def select_goal(mission: Mission, ev: VehicleState, waypoint_idx: int,
                tol: GoalTolerance) -> tuple[GoalSetpoint, int]:
    last = len(mission.waypoints) - 1
    if not 0 <= waypoint_idx <= last:
        raise IndexError(f"waypoint index {waypoint_idx} out of range")
    while waypoint_idx < last and waypoint_reached(ev, mission.waypoints[waypoint_idx], tol):
        waypoint_idx += 1
    return clip_to_field(ev, mission.waypoints[waypoint_idx], mission.range_field), waypoint_idx


def run_mission(mission: Mission, cfg: PlannerConfig, arch: MlpArchitecture | None = None,
                seed: int | None = None, *, threads: int | None = None,
                engine: RolloutEngine | None = None) -> SimulationLog:
    if arch is not None:
        cfg = replace(cfg, arch=arch)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    p = cfg.vehicle
    own = engine is None
    if own:
        engine = RolloutEngine(cfg, threads)
    try:
        z = mission.initial_state
        act = ActuatorState(0.0)
        prev = ControlAction(0.0, idle_longitudinal(p))
        warm = np.zeros(param_count(cfg.arch))
        idx = 0
        max_ticks = int(math.floor(mission.time_limit / p.T_s + 1e-9))
        records: list[TickRecord] = []
        completed = False
        t = 0
        while True:
            goal, idx = select_goal(mission, z, idx, cfg.tol)
            if idx == len(mission.waypoints) - 1 and waypoint_reached(z, mission.waypoints[idx], cfg.tol):
                completed = True
            if completed or t >= max_ticks:
                records.append(TickRecord(t, z, None, act.delta, False, idx, 0, math.nan))
                break
            pts = sense(mission, z, t, cfg)
            anchor = Pose2(z.x, z.y, z.phi)
            snap = PlanningSnapshot(z, act, prev, goal, extrapolate(pts, cfg.H, p.T_s, anchor), warm)
            t0 = time.perf_counter()
            out = plan_step(snap, cfg, t, engine=engine)
            dt = time.perf_counter() - t0
            delta, u_v = map_controls(out.action, act, p)
            records.append(TickRecord(t, z, out.action, delta, out.success, idx, out.evaluated, dt))
            log.debug("t=%d idx=%d success=%s z=%s", t, idx, out.success, z)
            z = step(z, delta, u_v, p)
            act = ActuatorState(delta)
            prev = out.action
            # keep the last vector that reached the goal in prediction
            if out.success:
                warm = out.best_theta
            t += 1
    finally:
        if own:
            engine.close()
    sim = SimulationLog(records, completed, p.T_s)
    sim.stats = stats(sim)
    return sim


def stats(sim: SimulationLog) -> MissionStats:
    recs = sim.records
    if not recs:
        raise ValueError("empty log")
    xs = np.array([r.state.x for r in recs])
    ys = np.array([r.state.y for r in recs])
    vs = np.array([r.state.v for r in recs]) * 3.6
    P = float(np.sum(np.hypot(np.diff(xs), np.diff(ys))))
    taus = np.array([r.plan_time for r in recs if r.action is not None])
    return MissionStats(
        path_length=P,
        v_min=float(vs.min()),
        v_avg=float(vs.mean()),
        v_max=float(vs.max()),
        y_abs_max=float(np.abs(ys).max()),
        tau_avg=float(taus.mean()) if taus.size else 0.0,
        completed=sim.completed,
        ticks=len(recs),
    )


def collision_ticks(mission: Mission, sim: SimulationLog, p=None, successful_only: bool = False) -> list[int]:
    """Ticks whose logged state overlaps a ground-truth obstacle point."""
    from .dynamics import VehicleParams

    p = p or VehicleParams()
    hits = []
    for r in sim.records:
        if successful_only and not r.success:
            continue
        pts = [(q.xi, q.eta) for q in mission.world_points(r.t, sim.T_s)]
        if collision(Pose2(r.state.x, r.state.y, r.state.phi), pts, p):
            hits.append(r.t)
    return hits
