"""Fast self-checks behind ``plan verify``: oracles and invariants, no experiments."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .dynamics import ActuatorState, ControlAction, VehicleParams, VehicleState, idle_longitudinal, map_controls, step
from .geometry import ObstaclePoint, Pose2, chassis_corners, collision, extrapolate
from .planner import GoalSetpoint, PlannerConfig, PlanningSnapshot, RolloutEngine, plan_step, rollout
from .policy import MlpArchitecture, param_count


def inside_convex(poly: np.ndarray, q) -> tuple[bool, float]:
    """Point-in-convex-polygon by edge cross products (CCW vertices).

    Returns ``(strictly_inside, distance_to_nearest_edge_line)``.
    """
    inside = True
    dmin = math.inf
    for i in range(len(poly)):
        a = poly[i]
        b = poly[(i + 1) % len(poly)]
        ex, ey = b[0] - a[0], b[1] - a[1]
        cross = ex * (q[1] - a[1]) - ey * (q[0] - a[0])
        d = cross / math.hypot(ex, ey)
        dmin = min(dmin, abs(d))
        if d <= 0:
            inside = False
    return inside, dmin


def euler_errors(dts=(0.1, 0.01, 0.001), ref_dt=1e-4, T=1.0) -> list[float]:
    """Endpoint errors of a fixed steering profile against a fine-step reference."""

    def endpoint(dt):
        p = VehicleParams(T_s=dt)
        z = VehicleState(0.0, 0.0, 0.0, 5.0)
        for k in range(int(round(T / dt))):
            z = step(z, 0.3 * math.sin(2.0 * k * dt), 1.0, p)
        return np.array(z.as_tuple())

    ref = endpoint(ref_dt)
    return [float(np.linalg.norm(endpoint(dt) - ref)) for dt in dts]


def random_snapshot(rng: np.random.Generator, cfg: PlannerConfig, n_points: int = 6) -> PlanningSnapshot:
    ev = VehicleState(0.0, 0.0, 0.0, float(rng.uniform(-3, 15)))
    goal = GoalSetpoint(float(rng.uniform(-10, 30)), float(rng.uniform(-8, 8)),
                        float(rng.uniform(-math.pi, math.pi)), float(rng.uniform(-3, 15)))
    pts = [ObstaclePoint(float(rng.uniform(-10, 30)), float(rng.uniform(-10, 10)),
                         float(rng.uniform(-math.pi, math.pi)), float(rng.choice([0.0, rng.uniform(0, 8)])))
           for _ in range(n_points)]
    pts = [q for q in pts if not collision(Pose2(0, 0, 0), [(q.xi, q.eta)], cfg.vehicle)]
    d = param_count(cfg.arch)
    return PlanningSnapshot(
        ev, ActuatorState(float(rng.uniform(-0.6, 0.6))), ControlAction(float(rng.uniform(-1, 1)), 0.0),
        goal, extrapolate(pts, cfg.H, cfg.T_s), rng.normal(0, 0.5, d),
    )


def run_checks(threads: int = 2, out=print) -> bool:
    results = []

    def report(name, ok, detail=""):
        results.append(ok)
        out(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))

    counts = {s: param_count(MlpArchitecture(s)) for s in [(5, 2, 2), (5, 10, 2), (5, 10, 10, 2)]}
    report("parameter counts", list(counts.values()) == [18, 82, 192], str(counts))

    p = VehicleParams()
    a1 = idle_longitudinal(p)
    _, u = map_controls(ControlAction(0.0, a1), ActuatorState(), p)
    report("idle longitudinal command", abs(u) < 1e-12, f"a1={a1:.6f} u_v={u:.1e}")

    rng = np.random.default_rng(7)
    bad = used = 0
    for _ in range(10_000):
        pose = Pose2(*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
        q = rng.uniform(-5, 5, 2) + (pose.x, pose.y)
        ins, dist = inside_convex(chassis_corners(pose, p), q)
        if dist < 1e-9:
            continue
        used += 1
        bad += ins != collision(pose, [tuple(q)], p)
    report("collision vs polygon oracle", bad == 0, f"{bad} mismatches in {used} pairs")

    e = euler_errors()
    ratios = [e[0] / e[1], e[1] / e[2]]
    report("Euler first-order convergence", all(8 <= r <= 12 for r in ratios),
           "ratios " + ", ".join(f"{r:.2f}" for r in ratios))

    cfg = PlannerConfig(n=64, N_restarts=2, H=60)
    mism = 0
    with RolloutEngine(cfg, 1) as eng:
        for _ in range(20):
            snap = random_snapshot(rng, cfg)
            theta = rng.normal(0, 1.0, param_count(cfg.arch))
            a, b = eng.trace(theta, snap), rollout(theta, snap, cfg)
            mism += (a.trajectory != b.trajectory or a.path_length != b.path_length
                     or a.collided != b.collided or a.reached != b.reached)
    report("kernel vs reference rollout", mism == 0, f"{mism}/20 mismatches")

    snap = random_snapshot(rng, cfg)
    outs = [plan_step(snap, replace(cfg, master_seed=3), 5, threads=k) for k in sorted({1, max(1, threads)})]
    same = all(np.array_equal(o.best_theta, outs[0].best_theta) and o.action == outs[0].action for o in outs)
    report("thread-count determinism", same, f"threads {sorted({1, max(1, threads)})}")
    return all(results)
