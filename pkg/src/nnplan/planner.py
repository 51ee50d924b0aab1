"""Online sampling in the parameter space of the MLP controller.

One planning tick evaluates ``N_restarts * N_iter_max`` rounds of ``n``
perturbed parameter vectors. Every round re-centres on the best vector found so
far; round 1 is centred on the warm-start vector from the previous tick.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from . import kernel
from .dynamics import (
    ActuatorState,
    ControlAction,
    VehicleParams,
    VehicleState,
    idle_longitudinal,
    map_controls,
    step,
)
from .geometry import ExtrapolatedField, Pose2, collision, to_ev_frame
from .policy import MlpArchitecture, Mlp, NormConstants, build_features, param_count, wrap_angle

THREADS_ENV = "NNPLAN_THREADS"


@dataclass(frozen=True)
class GoalSetpoint:
    x: float
    y: float
    phi: float
    v: float


@dataclass(frozen=True)
class GoalTolerance:
    eps_xi: float = 1.0
    eps_eta: float = 0.25
    eps_phi: float = 10.0 * math.pi / 180.0
    eps_v: float = 5.0 / 3.6

    def __post_init__(self):
        if min(self.eps_xi, self.eps_eta, self.eps_phi, self.eps_v) <= 0:
            raise ValueError("goal tolerances must be positive")

    def satisfied(self, d_xi: float, d_eta: float, d_phi: float, d_v: float) -> bool:
        return (abs(d_xi) <= self.eps_xi and abs(d_eta) <= self.eps_eta
                and abs(d_phi) <= self.eps_phi and abs(d_v) <= self.eps_v)

    def gap(self, d_xi: float, d_eta: float, d_phi: float, d_v: float) -> float:
        """Largest error in units of its tolerance; ``<= 1`` means satisfied."""
        return max(max(abs(d_xi) / self.eps_xi, abs(d_eta) / self.eps_eta),
                   max(abs(d_phi) / self.eps_phi, abs(d_v) / self.eps_v))


@dataclass(frozen=True)
class PlannerConfig:
    H: int = 200
    N_restarts: int = 15
    N_iter_max: int = 1
    n: int = 20480
    N_obstPts: int = 20
    tol: GoalTolerance = field(default_factory=GoalTolerance)
    sigma_log_range: tuple[float, float] = (-2.0, 1.0)
    master_seed: int = 0
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    norm: NormConstants = field(default_factory=NormConstants)
    arch: MlpArchitecture = field(default_factory=MlpArchitecture)
    early_exit: bool = False

    def __post_init__(self):
        if self.n < 1 or self.H < 1:
            raise ValueError("need n >= 1 and H >= 1")
        if self.N_restarts < 1 or self.N_iter_max < 1:
            raise ValueError("need at least one restart and one iteration")
        lo, hi = self.sigma_log_range
        if lo > hi:
            raise ValueError("sigma_log_range must be (low, high)")

    @property
    def T_s(self) -> float:
        return self.vehicle.T_s

    def with_seed(self, seed: int) -> "PlannerConfig":
        return replace(self, master_seed=int(seed))


@dataclass(frozen=True)
class PlanningSnapshot:
    """Everything one planning tick needs, expressed once per tick.

    ``obstacle_field`` is anchored at the EV pose in ``ev_state``.
    """

    ev_state: VehicleState
    actuator: ActuatorState
    prev_action: ControlAction
    goal: GoalSetpoint
    obstacle_field: ExtrapolatedField
    warm_theta: np.ndarray | None = None

    @property
    def anchor(self) -> Pose2:
        return Pose2(self.ev_state.x, self.ev_state.y, self.ev_state.phi)

    def goal_in_anchor(self) -> GoalSetpoint:
        xi, eta = to_ev_frame(self.anchor, (self.goal.x, self.goal.y))
        return GoalSetpoint(xi, eta, self.goal.phi - self.ev_state.phi, self.goal.v)


@dataclass
class RolloutResult:
    """``goal_gap`` is the smallest tolerance gap over the simulated states."""

    reached: bool
    t_goal: int | None
    collided: bool
    path_length: float
    goal_gap: float
    first_action: ControlAction
    trajectory: list[VehicleState]


@dataclass
class PlannerOutput:
    best_theta: np.ndarray
    action: ControlAction
    predicted: RolloutResult
    success: bool
    evaluated: int
    fallback: bool = False


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def score(r: RolloutResult) -> tuple:
    """Lexicographic key, larger is better."""
    if r.reached:
        return (not r.collided, True, -float(r.t_goal), -r.path_length)
    return (not r.collided, False, -r.goal_gap, 0.0)


def goal_errors_body(z: VehicleState, goal: GoalSetpoint) -> tuple[float, float, float, float]:
    """Goal errors with the position part rotated into the body frame of ``z``.

    ``z`` and ``goal`` share one frame; the heading and speed errors are
    frame-independent.
    """
    ex = goal.x - z.x
    ey = goal.y - z.y
    c = math.cos(z.phi)
    s = math.sin(z.phi)
    return c * ex + s * ey, -s * ex + c * ey, wrap_angle(goal.phi - z.phi), goal.v - z.v


def rollout(theta, snap: PlanningSnapshot, cfg: PlannerConfig) -> RolloutResult:
    """Single-threaded reference rollout composed from the scalar building blocks."""
    p = cfg.vehicle
    mlp = Mlp(cfg.arch, theta)
    goal = snap.goal_in_anchor()
    z = VehicleState(0.0, 0.0, 0.0, snap.ev_state.v)
    act = snap.actuator
    prev_a0 = snap.prev_action.a0
    traj = [z]
    path = 0.0
    first = None
    collided = reached = False
    t_goal = None
    best = math.inf
    h = 0
    while True:
        err = goal_errors_body(z, goal)
        best = min(best, cfg.tol.gap(*err))
        a = mlp(build_features(z, goal, prev_a0, cfg.norm))
        if first is None:
            first = a
        if collision(Pose2(z.x, z.y, z.phi), snap.obstacle_field.positions[h], p):
            collided = True
            break
        if cfg.tol.satisfied(*err):
            reached = True
            t_goal = h
            break
        if h == cfg.H:
            break
        delta, u_v = map_controls(a, act, p)
        act = ActuatorState(delta)
        nz = step(z, delta, u_v, p)
        dx = nz.x - z.x
        dy = nz.y - z.y
        path += math.sqrt(dx * dx + dy * dy)
        z = nz
        traj.append(z)
        prev_a0 = a.a0
        h += 1
    return RolloutResult(reached, t_goal, collided, path, best, first, traj)


# ---------------------------------------------------------------------------
# candidate generation

def _round_key(master_seed: int, t: int, restart_idx: int, iter_idx: int) -> np.ndarray:
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(t), int(restart_idx), int(iter_idx)])
    return ss.generate_state(2, dtype=np.uint64)


def _uniform_block(key: np.ndarray, first: int, count: int, width: int) -> np.ndarray:
    """Uniforms for candidates ``first .. first+count-1``, ``width`` draws each.

    Each double consumes exactly one 64-bit Philox output, so candidate ``i``
    starts at a fixed counter offset and its draws depend only on the key and
    ``i``.
    """
    bg = np.random.Philox(key=key)
    # Philox emits 4 x 64-bit words per counter increment
    start = first * width
    bg.advance(start // 4)
    skip = start % 4
    gen = np.random.Generator(bg)
    u = gen.random(skip + count * width)[skip:]
    return u.reshape(count, width)


def candidate_noise(cfg: PlannerConfig, t: int, restart_idx: int, iter_idx: int,
                    first: int, count: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-candidate ``(sigma, standard_normal[dim])`` for a slice of candidates."""
    key = _round_key(cfg.master_seed, t, restart_idx, iter_idx)
    u = _uniform_block(key, first, count, dim + 1)
    lo, hi = cfg.sigma_log_range
    sigma = 10.0 ** (lo + (hi - lo) * u[:, 0])
    # random() is in [0, 1); shift off 0 so ndtri stays finite
    g = ndtri(np.where(u[:, 1:] == 0.0, 2.0 ** -54, u[:, 1:]))
    return sigma, g


def sample_candidates(center, cfg: PlannerConfig, restart_idx: int, iter_idx: int, t: int = 0) -> np.ndarray:
    """``n`` candidates; row 0 is ``center`` itself."""
    center = np.asarray(center, dtype=float)
    d = center.shape[0]
    out = np.empty((cfg.n, d))
    out[0] = center
    if cfg.n > 1:
        sigma, g = candidate_noise(cfg, t, restart_idx, iter_idx, 1, cfg.n - 1, d)
        out[1:] = center[None, :] + sigma[:, None] * g
    return out


# ---------------------------------------------------------------------------
# batched evaluation

def kernel_params(cfg: PlannerConfig) -> np.ndarray:
    p = cfg.vehicle
    tol = cfg.tol
    nc = cfg.norm
    prm = np.empty(kernel.N_PARAMS)
    prm[kernel.P_LF] = p.l_f
    prm[kernel.P_LR] = p.l_r
    prm[kernel.P_DMAX] = p.delta_max
    prm[kernel.P_DRATE] = p.delta_rate_max
    prm[kernel.P_UMIN] = p.u_v_min
    prm[kernel.P_UMAX] = p.u_v_max
    prm[kernel.P_TS] = p.T_s
    prm[kernel.P_FRONT] = p.front_extent
    prm[kernel.P_REAR] = p.rear_extent
    prm[kernel.P_HW] = p.half_width
    prm[kernel.P_EPS_XI] = tol.eps_xi
    prm[kernel.P_EPS_ETA] = tol.eps_eta
    prm[kernel.P_EPS_PHI] = tol.eps_phi
    prm[kernel.P_EPS_V] = tol.eps_v
    prm[kernel.P_D_XI] = nc.d_xi
    prm[kernel.P_D_ETA] = nc.d_eta
    prm[kernel.P_D_PHI] = nc.d_phi
    prm[kernel.P_D_V] = nc.d_v
    return prm


@dataclass
class _Batch:
    collided: np.ndarray
    reached: np.ndarray
    t_goal: np.ndarray
    path: np.ndarray
    gap: np.ndarray
    a0: np.ndarray
    a1: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "_Batch":
        return cls(np.zeros(n, bool), np.zeros(n, bool), np.full(n, -1, np.int64),
                   np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n))

    def key(self, i: int) -> tuple:
        if self.reached[i]:
            return (not self.collided[i], True, -float(self.t_goal[i]), -float(self.path[i]))
        return (not self.collided[i], False, -float(self.gap[i]), 0.0)

    def best_index(self) -> int:
        """Index of the best key; ties go to the lowest index."""
        n = self.collided.shape[0]
        free = ~self.collided
        k3 = np.where(self.reached, -self.t_goal.astype(float), -self.gap)
        k4 = np.where(self.reached, -self.path, 0.0)
        # lexsort sorts ascending by the last key first; negate for descending
        order = np.lexsort((np.arange(n), -k4, -k3, -self.reached.astype(int), -free.astype(int)))
        return int(order[0])


class RolloutEngine:
    """Evaluates candidate batches, split into contiguous chunks over a thread pool."""

    def __init__(self, cfg: PlannerConfig, threads: int | None = None):
        self.cfg = cfg
        self.threads = default_threads() if threads is None else max(1, int(threads))
        self.mlp = kernel.compile_mlp(cfg.arch.layer_sizes)
        self.prm = kernel_params(cfg)
        self._pool = ThreadPoolExecutor(self.threads) if self.threads > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _inputs(self, snap: PlanningSnapshot):
        g = snap.goal_in_anchor()
        goal = np.array([g.x, g.y, g.phi, g.v])
        positions = np.ascontiguousarray(snap.obstacle_field.positions, dtype=float)
        if positions.shape[0] != self.cfg.H + 1:
            raise ValueError("obstacle field horizon does not match planner horizon")
        return positions, float(snap.ev_state.v), goal, float(snap.prev_action.a0), float(snap.actuator.delta)

    def evaluate(self, thetas: np.ndarray, snap: PlanningSnapshot) -> _Batch:
        n = thetas.shape[0]
        out = _Batch.empty(n)
        positions, v0, goal, pa0, d0 = self._inputs(snap)

        def run(lo, hi):
            kernel.rollout_batch(self.mlp, thetas[lo:hi], positions, v0, goal, pa0, d0, self.prm,
                                 out.collided[lo:hi], out.reached[lo:hi], out.t_goal[lo:hi],
                                 out.path[lo:hi], out.gap[lo:hi], out.a0[lo:hi], out.a1[lo:hi])

        if self._pool is None or n < 2 * self.threads:
            run(0, n)
        else:
            bounds = np.linspace(0, n, self.threads + 1).astype(int)
            futs = [self._pool.submit(run, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
            for f in futs:
                f.result()
        return out

    def trace(self, theta: np.ndarray, snap: PlanningSnapshot) -> RolloutResult:
        """Kernel rollout of one vector with the trajectory recorded (anchor frame)."""
        positions, v0, goal, pa0, d0 = self._inputs(snap)
        traj = np.empty((self.cfg.H + 1, 4))
        r = kernel.rollout_one(self.mlp, np.ascontiguousarray(theta, dtype=float), positions,
                               v0, goal, pa0, d0, self.prm, traj, True)
        collided, reached, t_goal, path, gap, a0, a1, n_states = r
        states = [VehicleState(*map(float, row)) for row in traj[:n_states]]
        return RolloutResult(bool(reached), int(t_goal) if reached else None, bool(collided),
                             float(path), float(gap), ControlAction(float(a0), float(a1)), states)


def braking_action(snap: PlanningSnapshot, p: VehicleParams) -> ControlAction:
    """Hold the realized steering angle and decelerate at the actuator limit."""
    v = snap.ev_state.v
    a1 = -1.0 if v > 0 else 1.0 if v < 0 else idle_longitudinal(p)
    return ControlAction(snap.actuator.delta / p.delta_max, a1)


def plan_step(snap: PlanningSnapshot, cfg: PlannerConfig, t: int = 0, *,
              threads: int | None = None, engine: RolloutEngine | None = None) -> PlannerOutput:
    own = engine is None
    if own:
        engine = RolloutEngine(cfg, threads)
    try:
        return _plan(snap, cfg, t, engine)
    finally:
        if own:
            engine.close()


def _plan(snap: PlanningSnapshot, cfg: PlannerConfig, t: int, engine: RolloutEngine) -> PlannerOutput:
    d = param_count(cfg.arch)
    if snap.warm_theta is None:
        center = np.zeros(d)
    else:
        center = np.asarray(snap.warm_theta, dtype=float)
        if center.shape != (d,):
            raise ValueError(f"warm theta has shape {center.shape}, expected ({d},)")

    best_theta = center
    best_key = None
    evaluated = 0
    done = False
    for r in range(cfg.N_restarts):
        for it in range(cfg.N_iter_max):
            cands = sample_candidates(best_theta, cfg, r, it, t)
            batch = engine.evaluate(cands, snap)
            evaluated += cands.shape[0]
            i = batch.best_index()
            k = batch.key(i)
            # strict improvement only: earlier rounds win ties
            if best_key is None or k > best_key:
                best_key = k
                best_theta = cands[i].copy()
            if cfg.early_exit and best_key[0] and best_key[1]:
                done = True
                break
        if done:
            break

    predicted = engine.trace(best_theta, snap)
    success = predicted.reached and not predicted.collided
    if predicted.collided:
        # nothing collision-free was found: brake, but still report the incumbent
        return PlannerOutput(best_theta, braking_action(snap, cfg.vehicle), predicted, False, evaluated, True)
    return PlannerOutput(best_theta, predicted.first_action, predicted, success, evaluated)
