"""Batched rollout kernel compiled with numba.

Each candidate parameter vector is simulated independently, so any partition of
the batch across threads yields identical per-candidate results. The arithmetic
mirrors ``dynamics.step``, ``dynamics.map_controls``, ``policy.Mlp`` and
``geometry.collision`` operation for operation, which keeps a pure-Python
re-simulation bit-identical.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import math

import numba
import numpy as np

# numba lowers math.sin/cos to its own routines, which differ from the C
# library in the last bit for a small fraction of arguments; CPython's math
# module calls the C library, so the kernel calls it too.
_libm = ctypes.CDLL(ctypes.util.find_library("m"))


def _libm_fn(name):
    f = getattr(_libm, name)
    f.argtypes = [ctypes.c_double]
    f.restype = ctypes.c_double
    return f


c_sin = _libm_fn("sin")
c_cos = _libm_fn("cos")
c_tan = _libm_fn("tan")

# params vector layout
P_LF, P_LR, P_DMAX, P_DRATE, P_UMIN, P_UMAX, P_TS, P_FRONT, P_REAR, P_HW = range(10)
P_EPS_XI, P_EPS_ETA, P_EPS_PHI, P_EPS_V = range(10, 14)
P_D_XI, P_D_ETA, P_D_PHI, P_D_V = range(14, 18)
N_PARAMS = 18

TWO_PI = 2.0 * math.pi


@numba.njit(cache=True, nogil=True)
def _wrap(a):
    w = a - TWO_PI * math.floor((a + math.pi) / TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    return w


@numba.njit(cache=True, nogil=True)
def _clamp(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


_MLP_CACHE: dict[tuple[int, ...], object] = {}


def compile_mlp(sizes) -> object:
    """Unrolled forward pass for one architecture, compiled once per process.

    Generated code sums ``((0.0 + w0*x0) + w1*x1) + ...`` then adds the bias,
    the same order ``policy.Mlp`` uses.
    """
    sizes = tuple(int(n) for n in sizes)
    fn = _MLP_CACHE.get(sizes)
    if fn is not None:
        return fn
    cur = [f"s[{j}]" for j in range(sizes[0])]
    lines = ["def mlp(theta, s):"]
    off = 0
    for layer, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        boff = off + n_in * n_out
        nxt = []
        for i in range(n_out):
            expr = "0.0"
            for j in range(n_in):
                expr = f"({expr} + theta[{off + i * n_in + j}] * {cur[j]})"
            lines.append(f"    h{layer}_{i} = math.tanh({expr} + theta[{boff + i}])")
            nxt.append(f"h{layer}_{i}")
        off = boff + n_out
        cur = nxt
    lines.append(f"    return {cur[0]}, {cur[1]}")
    ns = {"math": math}
    exec("\n".join(lines), ns)
    fn = numba.njit(nogil=True)(ns["mlp"])
    _MLP_CACHE[sizes] = fn
    return fn


@numba.njit(nogil=True)
def rollout_one(mlp, theta, positions, v0, goal, prev_a0, delta0, prm, traj, record):
    """Simulate one parameter vector in the anchor frame.

    Returns ``(collided, reached, t_goal, path_length, goal_gap, a0_first,
    a1_first, n_states)``. ``goal_gap`` is the closest approach to the goal
    region over the simulated states, in units of the goal tolerances. When
    ``record`` is set, states are written to ``traj[:n_states]``.
    """
    lf = prm[P_LF]
    lr = prm[P_LR]
    L = lf + lr
    dmax = prm[P_DMAX]
    rate_step = prm[P_DRATE] * prm[P_TS]
    umin = prm[P_UMIN]
    umax = prm[P_UMAX]
    Ts = prm[P_TS]
    front = prm[P_FRONT]
    rear = prm[P_REAR]
    hw = prm[P_HW]
    gx = goal[0]
    gy = goal[1]
    gphi = goal[2]
    gv = goal[3]

    s = np.empty(5)

    H = positions.shape[0] - 1
    npts = positions.shape[1]
    x = 0.0
    y = 0.0
    phi = 0.0
    v = v0
    delta = delta0
    pa0 = prev_a0
    path = 0.0
    a0_first = 0.0
    a1_first = 0.0
    collided = False
    reached = False
    t_goal = -1
    best = math.inf
    h = 0
    while True:
        c = c_cos(phi)
        sn = c_sin(phi)
        if record:
            traj[h, 0] = x
            traj[h, 1] = y
            traj[h, 2] = phi
            traj[h, 3] = v

        ex = gx - x
        ey = gy - y
        ephi = _wrap(gphi - phi)
        ev = gv - v
        s[0] = ex / prm[P_D_XI]
        s[1] = ey / prm[P_D_ETA]
        s[2] = ephi / prm[P_D_PHI]
        s[3] = ev / prm[P_D_V]
        s[4] = pa0
        # goal membership and the goal gap use the vehicle's own frame at step
        # h, like the closed-loop waypoint check does once the vehicle is there
        bx = c * ex + sn * ey
        by = -sn * ex + c * ey
        gap = max(max(abs(bx) / prm[P_EPS_XI], abs(by) / prm[P_EPS_ETA]),
                  max(abs(ephi) / prm[P_EPS_PHI], abs(ev) / prm[P_EPS_V]))
        if gap < best:
            best = gap
        a0, a1 = mlp(theta, s)
        if h == 0:
            a0_first = a0
            a1_first = a1

        for j in range(npts):
            dx = positions[h, j, 0] - x
            dy = positions[h, j, 1] - y
            xi = c * dx + sn * dy
            eta = -sn * dx + c * dy
            if -rear < xi < front and -hw < eta < hw:
                collided = True
                break
        if collided:
            break
        if (abs(bx) <= prm[P_EPS_XI] and abs(by) <= prm[P_EPS_ETA]
                and abs(ephi) <= prm[P_EPS_PHI] and abs(ev) <= prm[P_EPS_V]):
            reached = True
            t_goal = h
            break
        if h == H:
            break

        a0c = _clamp(a0, -1.0, 1.0)
        a1c = _clamp(a1, -1.0, 1.0)
        delta = _clamp(dmax * a0c, delta - rate_step, delta + rate_step)
        delta = _clamp(delta, -dmax, dmax)
        u_v = ((1.0 - a1c) * umin + (1.0 + a1c) * umax) / 2.0

        td = c_tan(delta)
        k = lr * td / L
        nx = x + Ts * (v * (c - sn * k))
        ny = y + Ts * (v * (sn + c * k))
        nphi = phi + Ts * (v * td / L)
        nv = v + Ts * u_v
        dxs = nx - x
        dys = ny - y
        path += math.sqrt(dxs * dxs + dys * dys)
        x = nx
        y = ny
        phi = nphi
        v = nv
        pa0 = a0
        h += 1

    return collided, reached, t_goal, path, best, a0_first, a1_first, h + 1


@numba.njit(nogil=True)
def rollout_batch(mlp, thetas, positions, v0, goal, prev_a0, delta0, prm,
                  collided, reached, t_goal, path, gap, a0_first, a1_first):
    dummy = np.empty((1, 4))
    for i in range(thetas.shape[0]):
        r = rollout_one(mlp, thetas[i], positions, v0, goal, prev_a0, delta0, prm, dummy, False)
        collided[i] = r[0]
        reached[i] = r[1]
        t_goal[i] = r[2]
        path[i] = r[3]
        gap[i] = r[4]
        a0_first[i] = r[5]
        a1_first[i] = r[6]
