"""Trajectory CSVs, sweep reports, plot-ready XY series and rendered figures."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import ControlAction, VehicleState
from .mission import MissionStats, SimulationLog, TickRecord

CSV_COLUMNS = ("t_s", "x_m", "y_m", "phi_rad", "v_mps", "a0", "a1", "delta_rad",
               "waypoint_idx", "planner_success", "plan_time_s")


def write_trajectory_csv(sim: SimulationLog, path, record_timing: bool = False) -> None:
    """One row per tick. The terminal row carries no action (``a0``/``a1``/``plan_time_s`` are nan).

    Planning wall-clock times are written only with ``record_timing``; otherwise
    the column holds nan so identical runs give byte-identical files.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in sim.records:
            a0, a1 = (r.action.a0, r.action.a1) if r.action is not None else (math.nan, math.nan)
            w.writerow([repr(r.t * sim.T_s), repr(r.state.x), repr(r.state.y), repr(r.state.phi),
                        repr(r.state.v), repr(a0), repr(a1), repr(r.delta), r.waypoint_idx,
                        int(r.success), repr(r.plan_time if record_timing else math.nan)])


def read_trajectory_csv(path, T_s: float = 0.1) -> list[TickRecord]:
    out = []
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected columns {header}")
        for row in rd:
            t_s, x, y, phi, v, a0, a1, delta = map(float, row[:8])
            a = None if math.isnan(a0) else ControlAction(a0, a1)
            out.append(TickRecord(int(round(t_s / T_s)), VehicleState(x, y, phi, v), a, delta,
                                  bool(int(row[9])), int(row[8]), 0, float(row[10])))
    return out


@dataclass
class SeedRow:
    seed: int
    stats: MissionStats


@dataclass
class SweepReport:
    scenario: str
    arch: list[int]
    n: int
    N_restarts: int
    rows: list[SeedRow] = field(default_factory=list)

    @property
    def aggregates(self) -> dict:
        rows = [r.stats for r in self.rows]
        done = [s for s in rows if s.completed]

        def mma(vals):
            if not vals:
                return None
            return {"min": min(vals), "avg": float(np.mean(vals)), "max": max(vals)}

        return {
            "seeds": len(rows),
            "completed": len(done),
            "path_length": mma([s.path_length for s in done]),
            "v_min": mma([s.v_min for s in rows]),
            "v_avg": mma([s.v_avg for s in rows]),
            "v_max": mma([s.v_max for s in rows]),
            "y_abs_max": max((s.y_abs_max for s in rows), default=None),
            "tau_avg": mma([s.tau_avg for s in rows]),
        }

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "arch": self.arch,
            "n": self.n,
            "N_restarts": self.N_restarts,
            "rows": [{"seed": r.seed, **asdict(r.stats)} for r in self.rows],
            "aggregates": self.aggregates,
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def write_xy(path, xs, ys, header: str) -> None:
    """Whitespace-separated two-column series, pgfplots/gnuplot friendly."""
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for x, y in zip(xs, ys):
            fh.write(f"{x!r} {y!r}\n")


def write_plot_data(sim: SimulationLog, out_dir, stem: str) -> list[Path]:
    out_dir = Path(out_dir)
    t = [r.t * sim.T_s for r in sim.records]
    series = {
        "xy": ([r.state.x for r in sim.records], [r.state.y for r in sim.records], "x_m y_m"),
        "phi_deg": (t, [math.degrees(r.state.phi) for r in sim.records], "t_s phi_deg"),
        "v_kmh": (t, [r.state.v * 3.6 for r in sim.records], "t_s v_kmh"),
        "delta_deg": (t, [math.degrees(r.delta) for r in sim.records], "t_s delta_deg"),
    }
    acted = [r for r in sim.records if r.action is not None]
    series["a0"] = ([r.t * sim.T_s for r in acted], [r.action.a0 for r in acted], "t_s a0")
    series["a1"] = ([r.t * sim.T_s for r in acted], [r.action.a1 for r in acted], "t_s a1")
    paths = []
    for key, (xs, ys, hdr) in series.items():
        p = out_dir / f"{stem}_{key}.dat"
        write_xy(p, xs, ys, hdr)
        paths.append(p)
    return paths


def render_figures(logs: dict[int, SimulationLog], mission, out_dir, title: str) -> list[Path]:
    """Planar overlay of all seeds plus state/control traces; PNG files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    paths = []

    fig, ax = plt.subplots(figsize=(6, 4.5))
    pts = mission.static_points
    if pts:
        ax.plot([p.xi for p in pts], [p.eta for p in pts], "k.", ms=4, label="obstacle points")
    for p in mission.dynamic_points:
        ax.annotate("", xy=(p.xi + 2 * math.cos(p.heading), p.eta + 2 * math.sin(p.heading)),
                    xytext=(p.xi, p.eta), arrowprops=dict(arrowstyle="->", color="r"))
    cmap = plt.get_cmap("viridis")
    for i, (seed, sim) in enumerate(sorted(logs.items())):
        xs = [r.state.x for r in sim.records]
        ys = [r.state.y for r in sim.records]
        ax.plot(xs, ys, color=cmap(i / max(1, len(logs) - 1)), lw=1,
                label=f"seed {seed}" + ("" if sim.completed else " (incomplete)"))
    for k, w in enumerate(mission.waypoints):
        ax.annotate("", xy=(w.x + 1.5 * math.cos(w.phi), w.y + 1.5 * math.sin(w.phi)), xytext=(w.x, w.y),
                    arrowprops=dict(arrowstyle="->", color="tab:red", lw=2))
        ax.text(w.x, w.y, str(k + 1), fontsize=8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title(title)
    if len(logs) <= 10:
        ax.legend(fontsize=6, loc="best")
    fig.tight_layout()
    p = out_dir / "trajectories.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, axes = plt.subplots(4, 1, figsize=(6, 7), sharex=True)
    for seed, sim in sorted(logs.items()):
        t = [r.t * sim.T_s for r in sim.records]
        axes[0].plot(t, [math.degrees(r.state.phi) for r in sim.records], lw=0.8)
        axes[1].plot(t, [r.state.v * 3.6 for r in sim.records], lw=0.8)
        acted = [r for r in sim.records if r.action is not None]
        ta = [r.t * sim.T_s for r in acted]
        axes[2].plot(ta, [r.action.a0 for r in acted], lw=0.8)
        axes[3].plot(ta, [r.action.a1 for r in acted], lw=0.8)
    for ax, lab in zip(axes, ["phi [deg]", "v [km/h]", "a[0]", "a[1]"]):
        ax.set_ylabel(lab)
    axes[-1].set_xlabel("t [s]")
    fig.tight_layout()
    p = out_dir / "states.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)
    return paths
