"""Built-in scenarios and the YAML scenario file format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .dynamics import VehicleState
from .geometry import ObstaclePoint
from .mission import GoalSetpoint, Mission, RangeField
from .planner import PlannerConfig
from .policy import MlpArchitecture

KMH = 1 / 3.6

# PlannerConfig fields a scenario file may override
OVERRIDABLE = ("H", "N_restarts", "N_iter_max", "n", "N_obstPts", "sigma_log_range", "early_exit")


@dataclass
class ScenarioSpec:
    name: str
    mission: Mission
    planner: dict[str, Any] = field(default_factory=dict)
    arch: MlpArchitecture = field(default_factory=MlpArchitecture)
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    notes: str = ""

    def planner_config(self, base: PlannerConfig | None = None) -> PlannerConfig:
        cfg = base or PlannerConfig()
        kw = dict(self.planner)
        if "sigma_log_range" in kw:
            kw["sigma_log_range"] = tuple(kw["sigma_log_range"])
        return replace(cfg, arch=self.arch, **kw)

    def to_dict(self) -> dict:
        m = self.mission
        d = {
            "name": self.name,
            "initial_state": list(m.initial_state.as_tuple()),
            "waypoints": [[w.x, w.y, w.phi, w.v] for w in m.waypoints],
            "static_points": [_pt(p) for p in m.static_points],
            "dynamic_points": [_pt(p) for p in m.dynamic_points],
            "sense_dynamic": m.sense_dynamic,
            "range_field": [m.range_field.ahead, m.range_field.behind, m.range_field.half_width],
            "time_limit": m.time_limit,
            "planner": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.planner.items()},
            "arch": list(self.arch.layer_sizes),
            "seeds": list(self.seeds),
        }
        if self.notes:
            d["notes"] = self.notes
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        unknown = set(d.get("planner", {})) - set(OVERRIDABLE)
        if unknown:
            raise ValueError(f"unknown planner overrides: {sorted(unknown)}")
        mission = Mission(
            initial_state=VehicleState(*map(float, d["initial_state"])),
            waypoints=tuple(GoalSetpoint(*map(float, w)) for w in d["waypoints"]),
            static_points=tuple(ObstaclePoint(*map(float, p)) for p in d.get("static_points", [])),
            dynamic_points=tuple(ObstaclePoint(*map(float, p)) for p in d.get("dynamic_points", [])),
            range_field=RangeField(*map(float, d.get("range_field", [30.0, 10.0, 10.0]))),
            time_limit=float(d.get("time_limit", 20.0)),
            sense_dynamic=bool(d.get("sense_dynamic", True)),
        )
        return cls(
            name=str(d["name"]),
            mission=mission,
            planner=dict(d.get("planner", {})),
            arch=MlpArchitecture(tuple(d.get("arch", (5, 2, 2)))),
            seeds=[int(s) for s in d.get("seeds", range(10))],
            notes=str(d.get("notes", "")),
        )


def _pt(p: ObstaclePoint) -> list[float]:
    return [p.xi, p.eta, p.heading, p.speed]


def dump_scenario(spec: ScenarioSpec, path) -> None:
    text = yaml.safe_dump(spec.to_dict(), sort_keys=False, default_flow_style=None)
    header = "".join(f"# {line}\n" for line in spec.notes.splitlines())
    Path(path).write_text(header + text)


def load_scenario(path) -> ScenarioSpec:
    with open(path) as fh:
        return ScenarioSpec.from_dict(yaml.safe_load(fh))


# ---------------------------------------------------------------------------
# built-ins

def _road_bounds(x0=-10.0, x1=60.0, spacing=2.0, ys=(-1.75, 5.25)) -> tuple[ObstaclePoint, ...]:
    n = int(round((x1 - x0) / spacing)) + 1
    return tuple(ObstaclePoint(x0 + i * spacing, y) for y in ys for i in range(n))


def _oncoming_vehicle(front_x=40.0, length=3.8, half_width=0.9, speed=20 * KMH) -> tuple[ObstaclePoint, ...]:
    # corner points of a vehicle driving towards -x in the EV lane
    return tuple(ObstaclePoint(x, y, math.pi, speed)
                 for x in (front_x, front_x + length) for y in (-half_width, half_width))


PARKING_LOT = tuple(ObstaclePoint(x, y) for x, y in [
    (-6.5, -2), (-5.5, -2), (-4.5, -2), (-3.5, -2), (-2.5, -2),
    (-2.5, -7), (-1.25, -7), (0, -7), (1.25, -7), (2.5, -7),
    (2.5, -2), (3.5, -2), (4.5, -2), (5.5, -2), (6.5, -2),
    (-4, 6), (-2, 6), (0, 6), (2, 6), (4, 6),
])


def _exp1():
    return ScenarioSpec("exp1", Mission(VehicleState(0, 0, 0, 0), (GoalSetpoint(0, 0, math.pi, 0),), time_limit=20.0))


def _exp2():
    v = 50 * KMH
    return ScenarioSpec("exp2", Mission(VehicleState(0, 0, 0, v), (GoalSetpoint(50, 0, 0, v),), time_limit=15.0))


def _exp3(auxiliary: bool):
    v = 50 * KMH
    goal = GoalSetpoint(50, 0, 0, v)
    wps = (GoalSetpoint(30, 3.5, 0, v), goal) if auxiliary else (goal,)
    notes = ("road bounds sampled every 2 m; oncoming vehicle given by its 4 corner points\n"
             "auxiliary setpoint position (30, 3.5) is an authoring choice" if auxiliary else
             "road bounds sampled every 2 m; oncoming vehicle given by its 4 corner points")
    mission = Mission(
        VehicleState(0, 0, 0, v), wps,
        static_points=_road_bounds(),
        dynamic_points=_oncoming_vehicle(),
        time_limit=15.0,
        sense_dynamic=not auxiliary,
    )
    return ScenarioSpec("exp3_auxiliary" if auxiliary else "exp3_explicit", mission, notes=notes)


def _exp4():
    wps = (
        GoalSetpoint(10, 0, math.pi / 2, 0),
        GoalSetpoint(10, 10, math.pi, 0),
        GoalSetpoint(0, 10, 3 * math.pi / 2, 0),
        GoalSetpoint(0, 0, 0, 0),
    )
    return ScenarioSpec("exp4", Mission(VehicleState(0, 0, 0, 0), wps, time_limit=60.0),
                        notes="waypoint poses approximate (read off a plotted layout); target speeds set to 0")


def _exp5(three: bool):
    park = GoalSetpoint(0, -5, math.pi / 2, 0)
    aux = GoalSetpoint(0, 0, math.pi / 2, 0)
    wps = (GoalSetpoint(5, 2, 0, 0), aux, park) if three else (aux, park)
    return ScenarioSpec(
        "exp5_3wp" if three else "exp5_2wp",
        Mission(VehicleState(0, 2, 0, 0), wps, static_points=PARKING_LOT, time_limit=30.0),
        notes="lot points and waypoint poses approximate (read off a plotted layout)",
    )


BUILTINS = {
    "exp1": _exp1,
    "exp2": _exp2,
    "exp3_explicit": lambda: _exp3(False),
    "exp3_auxiliary": lambda: _exp3(True),
    "exp4": _exp4,
    "exp5_3wp": lambda: _exp5(True),
    "exp5_2wp": lambda: _exp5(False),
}


class UnknownScenario(KeyError):
    def __str__(self):
        return f"unknown scenario {self.args[0]!r}; valid names: {', '.join(BUILTINS)}"


def builtin_scenario(name: str) -> ScenarioSpec:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise UnknownScenario(name) from None


def resolve_scenario(name_or_path: str) -> ScenarioSpec:
    if name_or_path in BUILTINS:
        return builtin_scenario(name_or_path)
    p = Path(name_or_path)
    if p.is_file():
        return load_scenario(p)
    raise UnknownScenario(name_or_path)
