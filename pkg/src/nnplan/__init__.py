"""Online sampling of MLP controller parameters for vehicle motion planning."""

from .dynamics import ActuatorState, ControlAction, VehicleParams, VehicleState, idle_longitudinal, map_controls, step
from .geometry import ExtrapolatedField, ObstaclePoint, Pose2, collision, extrapolate, from_ev_frame, to_ev_frame
from .mission import Mission, RangeField, SimulationLog, run_mission, select_goal, sense
from .planner import (
    GoalSetpoint,
    GoalTolerance,
    PlannerConfig,
    PlannerOutput,
    PlanningSnapshot,
    RolloutEngine,
    RolloutResult,
    plan_step,
    rollout,
)
from .policy import MlpArchitecture, NormConstants, build_features, forward, param_count
from .scenarios import ScenarioSpec, builtin_scenario, load_scenario

__version__ = "0.1.0"
