"""Quadrotor with off-center slung load: plant model, cascade controller,
closed-loop simulator and analysis tools."""

from .params import Gains, GeneralizedState, Params, hover_state
from .controller import (
    ControlCommand,
    ErrorState,
    Setpoint,
    attitude_command,
    cascade_step,
)
from .dynamics import (
    DragSet,
    ModelTerms,
    ReducedSwingTerms,
    cable_tension,
    coriolis_matrix,
    forward_dynamics,
    gravity_vector,
    mass_matrix,
    total_energy,
)
from .simulator import (
    CSV_COLUMNS,
    DisturbanceEvent,
    Scenario,
    SetpointSegment,
    TrajectoryLog,
    inject_disturbance,
    integrate_step,
    run_scenario,
)
from . import analysis, exceptions, scenario_io, spatial, verify

__version__ = "0.1.0"

__all__ = [
    "Gains",
    "GeneralizedState",
    "Params",
    "hover_state",
    "ControlCommand",
    "ErrorState",
    "Setpoint",
    "attitude_command",
    "cascade_step",
    "DragSet",
    "ModelTerms",
    "ReducedSwingTerms",
    "cable_tension",
    "coriolis_matrix",
    "forward_dynamics",
    "gravity_vector",
    "mass_matrix",
    "total_energy",
    "CSV_COLUMNS",
    "DisturbanceEvent",
    "Scenario",
    "SetpointSegment",
    "TrajectoryLog",
    "inject_disturbance",
    "integrate_step",
    "run_scenario",
    "analysis",
    "exceptions",
    "scenario_io",
    "spatial",
    "verify",
    "__version__",
]
