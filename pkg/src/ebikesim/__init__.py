"""Series-parallel e-bike simulation and control library.

Submodules:
  core        shared types, validation, unit and torque/current conversion
  powertrain  hybrid freewheel plant and clutch transition logic
  rider       scripted pedal-torque source
  ident       coast-down identification and local linearization
  controllers virtual-chain and virtual-bike control laws
  sim         scenario runner, energy/SOC accounting, logging, notch filter
  cli         command-line interface (run / identify / sweep)
"""

from .core import (
    BikeParameters,
    CoastdownCoeffs,
    ControlCommand,
    VehicleState,
    VirtualBikeSpec,
    total_mass,
    validate_parameters,
)
from .ident import CoastdownTrace, fit_coastdown, linearize_beta
from .rider import RiderPhase, RiderScript
from .sim import (
    BatteryConfig,
    ControllerConfig,
    Scenario,
    SimResult,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "BikeParameters",
    "CoastdownCoeffs",
    "ControlCommand",
    "VehicleState",
    "VirtualBikeSpec",
    "total_mass",
    "validate_parameters",
    "CoastdownTrace",
    "fit_coastdown",
    "linearize_beta",
    "RiderPhase",
    "RiderScript",
    "BatteryConfig",
    "ControllerConfig",
    "Scenario",
    "SimResult",
    "run_scenario",
    "__version__",
]
