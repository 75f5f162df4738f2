"""Shared domain types, parameter validation and unit conversions.

All quantities are SI (m, kg, s, rad, N, Nm, W). Cadence in rpm and speed
in km/h exist only at the CLI boundary; the converters live here so every
module agrees on the factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Tolerance for freewheel speed-lock equality tests. Fixed-step simulation
# needs an explicit band; one micro-rad/s is far below any physical signal.
EPS_SPEED = 1e-6  # rad/s

# Engaged-mode chain reaction torque must stay above -EPS_TORQUE.
EPS_TORQUE = 1e-9  # Nm

RPM_TO_RADPS = math.pi / 30.0
KMH_TO_MPS = 1.0 / 3.6


def rpm_to_radps(rpm: float) -> float:
    return rpm * RPM_TO_RADPS


def radps_to_rpm(radps: float) -> float:
    return radps / RPM_TO_RADPS


def kmh_to_mps(kmh: float) -> float:
    return kmh * KMH_TO_MPS


def mps_to_kmh(mps: float) -> float:
    return mps / KMH_TO_MPS


@dataclass(frozen=True)
class BikeParameters:
    """Physical constants of the plant and its two electrical machines.

    chain_ratio follows the convention wheel_speed = chain_ratio * pedal_speed,
    so a ratio > 1 means the pedals turn slower than the wheel.
    generator_inertia_kgm2 is the lumped pedal-side inertia (generator rotor,
    cranks and the rider's legs, reflected at the pedal axis); 0 reproduces
    the massless-pedal simplification.
    """

    bike_mass_kg: float
    rider_mass_kg: float
    wheel_radius_m: float
    chain_ratio: float
    motor_torque_constant_Nm_per_A: float
    generator_torque_constant_Nm_per_A: float
    generator_inertia_kgm2: float = 0.4
    motor_torque_limit_Nm: float = 40.0
    motor_power_limit_W: float = 500.0
    generator_torque_limit_Nm: float = 50.0


def total_mass(p: BikeParameters) -> float:
    """Vehicle mass: bike plus rider. Always derived, never stored."""
    return p.bike_mass_kg + p.rider_mass_kg


@dataclass(frozen=True)
class CoastdownCoeffs:
    """Speed-dependent resistance model F(v) = C*v^2 + B*v + A.

    A: rolling resistance [N], B: viscous friction [N/(m/s)],
    C: aerodynamic drag [N/(m/s)^2]. All non-negative.
    """

    quadratic_N_per_mps2: float
    linear_N_per_mps: float
    constant_N: float


@dataclass(frozen=True)
class VehicleState:
    """Continuous states plus the discrete freewheel clutch mode."""

    time_s: float
    speed_mps: float
    pedal_speed_radps: float
    clutch_engaged: bool
    soc_fraction: float

    def wheel_speed_radps(self, wheel_radius_m: float) -> float:
        return self.speed_mps / wheel_radius_m


@dataclass(frozen=True)
class ControlCommand:
    """Machine currents and brake torque applied over one control period.

    brake_torque_Nm <= 0 (always opposes motion).
    """

    motor_current_A: float = 0.0
    generator_current_A: float = 0.0
    brake_torque_Nm: float = 0.0


@dataclass(frozen=True)
class VirtualBikeSpec:
    """Desired virtual vehicle: mass, resistance and the ratio policy.

    Exactly one of cadence_reference_radps (continuously varying ratio that
    holds the pedal cadence) or fixed_ratio must be set.
    """

    virtual_mass_kg: float
    virtual_resistance_N_per_mps: float
    cadence_reference_radps: float | None = None
    fixed_ratio: float | None = None

    def __post_init__(self) -> None:
        if (self.cadence_reference_radps is None) == (self.fixed_ratio is None):
            raise ValueError(
                "exactly one of cadence_reference_radps or fixed_ratio must be set"
            )


@dataclass
class ValidationReport:
    passed: bool
    violations: list[str] = field(default_factory=list)


def validate_parameters(p: BikeParameters) -> ValidationReport:
    """Check every BikeParameters invariant; report-valued, never raises."""
    violations = []
    positive = [
        ("bike_mass_kg", p.bike_mass_kg),
        ("rider_mass_kg", p.rider_mass_kg),
        ("wheel_radius_m", p.wheel_radius_m),
        ("chain_ratio", p.chain_ratio),
        ("motor_torque_constant_Nm_per_A", p.motor_torque_constant_Nm_per_A),
        ("generator_torque_constant_Nm_per_A", p.generator_torque_constant_Nm_per_A),
        ("motor_torque_limit_Nm", p.motor_torque_limit_Nm),
        ("motor_power_limit_W", p.motor_power_limit_W),
        ("generator_torque_limit_Nm", p.generator_torque_limit_Nm),
    ]
    for name, value in positive:
        if not value > 0.0 or not math.isfinite(value):
            violations.append(f"{name} must be strictly positive (got {value!r})")
    if p.generator_inertia_kgm2 < 0.0 or not math.isfinite(p.generator_inertia_kgm2):
        violations.append(
            f"generator_inertia_kgm2 must be >= 0 (got {p.generator_inertia_kgm2!r})"
        )
    return ValidationReport(passed=not violations, violations=violations)


def torque_from_current(constant_Nm_per_A: float, current_A: float) -> float:
    """Machine torque is proportional to current through the torque constant."""
    if constant_Nm_per_A <= 0.0:
        raise ValueError("torque constant must be positive")
    return constant_Nm_per_A * current_A


def current_from_torque(constant_Nm_per_A: float, torque_Nm: float) -> float:
    if constant_Nm_per_A <= 0.0:
        raise ValueError("torque constant must be positive")
    return torque_Nm / constant_Nm_per_A


def saturate_motor_torque(
    torque_Nm: float, wheel_speed_radps: float, p: BikeParameters
) -> float:
    """Apply the torque limit first, then the power limit at the current
    wheel speed. The ordering is part of the contract: at low speed the
    torque limit binds, at high speed the power limit shaves the command.
    """
    t = min(max(torque_Nm, -p.motor_torque_limit_Nm), p.motor_torque_limit_Nm)
    w = abs(wheel_speed_radps)
    if w > 0.0 and abs(t) * w > p.motor_power_limit_W:
        t = math.copysign(p.motor_power_limit_W / w, t)
    return t


def saturate_generator_torque(torque_Nm: float, p: BikeParameters) -> float:
    return min(max(torque_Nm, -p.generator_torque_limit_Nm), p.generator_torque_limit_Nm)
