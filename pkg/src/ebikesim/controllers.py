"""Control laws for the chain-less drivetrain.

Virtual chain: the drivetrain emulates a mechanical chain with designer
ratio tau_v via two decoupled loops,

  - generator cadence control, reference wheel_speed / tau_v,
  - motor torque control, reference rider_torque / tau_v.

The generator command is the minimum of a cadence PI branch and a
zero-current PI branch: below the cadence reference the zero-current branch
wins (the rider feels no load, emulating the freewheel); at the reference
the cadence branch takes over. Back-calculation keeps the idle branch's
integrator tracking the realized output so hand-overs are bumpless.

Virtual bike: on top of the virtual chain, the motor reference is shaped by
a dynamic scaling filter with continuous-time form

    (M*s + beta) / (M_v*s + beta_v)

discretized by the bilinear transform, so the closed loop behaves as a
first-order vehicle with chosen virtual mass M_v and resistance beta_v.
The DC gain beta/beta_v and high-frequency gain M/M_v are preserved
exactly by the discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


class ImpedanceCheckNotApplicable(RuntimeError):
    """Raised when a trajectory window contains engaged-mode samples."""


# ---------------------------------------------------------------------------
# Virtual-chain ratio policy


@dataclass(frozen=True)
class RatioPolicy:
    """Either a fixed virtual ratio or a constant-cadence policy.

    The constant-cadence policy returns wheel_speed / cadence_reference,
    clamped below at the mechanical chain ratio: inside the forbidden region
    the pedals cannot be asked to spin faster than the chain allows.
    """

    min_ratio: float  # mechanical chain ratio, the clamp floor
    fixed_ratio: float | None = None
    cadence_reference_radps: float | None = None

    def __post_init__(self) -> None:
        if (self.fixed_ratio is None) == (self.cadence_reference_radps is None):
            raise ValueError("set exactly one of fixed_ratio or cadence_reference_radps")
        if self.fixed_ratio is not None and self.fixed_ratio < self.min_ratio:
            raise ValueError("fixed virtual ratio below the mechanical chain ratio")


def virtual_ratio(policy: RatioPolicy, wheel_speed_radps: float) -> float:
    if wheel_speed_radps < 0.0:
        raise ValueError("wheel speed must be >= 0")
    if policy.fixed_ratio is not None:
        return policy.fixed_ratio
    if policy.cadence_reference_radps <= 0.0:
        raise ValueError("cadence reference must be positive")
    return max(policy.min_ratio, wheel_speed_radps / policy.cadence_reference_radps)


# ---------------------------------------------------------------------------
# Rider torque estimate


def estimate_rider_torque(
    generator_torque_Nm: float,
    clutch_engaged: bool,
    sensor_torque_Nm: float | None = None,
) -> float | None:
    """Rider torque from a pedal sensor, or from the generator reaction.

    Without a sensor the pedal balance gives rider_torque = -T_g, valid only
    while the chain transmits nothing (series mode). In parallel mode the
    estimate is unavailable and None is returned; the motor law then falls
    back to zero assistance, which is the parallel-mode policy anyway.
    """
    if sensor_torque_Nm is not None:
        return sensor_torque_Nm
    if not clutch_engaged:
        return -generator_torque_Nm
    return None


def motor_torque_reference_vc(rider_torque_est_Nm: float, tau_v: float) -> float:
    """Virtual-chain motor law: scale the rider torque down by the ratio."""
    if tau_v <= 0.0:
        raise ValueError("virtual ratio must be positive")
    return rider_torque_est_Nm / tau_v


# ---------------------------------------------------------------------------
# Generator command: cadence PI vs zero-current PI, min-selector, anti-windup


@dataclass(frozen=True)
class VirtualChainGains:
    cadence_kp_Nms_per_rad: float = 40.0
    cadence_ki_Nm_per_rad: float = 80.0
    zero_current_kp: float = 0.5
    zero_current_ki_per_s: float = 20.0
    # Back-calculation tracking time constant. The idle branch's integrator
    # is pulled toward the realized output at this rate instead of being
    # overwritten: overwriting erases the branch's own integral action and
    # can pin the min-selector at its minimum.
    tracking_time_s: float = 0.02


@dataclass(frozen=True)
class VirtualChainState:
    cadence_integrator_Nm: float = 0.0
    zero_current_integrator_Nm: float = 0.0
    active_branch: str = "zero_current"


def generator_command_vc(
    state: VirtualChainState,
    pedal_speed_radps: float,
    wheel_speed_radps: float,
    tau_v: float,
    generator_current_A: float,
    dt_s: float,
    gains: VirtualChainGains,
    torque_constant_Nm_per_A: float,
    torque_limit_Nm: float,
) -> tuple[float, VirtualChainState]:
    """One generator control update; returns (torque command, new state).

    Command is torque-equivalent (current * torque constant). Both branch
    integrators run every step; each also receives a back-calculation
    correction pulling it toward the realized output, so the idle branch
    tracks the active one (bumpless hand-over) and neither winds past the
    torque limit. A branch that is selected and unclipped sees zero
    correction and integrates normally.
    """
    if dt_s <= 0.0:
        raise ValueError("dt must be positive")

    cadence_error = wheel_speed_radps / tau_v - pedal_speed_radps
    current_error_Nm = -generator_current_A * torque_constant_Nm_per_A

    u_cadence = gains.cadence_kp_Nms_per_rad * cadence_error + state.cadence_integrator_Nm
    u_zero = gains.zero_current_kp * current_error_Nm + state.zero_current_integrator_Nm

    if u_cadence < u_zero:
        branch = "cadence"
    elif u_zero < u_cadence:
        branch = "zero_current"
    else:
        branch = state.active_branch  # exact tie: keep the incumbent

    u = min(u_cadence, u_zero)
    u_out = min(max(u, -torque_limit_Nm), torque_limit_Nm)

    track = dt_s / gains.tracking_time_s
    cad_int = state.cadence_integrator_Nm \
        + gains.cadence_ki_Nm_per_rad * cadence_error * dt_s \
        + track * (u_out - u_cadence)
    zc_int = state.zero_current_integrator_Nm \
        + gains.zero_current_ki_per_s * current_error_Nm * dt_s \
        + track * (u_out - u_zero)

    return u_out, VirtualChainState(cad_int, zc_int, branch)


# ---------------------------------------------------------------------------
# Virtual-bike scaling filter


def kappa_gains(
    vehicle_mass_kg: float,
    beta_N_per_mps: float,
    virtual_mass_kg: float,
    virtual_beta_N_per_mps: float,
) -> tuple[float, float]:
    """Asymptotic gains of the scaling filter: (DC, high-frequency).

    DC = beta/beta_v governs steady state; HF = M/M_v governs transients.
    Both equal to 1 degenerates the virtual bike into the virtual chain.
    """
    if min(vehicle_mass_kg, beta_N_per_mps, virtual_mass_kg, virtual_beta_N_per_mps) <= 0.0:
        raise ValueError("all masses and resistances must be positive")
    return beta_N_per_mps / virtual_beta_N_per_mps, vehicle_mass_kg / virtual_mass_kg


@dataclass(frozen=True)
class KappaFilterState:
    """First-order discrete filter y[k] = (b0*x[k] + b1*x[k-1] - a1*y[k-1]) / a0.

    Coefficients come from the bilinear transform of (M*s + beta)/(M_v*s + beta_v)
    at the control period. The pole -a1/a0 has magnitude < 1 for any positive
    virtual parameters.
    """

    b0: float
    b1: float
    a0: float
    a1: float
    period_s: float
    input_prev: float = 0.0
    output_prev: float = 0.0
    initialized: bool = False

    @property
    def dc_gain(self) -> float:
        return (self.b0 + self.b1) / (self.a0 + self.a1)

    @property
    def hf_gain(self) -> float:
        return (self.b0 - self.b1) / (self.a0 - self.a1)

    @property
    def pole(self) -> float:
        return -self.a1 / self.a0

    def frequency_gain(self, omega_radps: float) -> float:
        """Magnitude of the discrete frequency response at omega."""
        z_re, z_im = math.cos(omega_radps * self.period_s), math.sin(omega_radps * self.period_s)
        num = complex(self.b0 + self.b1 * z_re, -self.b1 * z_im)
        den = complex(self.a0 + self.a1 * z_re, -self.a1 * z_im)
        return abs(num / den)


def make_kappa_filter(
    vehicle_mass_kg: float,
    beta_N_per_mps: float,
    virtual_mass_kg: float,
    virtual_beta_N_per_mps: float,
    period_s: float,
) -> KappaFilterState:
    kappa_gains(vehicle_mass_kg, beta_N_per_mps, virtual_mass_kg, virtual_beta_N_per_mps)
    if period_s <= 0.0:
        raise ValueError("control period must be positive")
    two_over_h = 2.0 / period_s
    return KappaFilterState(
        b0=vehicle_mass_kg * two_over_h + beta_N_per_mps,
        b1=beta_N_per_mps - vehicle_mass_kg * two_over_h,
        a0=virtual_mass_kg * two_over_h + virtual_beta_N_per_mps,
        a1=virtual_beta_N_per_mps - virtual_mass_kg * two_over_h,
        period_s=period_s,
    )


def seed_kappa_filter(
    state: KappaFilterState, input_value: float, output_value: float | None = None
) -> KappaFilterState:
    """Seed at chain disengagement.

    Default output is the DC equilibrium of the instantaneous input
    (transient-free when the vehicle sits at the virtual steady state).
    Passing output_value seeds the filter at an explicit operating point,
    e.g. the impedance-consistent output for the current vehicle speed.
    """
    if output_value is None:
        output_value = state.dc_gain * input_value
    return replace(
        state,
        input_prev=input_value,
        output_prev=output_value,
        initialized=True,
    )


def impedance_consistent_seed(
    vehicle_mass_kg: float,
    beta_N_per_mps: float,
    virtual_mass_kg: float,
    virtual_beta_N_per_mps: float,
    period_s: float,
    speed_mps: float,
    drive_force_N: float,
) -> float:
    """Scaling-filter output [N] that starts the closed loop on the virtual
    model trajectory passing through the current speed.

    This is the impedance solution (M/M_v)*(x - beta_v*v) + beta*v evaluated
    at the seed point, written in the zero-order-hold-exact form so the very
    first control period already lands on the virtual model's own step. A
    DC-equilibrium seed would instead put the loop on a different solution
    of the virtual dynamics, offset by the (slowly decaying) distance from
    equilibrium.
    """
    phi = math.exp(-beta_N_per_mps * period_s / vehicle_mass_kg)
    phi_v = math.exp(-virtual_beta_N_per_mps * period_s / virtual_mass_kg)
    gain = (1.0 - phi) / beta_N_per_mps
    gain_v = (1.0 - phi_v) / virtual_beta_N_per_mps
    return ((phi_v - phi) * speed_mps + gain_v * drive_force_N) / gain


def kappa_filter_step(
    state: KappaFilterState, input_value: float, dt_s: float
) -> tuple[float, KappaFilterState]:
    if not state.initialized:
        raise RuntimeError("scaling filter used before seeding at disengagement")
    if not math.isclose(dt_s, state.period_s, rel_tol=1e-9):
        raise ValueError("filter step dt differs from the design period")
    y = (state.b0 * input_value + state.b1 * state.input_prev - state.a1 * state.output_prev) / state.a0
    return y, replace(state, input_prev=input_value, output_prev=y)


# ---------------------------------------------------------------------------
# Imposed-model verification


def impedance_solution_check(
    vehicle_mass_kg: float,
    beta_N_per_mps: float,
    virtual_mass_kg: float,
    virtual_beta_N_per_mps: float,
    speed_mps,
    drive_force_N,
    engaged,
    period_s: float,
) -> float:
    """Max deviation [N] of a logged trajectory from the imposed model

        M_v * dv/dt + beta_v * v - rider_torque/(tau_v * R_w) = 0

    with the derivative evaluated through the control-period-exact discrete
    operators (zero-order-hold plant inversion against the bilinear filter
    relation), so the continuous-time algebraic identity carries over to the
    sampled loop without discretization bias. drive_force_N is the rider
    force input rider_torque/(tau_v * R_w) at each control sample.

    Only valid on series-mode windows of a linear(ized)-plant run; any
    engaged sample raises ImpedanceCheckNotApplicable.
    """
    v = list(speed_mps)
    x = list(drive_force_N)
    if len(v) != len(x) or len(v) < 3:
        raise ValueError("need matching speed/force series of at least 3 samples")
    if any(engaged):
        raise ImpedanceCheckNotApplicable("trajectory window contains engaged-mode samples")

    m, b = vehicle_mass_kg, beta_N_per_mps
    mv, bv = virtual_mass_kg, virtual_beta_N_per_mps
    h = period_s
    phi = math.exp(-b * h / m)
    gain = (1.0 - phi) / b  # ZOH input gain of the linearized plant
    a0 = 2.0 * mv / h + bv
    a1 = bv - 2.0 * mv / h
    b0 = 2.0 * m / h + b
    b1 = b - 2.0 * m / h

    worst = 0.0
    for k in range(1, len(v) - 1):
        f_k = (v[k + 1] - phi * v[k]) / gain
        f_km1 = (v[k] - phi * v[k - 1]) / gain
        residual = (a0 * f_k + a1 * f_km1 - b0 * x[k] - b1 * x[k - 1]) / (2.0 * b)
        worst = max(worst, abs(residual))
    return worst


# ---------------------------------------------------------------------------
# Actuator lag (inner machine loops reduced to a first-order tracking model)


@dataclass(frozen=True)
class ActuatorLag:
    time_constant_s: float
    value: float = 0.0

    def __post_init__(self) -> None:
        if self.time_constant_s < 0.0:
            raise ValueError("time constant must be >= 0")


def actuator_lag_step(lag: ActuatorLag, reference: float, dt_s: float) -> tuple[float, ActuatorLag]:
    """First-order tracking of the reference; zero time constant is ideal."""
    if dt_s <= 0.0:
        raise ValueError("dt must be positive")
    if lag.time_constant_s == 0.0:
        return reference, replace(lag, value=reference)
    decay = math.exp(-dt_s / lag.time_constant_s)
    value = reference + (lag.value - reference) * decay
    return value, replace(lag, value=value)
