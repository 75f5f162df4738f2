"""Hybrid plant: longitudinal dynamics in engaged (parallel) and disengaged
(series) freewheel modes, plus the clutch transition logic.

Force balance at the wheel:   M*dv/dt = (T_m + T_br + xi*T_ch)/R_w - F_cd(v)
Torque balance at the pedals: J_g*dOmega_p/dt = T_h + T_g - tau_ch*T_ch

The freewheel is a non-controllable one-way clutch: engaged iff the wheel
and (geared) pedal speeds are locked AND the chain transmits positive
torque; the pedal side can never outrun the wheel side.

All step functions are pure: (state, inputs) -> new state. Inputs are held
constant across one step (zero-order hold at the plant rate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    EPS_SPEED,
    BikeParameters,
    CoastdownCoeffs,
    VehicleState,
    total_mass,
)

# Minimum chain reaction torque required to latch the freewheel at contact.
# Keeps zero-torque grazing contacts from producing engage/disengage noise.
ENGAGE_COMMIT_MARGIN = 1e-6  # Nm


class SimulationFault(RuntimeError):
    """Raised when integration produces a non-finite state."""


@dataclass(frozen=True)
class PlantInputs:
    human_torque_Nm: float
    motor_torque_Nm: float
    generator_torque_Nm: float
    brake_torque_Nm: float = 0.0


@dataclass(frozen=True)
class StateDerivative:
    dv_dt_mps2: float
    dpedal_dt_radps2: float
    # True when J_g == 0 leaves the pedal equation algebraic (resolved by
    # the generator control loop, not by integration).
    pedal_algebraic: bool = False


@dataclass(frozen=True)
class ClutchEvent:
    time_s: float
    kind: str  # "engage" or "disengage"
    speed_before_mps: float
    speed_after_mps: float
    pedal_before_radps: float
    pedal_after_radps: float
    kinetic_energy_loss_J: float = 0.0


def coastdown_force(c: CoastdownCoeffs, v: float) -> float:
    """Resistive force C*v^2 + B*v + A at speed v >= 0."""
    if v < 0.0:
        raise ValueError("coast-down force is defined for v >= 0")
    return (c.quadratic_N_per_mps2 * v + c.linear_N_per_mps) * v + c.constant_N


def clutch_status(
    wheel_speed_radps: float,
    pedal_speed_radps: float,
    chain_torque_Nm: float,
    chain_ratio: float,
) -> bool:
    """Engaged iff speeds are locked (within EPS_SPEED) and the chain pulls."""
    locked = abs(wheel_speed_radps - chain_ratio * pedal_speed_radps) <= EPS_SPEED
    return locked and chain_torque_Nm > 0.0


def chain_torque(human_torque_Nm: float, generator_torque_Nm: float, chain_ratio: float) -> float:
    """Chain torque from the pedal balance with the pedal inertia neglected."""
    if chain_ratio <= 0.0:
        raise ValueError("chain ratio must be positive")
    return (human_torque_Nm + generator_torque_Nm) / chain_ratio


def effective_mass(p: BikeParameters) -> float:
    """Vehicle mass plus the pedal-side inertia reflected at the wheel."""
    r = p.chain_ratio * p.wheel_radius_m
    return total_mass(p) + p.generator_inertia_kgm2 / (r * r)


def _dv_disengaged(v, inputs, p, c):
    m = total_mass(p)
    drive = (inputs.motor_torque_Nm + inputs.brake_torque_Nm) / p.wheel_radius_m
    return (drive - coastdown_force(c, max(v, 0.0))) / m


def _dv_engaged(v, inputs, p, c):
    drive = (inputs.motor_torque_Nm + inputs.brake_torque_Nm) / p.wheel_radius_m
    drive += (inputs.human_torque_Nm + inputs.generator_torque_Nm) / (
        p.chain_ratio * p.wheel_radius_m
    )
    return (drive - coastdown_force(c, max(v, 0.0))) / effective_mass(p)


def derivatives_disengaged(
    state: VehicleState,
    inputs: PlantInputs,
    p: BikeParameters,
    c: CoastdownCoeffs,
) -> StateDerivative:
    """Series mode: wheel and pedal evolve independently."""
    dv = _dv_disengaged(state.speed_mps, inputs, p, c)
    net_pedal = inputs.human_torque_Nm + inputs.generator_torque_Nm
    if p.generator_inertia_kgm2 > 0.0:
        return StateDerivative(dv, net_pedal / p.generator_inertia_kgm2)
    return StateDerivative(dv, 0.0, pedal_algebraic=net_pedal != 0.0)


def derivatives_engaged(
    state: VehicleState,
    inputs: PlantInputs,
    p: BikeParameters,
    c: CoastdownCoeffs,
) -> tuple[StateDerivative, float]:
    """Parallel mode: single degree of freedom with the speed-lock constraint.

    Returns the derivative and the implied chain reaction torque, used by
    the stepper to detect disengagement (reaction <= 0 releases the ratchet).
    """
    ww = state.wheel_speed_radps(p.wheel_radius_m)
    if abs(ww - p.chain_ratio * state.pedal_speed_radps) > max(EPS_SPEED, 1e-9 * abs(ww)):
        raise ValueError("engaged-mode derivative requires the speed lock")
    dv = _dv_engaged(state.speed_mps, inputs, p, c)
    dpedal = dv / (p.chain_ratio * p.wheel_radius_m)
    reaction = (
        inputs.human_torque_Nm
        + inputs.generator_torque_Nm
        - p.generator_inertia_kgm2 * dpedal
    ) / p.chain_ratio
    return StateDerivative(dv, dpedal), reaction


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _kinetic_energy(v, pedal, p):
    return 0.5 * total_mass(p) * v * v + 0.5 * p.generator_inertia_kgm2 * pedal * pedal


def _couple_momentum(v, pedal, p):
    """Inelastic lock of pedal to wheel conserving generalized momentum."""
    r = p.chain_ratio * p.wheel_radius_m
    if p.generator_inertia_kgm2 > 0.0:
        v_plus = (total_mass(p) * v + p.generator_inertia_kgm2 * pedal / r) / effective_mass(p)
    else:
        v_plus = v
    return v_plus, v_plus / r


def step_hybrid(
    state: VehicleState,
    inputs: PlantInputs,
    p: BikeParameters,
    c: CoastdownCoeffs,
    dt_s: float,
    allow_engage: bool = True,
) -> tuple[VehicleState, ClutchEvent | None]:
    """Advance one fixed step (explicit RK4) in the current clutch mode and
    resolve freewheel transitions at the step boundary.

    Engagement requires pedal-side overrun with positive reaction torque at
    the lock; otherwise the pedal rides the one-way constraint without
    latching. `allow_engage=False` defers latching (dwell enforcement); the
    constraint itself is still honoured via a momentum-conserving clamp.
    """
    if dt_s <= 0.0:
        raise ValueError("dt must be positive")

    t = state.time_s + dt_s
    event = None

    if state.clutch_engaged:
        v = _rk4(lambda y: _dv_engaged(y, inputs, p, c), state.speed_mps, dt_s)
        if v < 0.0:
            v = 0.0
        pedal = v / (p.chain_ratio * p.wheel_radius_m)
        new = VehicleState(t, v, pedal, True, state.soc_fraction)
        _, reaction = derivatives_engaged(new, inputs, p, c)
        if reaction <= 0.0:
            new = VehicleState(t, v, pedal, False, state.soc_fraction)
            event = ClutchEvent(t, "disengage", v, v, pedal, pedal)
    else:
        v = _rk4(lambda y: _dv_disengaged(y, inputs, p, c), state.speed_mps, dt_s)
        if v < 0.0:
            v = 0.0
        if p.generator_inertia_kgm2 > 0.0:
            dpedal = (inputs.human_torque_Nm + inputs.generator_torque_Nm) / p.generator_inertia_kgm2
            pedal = state.pedal_speed_radps + dpedal * dt_s
        else:
            pedal = state.pedal_speed_radps
        ww = v / p.wheel_radius_m
        if p.chain_ratio * pedal > ww:
            # Pedal side tries to overrun the wheel: the ratchet binds.
            v_plus, pedal_plus = _couple_momentum(v, pedal, p)
            latched = False
            if allow_engage:
                candidate = VehicleState(t, v_plus, pedal_plus, True, state.soc_fraction)
                _, reaction = derivatives_engaged(candidate, inputs, p, c)
                if reaction > ENGAGE_COMMIT_MARGIN:
                    loss = _kinetic_energy(v, pedal, p) - _kinetic_energy(v_plus, pedal_plus, p)
                    event = ClutchEvent(t, "engage", v, v_plus, pedal, pedal_plus, loss)
                    new = candidate
                    latched = True
            if not latched:
                # Contact without latching: momentum transfers, mode stays
                # disengaged and the pair separates again if nothing pulls.
                new = VehicleState(t, v_plus, v_plus / (p.chain_ratio * p.wheel_radius_m),
                                   False, state.soc_fraction)
        else:
            new = VehicleState(t, v, pedal, False, state.soc_fraction)

    if not (math.isfinite(new.speed_mps) and math.isfinite(new.pedal_speed_radps)):
        raise SimulationFault(f"non-finite state at t={t:.6f}s")
    return new, event
