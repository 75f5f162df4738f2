import random

import numpy as np
import pytest

from ebikesim.core import BikeParameters, CoastdownCoeffs, kmh_to_mps, rpm_to_radps
from ebikesim.ident import linearize_beta
from ebikesim.powertrain import coastdown_force
from ebikesim.rider import RiderPhase, RiderScript
from ebikesim.sim import BatteryConfig, BrakeInterval, ControllerConfig, Scenario


@pytest.fixture
def prototype_bike():
    return BikeParameters(
        bike_mass_kg=25.0,
        rider_mass_kg=70.0,
        wheel_radius_m=0.33,
        chain_ratio=1.80,
        motor_torque_constant_Nm_per_A=1.69,
        generator_torque_constant_Nm_per_A=10.7,
    )


@pytest.fixture
def default_coastdown():
    return CoastdownCoeffs(quadratic_N_per_mps2=0.4, linear_N_per_mps=0.3, constant_N=4.0)


def simulate_coastdown_speeds(coeffs, mass_kg, v0, duration_s, dt_s):
    """Independent oracle: RK4 forward simulation of an unpowered coast."""
    n = int(round(duration_s / dt_s)) + 1
    t = np.arange(n) * dt_s

    def f(y):
        return -coastdown_force(coeffs, max(y, 0.0)) / mass_kg

    v = np.empty(n)
    y = v0
    for i in range(n):
        v[i] = y
        k1 = f(y)
        k2 = f(y + 0.5 * dt_s * k1)
        k3 = f(y + 0.5 * dt_s * k2)
        k4 = f(y + dt_s * k3)
        y = max(y + dt_s / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0)
    return t, v


def vb_preset_coastdown():
    """Coast-down family used by the virtual-bike presets: zero affine offset
    of the linearization at 6.5 km/h."""
    v_bar = kmh_to_mps(6.5)
    c = 0.25
    beta = 1.7444444444444445
    return CoastdownCoeffs(
        quadratic_N_per_mps2=c,
        linear_N_per_mps=beta - 2 * c * v_bar,
        constant_N=c * v_bar**2,
    )


def random_scenario(seed: int) -> Scenario:
    """Deterministic randomized scenario for invariant sweeps."""
    rng = random.Random(seed)
    bike = BikeParameters(
        bike_mass_kg=25.0,
        rider_mass_kg=rng.uniform(50.0, 95.0),
        wheel_radius_m=0.33,
        chain_ratio=1.80,
        motor_torque_constant_Nm_per_A=1.69,
        generator_torque_constant_Nm_per_A=10.7,
        generator_inertia_kgm2=rng.uniform(0.15, 0.6),
    )
    coast = CoastdownCoeffs(
        quadratic_N_per_mps2=rng.uniform(0.1, 0.6),
        linear_N_per_mps=rng.uniform(0.0, 1.0),
        constant_N=rng.uniform(0.5, 6.0),
    )
    phases = []
    for _ in range(rng.randint(2, 4)):
        kind = rng.choices(["pedal", "coast", "backpedal_slowdown"], [0.6, 0.25, 0.15])[0]
        phases.append(RiderPhase(
            duration_s=rng.uniform(1.5, 4.0),
            behavior=kind,
            mean_torque_Nm=rng.uniform(5.0, 35.0) if kind == "pedal" else 0.0,
            ripple_fraction=rng.uniform(0.0, 0.4),
        ))
    script = RiderScript(tuple(phases))
    duration = min(6.0, script.horizon_s)

    mode = rng.choice(["none", "virtual_chain", "virtual_bike"])
    mass = bike.bike_mass_kg + bike.rider_mass_kg
    beta = linearize_beta(coast, kmh_to_mps(6.5))
    kwargs = dict(mode=mode, torque_sensor=rng.random() < 0.5)
    if mode != "none":
        if rng.random() < 0.5:
            kwargs["cadence_reference_radps"] = rpm_to_radps(rng.uniform(15.0, 30.0))
        else:
            kwargs["fixed_ratio"] = rng.uniform(1.8, 4.0)
    if mode == "virtual_bike":
        kwargs["virtual_mass_kg"] = mass * rng.uniform(0.4, 2.5)
        kwargs["virtual_resistance_N_per_mps"] = beta * rng.uniform(0.4, 2.5)

    v0 = rng.uniform(0.0, 5.0)
    pedal0 = rng.uniform(0.0, v0 / (bike.wheel_radius_m * bike.chain_ratio)) if v0 else 0.0
    brakes = ()
    if rng.random() < 0.3:
        start = rng.uniform(1.0, duration - 1.5)
        brakes = (BrakeInterval(start, start + rng.uniform(0.3, 1.0), -rng.uniform(2.0, 15.0)),)
    return Scenario(
        bike=bike,
        coastdown=coast,
        rider=script,
        controller=ControllerConfig(**kwargs),
        battery=BatteryConfig(),
        duration_s=duration,
        initial_speed_mps=v0,
        initial_cadence_radps=pedal0,
        brakes=brakes,
        name=f"random-{seed}",
    )
