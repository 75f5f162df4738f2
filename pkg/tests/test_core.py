import math

import pytest
from hypothesis import given, strategies as st

from ebikesim.core import (
    BikeParameters,
    ControlCommand,
    current_from_torque,
    kmh_to_mps,
    radps_to_rpm,
    rpm_to_radps,
    saturate_generator_torque,
    saturate_motor_torque,
    torque_from_current,
    total_mass,
    validate_parameters,
)


def test_validate_prototype_parameters_pass(prototype_bike):
    report = validate_parameters(prototype_bike)
    assert report.passed
    assert report.violations == []


def test_validate_zero_wheel_radius_names_field(prototype_bike):
    bad = BikeParameters(
        bike_mass_kg=prototype_bike.bike_mass_kg,
        rider_mass_kg=prototype_bike.rider_mass_kg,
        wheel_radius_m=0.0,
        chain_ratio=prototype_bike.chain_ratio,
        motor_torque_constant_Nm_per_A=prototype_bike.motor_torque_constant_Nm_per_A,
        generator_torque_constant_Nm_per_A=prototype_bike.generator_torque_constant_Nm_per_A,
    )
    report = validate_parameters(bad)
    assert not report.passed
    assert any("wheel_radius_m" in v for v in report.violations)


def test_validate_zero_pedal_inertia_allowed(prototype_bike):
    simplified = BikeParameters(
        bike_mass_kg=25.0,
        rider_mass_kg=70.0,
        wheel_radius_m=0.33,
        chain_ratio=1.80,
        motor_torque_constant_Nm_per_A=1.69,
        generator_torque_constant_Nm_per_A=10.7,
        generator_inertia_kgm2=0.0,
    )
    assert validate_parameters(simplified).passed


def test_validate_negative_inertia_rejected():
    bad = BikeParameters(25.0, 70.0, 0.33, 1.8, 1.69, 10.7, generator_inertia_kgm2=-0.1)
    report = validate_parameters(bad)
    assert not report.passed
    assert any("generator_inertia_kgm2" in v for v in report.violations)


def test_total_mass(prototype_bike):
    assert total_mass(prototype_bike) == 95.0


def test_torque_from_current_examples():
    assert torque_from_current(1.69, 2.0) == pytest.approx(3.38)
    assert torque_from_current(10.7, 0.0) == 0.0
    with pytest.raises(ValueError):
        torque_from_current(0.0, 1.0)
    with pytest.raises(ValueError):
        current_from_torque(-1.0, 1.0)


@given(
    constant=st.floats(0.1, 50.0),
    value=st.floats(-1e3, 1e3, allow_nan=False),
)
def test_torque_current_round_trip(constant, value):
    assert current_from_torque(constant, torque_from_current(constant, value)) == pytest.approx(
        value, rel=1e-12, abs=1e-12
    )


def test_motor_saturation_torque_then_power(prototype_bike):
    # torque limit binds at low speed
    assert saturate_motor_torque(80.0, 1.0, prototype_bike) == prototype_bike.motor_torque_limit_Nm
    # power limit shaves the torque-feasible command at high wheel speed
    w = 20.0
    t = saturate_motor_torque(30.0, w, prototype_bike)
    assert t == pytest.approx(prototype_bike.motor_power_limit_W / w)
    assert t < 30.0
    # at standstill only the torque limit applies
    assert saturate_motor_torque(30.0, 0.0, prototype_bike) == 30.0
    # sign is preserved
    assert saturate_motor_torque(-80.0, 1.0, prototype_bike) == -prototype_bike.motor_torque_limit_Nm


@given(
    torque=st.floats(-500.0, 500.0),
    wheel_speed=st.floats(0.0, 60.0),
)
def test_motor_saturation_invariants(torque, wheel_speed):
    bike = BikeParameters(25.0, 70.0, 0.33, 1.8, 1.69, 10.7)
    t = saturate_motor_torque(torque, wheel_speed, bike)
    assert abs(t) <= bike.motor_torque_limit_Nm + 1e-12
    assert abs(t) * wheel_speed <= bike.motor_power_limit_W * (1.0 + 1e-12)


def test_generator_saturation(prototype_bike):
    assert saturate_generator_torque(-120.0, prototype_bike) == -prototype_bike.generator_torque_limit_Nm
    assert saturate_generator_torque(3.0, prototype_bike) == 3.0


def test_control_command_defaults():
    cmd = ControlCommand()
    assert cmd.motor_current_A == 0.0
    assert cmd.generator_current_A == 0.0
    assert cmd.brake_torque_Nm == 0.0


def test_virtual_bike_spec_needs_exactly_one_policy():
    from ebikesim.core import VirtualBikeSpec

    spec = VirtualBikeSpec(60.0, 0.8, cadence_reference_radps=2.0)
    assert spec.fixed_ratio is None
    VirtualBikeSpec(60.0, 0.8, fixed_ratio=3.0)
    with pytest.raises(ValueError):
        VirtualBikeSpec(60.0, 0.8)
    with pytest.raises(ValueError):
        VirtualBikeSpec(60.0, 0.8, cadence_reference_radps=2.0, fixed_ratio=3.0)


def test_unit_conversions():
    assert rpm_to_radps(20.0) == pytest.approx(2.0943951023931953)
    assert radps_to_rpm(rpm_to_radps(37.3)) == pytest.approx(37.3)
    assert kmh_to_mps(6.5) == pytest.approx(1.8055555555555556)
    assert math.isclose(kmh_to_mps(3.6), 1.0)
