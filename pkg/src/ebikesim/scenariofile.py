"""Scenario files: TOML documents with sections [bike], [coastdown],
[rider], [controller], [sim], [battery] and a top-level schema_version.

Everything is SI except cadence (rpm) and speed (km/h), which carry
explicit unit suffixes in their key names and are converted here, at the
boundary. Unknown keys are rejected, missing required keys are reported by
name; all problems are collected into one ScenarioFileError.
"""

from __future__ import annotations

import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import BikeParameters, CoastdownCoeffs, kmh_to_mps, rpm_to_radps
from .controllers import VirtualChainGains
from .rider import BEHAVIORS, PEDAL, RiderPhase, RiderScript
from .sim import BatteryConfig, BrakeInterval, ControllerConfig, Scenario

SCHEMA_VERSION = 1


class ScenarioFileError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


_NUMBER = (int, float)

# section -> key -> (expected type(s), default); REQUIRED means no default.
_REQUIRED = object()

_SCHEMA = {
    "bike": {
        "bike_mass_kg": (_NUMBER, 25.0),
        "rider_mass_kg": (_NUMBER, _REQUIRED),
        "wheel_radius_m": (_NUMBER, 0.33),
        "chain_ratio": (_NUMBER, 1.80),
        "motor_torque_constant_Nm_per_A": (_NUMBER, 1.69),
        "generator_torque_constant_Nm_per_A": (_NUMBER, 10.7),
        "generator_inertia_kgm2": (_NUMBER, 0.4),
        "motor_torque_limit_Nm": (_NUMBER, 40.0),
        "motor_power_limit_W": (_NUMBER, 500.0),
        "generator_torque_limit_Nm": (_NUMBER, 50.0),
        "pedal_torque_sensor": (bool, False),
    },
    "coastdown": {
        "quadratic_N_per_mps2": (_NUMBER, 0.4),
        "linear_N_per_mps": (_NUMBER, 0.3),
        "constant_N": (_NUMBER, 4.0),
        "linear_plant": (bool, False),
    },
    "controller": {
        "mode": (str, _REQUIRED),
        "cadence_reference_rpm": (_NUMBER, None),
        "fixed_virtual_ratio": (_NUMBER, None),
        "cadence_kp_Nms_per_rad": (_NUMBER, 40.0),
        "cadence_ki_Nm_per_rad": (_NUMBER, 80.0),
        "zero_current_kp": (_NUMBER, 0.5),
        "zero_current_ki_per_s": (_NUMBER, 20.0),
        "tracking_time_s": (_NUMBER, 0.02),
        "virtual_mass_kg": (_NUMBER, None),
        "virtual_resistance_N_per_mps": (_NUMBER, None),
        "linearization_speed_kmh": (_NUMBER, 6.5),
        "motor_lag_s": (_NUMBER, 0.0),
        "generator_lag_s": (_NUMBER, 0.0),
    },
    "sim": {
        "duration_s": (_NUMBER, _REQUIRED),
        "plant_dt_s": (_NUMBER, 0.001),
        "control_period_s": (_NUMBER, 0.01),
        "initial_speed_kmh": (_NUMBER, 0.0),
        "initial_cadence_rpm": (_NUMBER, 0.0),
        "notch_q": (_NUMBER, 5.0),
        "speed_noise_std_radps": (_NUMBER, 0.0),
        "seed": (int, 0),
    },
    "battery": {
        "capacity_Wh": (_NUMBER, 250.0),
        "initial_soc": (_NUMBER, 0.5),
        "charge_efficiency": (_NUMBER, 1.0),
        "discharge_efficiency": (_NUMBER, 1.0),
    },
}

_PHASE_KEYS = {
    "duration_s": (_NUMBER, _REQUIRED),
    "behavior": (str, PEDAL),
    "mean_torque_Nm": (_NUMBER, 0.0),
    "ripple_fraction": (_NUMBER, 0.3),
}

_BRAKE_KEYS = {
    "start_s": (_NUMBER, _REQUIRED),
    "end_s": (_NUMBER, _REQUIRED),
    "torque_Nm": (_NUMBER, _REQUIRED),
}


def load_raw(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def sweepable_keys() -> list[str]:
    keys = []
    for section, entries in _SCHEMA.items():
        for key, (types, _) in entries.items():
            if types is _NUMBER or types is int:
                keys.append(f"{section}.{key}")
    return keys


def apply_override(raw: dict, dotted_key: str, value: float) -> dict:
    if dotted_key not in sweepable_keys():
        raise ScenarioFileError([f"unknown or non-numeric parameter key {dotted_key!r}"])
    section, key = dotted_key.split(".", 1)
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    out.setdefault(section, {})[key] = value
    return out


def _extract(section_name, table, schema, problems):
    values = {}
    for key, value in table.items():
        if key not in schema:
            problems.append(f"unknown key [{section_name}] {key}")
    for key, (types, default) in schema.items():
        if key in table:
            value = table[key]
            if types is bool and not isinstance(value, bool):
                problems.append(f"[{section_name}] {key} must be a boolean")
                value = default if default is not _REQUIRED else False
            elif types is _NUMBER and (isinstance(value, bool) or not isinstance(value, _NUMBER)):
                problems.append(f"[{section_name}] {key} must be a number")
                value = 0.0
            elif types is int and not (isinstance(value, int) and not isinstance(value, bool)):
                problems.append(f"[{section_name}] {key} must be an integer")
                value = 0
            elif types is str and not isinstance(value, str):
                problems.append(f"[{section_name}] {key} must be a string")
                value = ""
            values[key] = value
        elif default is _REQUIRED:
            problems.append(f"missing required key [{section_name}] {key}")
        else:
            values[key] = default
    return values


def build_scenario(raw: dict, name: str = "scenario") -> Scenario:
    problems: list[str] = []
    known_top = {"schema_version", "bike", "coastdown", "rider", "controller", "sim", "battery"}
    for key in raw:
        if key not in known_top:
            problems.append(f"unknown section or key {key!r}")
    version = raw.get("schema_version")
    if version is None:
        problems.append("missing required key schema_version")
    elif version != SCHEMA_VERSION:
        problems.append(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")

    sections = {}
    for section, schema in _SCHEMA.items():
        table = raw.get(section, {})
        if not isinstance(table, dict):
            problems.append(f"section [{section}] must be a table")
            table = {}
        if section == "sim":
            table = {k: v for k, v in table.items() if k != "brakes"}
        sections[section] = _extract(section, table, schema, problems)

    rider_table = raw.get("rider", {})
    phases = []
    raw_phases = rider_table.get("phases") if isinstance(rider_table, dict) else None
    if isinstance(rider_table, dict):
        for key in rider_table:
            if key != "phases":
                problems.append(f"unknown key [rider] {key}")
    if not raw_phases:
        problems.append("missing required key [rider] phases (need at least one [[rider.phases]])")
    else:
        for i, entry in enumerate(raw_phases):
            values = _extract(f"rider.phases[{i}]", entry, _PHASE_KEYS, problems)
            if values.get("behavior") not in BEHAVIORS:
                problems.append(
                    f"rider.phases[{i}] behavior must be one of {', '.join(BEHAVIORS)}"
                )
                continue
            try:
                phases.append(RiderPhase(
                    duration_s=float(values["duration_s"]),
                    behavior=values["behavior"],
                    mean_torque_Nm=float(values["mean_torque_Nm"]),
                    ripple_fraction=float(values["ripple_fraction"]),
                ))
            except ValueError as exc:
                problems.append(f"rider.phases[{i}]: {exc}")

    brakes = []
    raw_brakes = raw.get("sim", {}).get("brakes") if isinstance(raw.get("sim", {}), dict) else None
    if raw_brakes:
        for i, entry in enumerate(raw_brakes):
            values = _extract(f"sim.brakes[{i}]", entry, _BRAKE_KEYS, problems)
            if len(values) == len(_BRAKE_KEYS):
                brakes.append(BrakeInterval(
                    float(values["start_s"]), float(values["end_s"]), float(values["torque_Nm"])
                ))

    if problems:
        raise ScenarioFileError(problems)

    b = sections["bike"]
    bike = BikeParameters(
        bike_mass_kg=float(b["bike_mass_kg"]),
        rider_mass_kg=float(b["rider_mass_kg"]),
        wheel_radius_m=float(b["wheel_radius_m"]),
        chain_ratio=float(b["chain_ratio"]),
        motor_torque_constant_Nm_per_A=float(b["motor_torque_constant_Nm_per_A"]),
        generator_torque_constant_Nm_per_A=float(b["generator_torque_constant_Nm_per_A"]),
        generator_inertia_kgm2=float(b["generator_inertia_kgm2"]),
        motor_torque_limit_Nm=float(b["motor_torque_limit_Nm"]),
        motor_power_limit_W=float(b["motor_power_limit_W"]),
        generator_torque_limit_Nm=float(b["generator_torque_limit_Nm"]),
    )
    cd = sections["coastdown"]
    coastdown = CoastdownCoeffs(
        quadratic_N_per_mps2=float(cd["quadratic_N_per_mps2"]),
        linear_N_per_mps=float(cd["linear_N_per_mps"]),
        constant_N=float(cd["constant_N"]),
    )
    cc = sections["controller"]
    controller = ControllerConfig(
        mode=cc["mode"],
        cadence_reference_radps=(
            rpm_to_radps(float(cc["cadence_reference_rpm"]))
            if cc["cadence_reference_rpm"] is not None else None
        ),
        fixed_ratio=(
            float(cc["fixed_virtual_ratio"]) if cc["fixed_virtual_ratio"] is not None else None
        ),
        gains=VirtualChainGains(
            cadence_kp_Nms_per_rad=float(cc["cadence_kp_Nms_per_rad"]),
            cadence_ki_Nm_per_rad=float(cc["cadence_ki_Nm_per_rad"]),
            zero_current_kp=float(cc["zero_current_kp"]),
            zero_current_ki_per_s=float(cc["zero_current_ki_per_s"]),
            tracking_time_s=float(cc["tracking_time_s"]),
        ),
        virtual_mass_kg=(
            float(cc["virtual_mass_kg"]) if cc["virtual_mass_kg"] is not None else None
        ),
        virtual_resistance_N_per_mps=(
            float(cc["virtual_resistance_N_per_mps"])
            if cc["virtual_resistance_N_per_mps"] is not None else None
        ),
        linearization_speed_mps=kmh_to_mps(float(cc["linearization_speed_kmh"])),
        motor_lag_s=float(cc["motor_lag_s"]),
        generator_lag_s=float(cc["generator_lag_s"]),
        torque_sensor=bool(b["pedal_torque_sensor"]),
    )
    s = sections["sim"]
    bt = sections["battery"]
    scenario = Scenario(
        bike=bike,
        coastdown=coastdown,
        rider=RiderScript(tuple(phases)),
        controller=controller,
        battery=BatteryConfig(
            capacity_Wh=float(bt["capacity_Wh"]),
            initial_soc=float(bt["initial_soc"]),
            charge_efficiency=float(bt["charge_efficiency"]),
            discharge_efficiency=float(bt["discharge_efficiency"]),
        ),
        duration_s=float(s["duration_s"]),
        plant_dt_s=float(s["plant_dt_s"]),
        control_period_s=float(s["control_period_s"]),
        initial_speed_mps=kmh_to_mps(float(s["initial_speed_kmh"])),
        initial_cadence_radps=rpm_to_radps(float(s["initial_cadence_rpm"])),
        linear_plant=bool(cd["linear_plant"]),
        notch_q=float(s["notch_q"]),
        speed_noise_std_radps=float(s["speed_noise_std_radps"]),
        seed=int(s["seed"]),
        brakes=tuple(brakes),
        name=name,
    )
    more = scenario.validate()
    if more:
        raise ScenarioFileError(more)
    return scenario


def load_scenario(path, name: str | None = None) -> Scenario:
    import os

    raw = load_raw(path)
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    return build_scenario(raw, name)
