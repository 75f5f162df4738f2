"""Scenario execution: rider -> controllers -> plant each step, with energy
and state-of-charge accounting, fixed-rate logging and the notch-filter
post-processor used for reporting.

The control loop runs at the control period (zero-order hold on machine
commands); the plant integrates at a finer fixed step. Runs are fully
deterministic: identical scenarios produce identical logs.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import filtfilt, iirnotch

from .controllers import (
    impedance_consistent_seed,
    ActuatorLag,
    KappaFilterState,
    RatioPolicy,
    VirtualChainGains,
    VirtualChainState,
    actuator_lag_step,
    estimate_rider_torque,
    generator_command_vc,
    kappa_filter_step,
    make_kappa_filter,
    motor_torque_reference_vc,
    seed_kappa_filter,
    virtual_ratio,
)
from .core import (
    BikeParameters,
    CoastdownCoeffs,
    ControlCommand,
    VehicleState,
    current_from_torque,
    kmh_to_mps,
    saturate_generator_torque,
    saturate_motor_torque,
    torque_from_current,
    total_mass,
    validate_parameters,
)
from .ident import linearize_beta
from .powertrain import (
    ClutchEvent,
    PlantInputs,
    SimulationFault,
    chain_torque,
    clutch_status,
    coastdown_force,
    derivatives_engaged,
    step_hybrid,
)
from .rider import Rider, RiderScript

MODE_NONE = "none"
MODE_VIRTUAL_CHAIN = "virtual_chain"
MODE_VIRTUAL_BIKE = "virtual_bike"

CSV_COLUMNS = (
    "t", "v", "omega_p", "omega_w", "xi", "T_h", "T_m", "T_g",
    "T_ch", "tau_v", "kappa", "P_m", "P_g", "soc",
)

# Clutch transitions closer together than this many control periods count
# as chattering; engagement is deferred inside the window.
DWELL_CONTROL_PERIODS = 2


class ScenarioError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class ControllerConfig:
    mode: str = MODE_NONE
    cadence_reference_radps: float | None = None
    fixed_ratio: float | None = None
    gains: VirtualChainGains = field(default_factory=VirtualChainGains)
    virtual_mass_kg: float | None = None
    virtual_resistance_N_per_mps: float | None = None
    linearization_speed_mps: float = kmh_to_mps(6.5)
    motor_lag_s: float = 0.0
    generator_lag_s: float = 0.0
    torque_sensor: bool = False


@dataclass(frozen=True)
class BatteryConfig:
    capacity_Wh: float = 250.0
    initial_soc: float = 0.5
    charge_efficiency: float = 1.0
    discharge_efficiency: float = 1.0


@dataclass(frozen=True)
class BrakeInterval:
    start_s: float
    end_s: float
    torque_Nm: float  # <= 0, opposing motion


@dataclass(frozen=True)
class Scenario:
    bike: BikeParameters
    coastdown: CoastdownCoeffs
    rider: RiderScript
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    duration_s: float = 10.0
    plant_dt_s: float = 0.001
    control_period_s: float = 0.01
    initial_speed_mps: float = 0.0
    initial_cadence_radps: float = 0.0
    linear_plant: bool = False
    notch_q: float = 5.0
    speed_noise_std_radps: float = 0.0
    seed: int = 0
    brakes: tuple[BrakeInterval, ...] = ()
    name: str = "scenario"

    def validate(self) -> list[str]:
        problems = []
        report = validate_parameters(self.bike)
        problems.extend(report.violations)
        c = self.coastdown
        if min(c.quadratic_N_per_mps2, c.linear_N_per_mps, c.constant_N) < 0.0:
            problems.append("coast-down coefficients must be non-negative")
        if self.duration_s <= 0.0:
            problems.append("duration_s must be positive")
        if self.plant_dt_s <= 0.0 or self.control_period_s <= 0.0:
            problems.append("plant_dt_s and control_period_s must be positive")
        else:
            ratio = self.control_period_s / self.plant_dt_s
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                problems.append("control_period_s must be an integer multiple of plant_dt_s")
        if self.rider.horizon_s < self.duration_s - 1e-9:
            problems.append(
                f"rider script horizon {self.rider.horizon_s}s shorter than duration {self.duration_s}s"
            )
        cc = self.controller
        if cc.mode not in (MODE_NONE, MODE_VIRTUAL_CHAIN, MODE_VIRTUAL_BIKE):
            problems.append(f"unknown controller mode {cc.mode!r}")
        if cc.mode in (MODE_VIRTUAL_CHAIN, MODE_VIRTUAL_BIKE):
            if (cc.cadence_reference_radps is None) == (cc.fixed_ratio is None):
                problems.append(
                    "set exactly one of cadence_reference_radps or fixed_ratio"
                )
            elif cc.fixed_ratio is not None and cc.fixed_ratio < self.bike.chain_ratio:
                problems.append("fixed virtual ratio below the mechanical chain ratio")
            elif cc.cadence_reference_radps is not None and cc.cadence_reference_radps <= 0.0:
                problems.append("cadence reference must be positive")
        if cc.mode == MODE_VIRTUAL_BIKE:
            if cc.virtual_mass_kg is None or cc.virtual_resistance_N_per_mps is None:
                problems.append("virtual_bike mode needs virtual_mass_kg and virtual_resistance_N_per_mps")
            elif min(cc.virtual_mass_kg, cc.virtual_resistance_N_per_mps) <= 0.0:
                problems.append("virtual mass and resistance must be positive")
        if not 0.0 <= self.battery.initial_soc <= 1.0:
            problems.append("initial_soc must be within [0, 1]")
        if self.battery.capacity_Wh <= 0.0:
            problems.append("battery capacity must be positive")
        for brake in self.brakes:
            if brake.torque_Nm > 0.0:
                problems.append("brake torque must be <= 0")
            if brake.end_s <= brake.start_s:
                problems.append("brake interval must have end_s > start_s")
        if self.initial_speed_mps < 0.0:
            problems.append("initial speed must be >= 0")
        return problems


@dataclass
class SimLog:
    t: list = field(default_factory=list)
    v: list = field(default_factory=list)
    omega_p: list = field(default_factory=list)
    omega_w: list = field(default_factory=list)
    xi: list = field(default_factory=list)
    T_h: list = field(default_factory=list)
    T_m: list = field(default_factory=list)
    T_g: list = field(default_factory=list)
    T_ch: list = field(default_factory=list)
    tau_v: list = field(default_factory=list)
    kappa: list = field(default_factory=list)
    P_m: list = field(default_factory=list)
    P_g: list = field(default_factory=list)
    soc: list = field(default_factory=list)
    # References before saturation, for saturation analysis (not in the CSV).
    motor_ref_Nm: list = field(default_factory=list)
    generator_ref_Nm: list = field(default_factory=list)
    clutch_events: list = field(default_factory=list)
    saturation_events: list = field(default_factory=list)
    branch_switches: list = field(default_factory=list)
    soc_clamp_events: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    def window(self, t0: float, t1: float) -> slice:
        """Index slice of samples with t0 <= t < t1."""
        lo = next((i for i, t in enumerate(self.t) if t >= t0 - 1e-12), len(self.t))
        hi = next((i for i, t in enumerate(self.t) if t >= t1 - 1e-12), len(self.t))
        return slice(lo, hi)


@dataclass(frozen=True)
class EnergyAudit:
    human_work_J: float
    kinetic_delta_J: float
    battery_delta_J: float
    coastdown_dissipation_J: float
    brake_dissipation_J: float
    clutch_loss_J: float

    @property
    def residual_J(self) -> float:
        return self.human_work_J - (
            self.kinetic_delta_J
            + self.battery_delta_J
            + self.coastdown_dissipation_J
            + self.brake_dissipation_J
            + self.clutch_loss_J
        )

    @property
    def relative_error(self) -> float:
        scale = max(
            abs(self.human_work_J),
            abs(self.kinetic_delta_J),
            self.coastdown_dissipation_J + self.brake_dissipation_J,
            1.0,
        )
        return abs(self.residual_J) / scale


@dataclass
class SimResult:
    scenario: Scenario
    log: SimLog
    energy: EnergyAudit
    final_state: VehicleState
    beta_N_per_mps: float
    plant_coastdown: CoastdownCoeffs


def soc_update(
    soc: float,
    motor_power_W: float,
    generator_power_W: float,
    capacity_Wh: float,
    efficiencies: tuple[float, float],
    dt_s: float,
) -> tuple[float, bool]:
    """One battery bookkeeping step; generator_power_W is the electrical
    power absorbed by the generator (positive when charging). Returns the
    new SOC and whether clamping occurred."""
    if capacity_Wh <= 0.0:
        raise ValueError("capacity must be positive")
    eta_chg, eta_dis = efficiencies
    drain = motor_power_W / eta_dis - eta_chg * generator_power_W
    raw = soc - dt_s * drain / (3600.0 * capacity_Wh)
    clamped = min(max(raw, 0.0), 1.0)
    return clamped, clamped != raw


def _brake_torque_at(brakes, t: float) -> float:
    for interval in brakes:
        if interval.start_s <= t < interval.end_s:
            return interval.torque_Nm
    return 0.0


def run_scenario(scenario: Scenario) -> SimResult:
    problems = scenario.validate()
    if problems:
        raise ScenarioError(problems)
    try:
        return _run_scenario(scenario)
    except OverflowError as exc:
        raise SimulationFault(f"floating-point overflow: {exc}") from exc


def _run_scenario(scenario: Scenario) -> SimResult:

    p = scenario.bike
    cc = scenario.controller
    beta = linearize_beta(scenario.coastdown, cc.linearization_speed_mps)
    if scenario.linear_plant:
        plant_c = CoastdownCoeffs(0.0, beta, 0.0)
    else:
        plant_c = scenario.coastdown

    h = scenario.control_period_s
    dt = scenario.plant_dt_s
    n_sub = round(h / dt)
    n_ctrl = int(math.floor(scenario.duration_s / h + 1e-9))
    dwell_s = DWELL_CONTROL_PERIODS * h

    rider = Rider(scenario.rider)
    rng = random.Random(scenario.seed)
    noise = scenario.speed_noise_std_radps

    policy = None
    if cc.mode != MODE_NONE:
        policy = RatioPolicy(
            min_ratio=p.chain_ratio,
            fixed_ratio=cc.fixed_ratio,
            cadence_reference_radps=cc.cadence_reference_radps,
        )
    vc_state = VirtualChainState()
    kappa_filter: KappaFilterState | None = None
    if cc.mode == MODE_VIRTUAL_BIKE:
        kappa_filter = make_kappa_filter(
            total_mass(p), beta, cc.virtual_mass_kg, cc.virtual_resistance_N_per_mps, h
        )
    motor_lag = ActuatorLag(cc.motor_lag_s)
    generator_lag = ActuatorLag(cc.generator_lag_s)
    applied_tm = 0.0
    applied_tg = 0.0

    # Initial clutch mode from the instantaneous speeds and chain torque.
    pedal0 = scenario.initial_cadence_radps
    v0 = scenario.initial_speed_mps
    th0 = rider.torque(0.0, pedal0)
    engaged0 = clutch_status(
        v0 / p.wheel_radius_m, pedal0, chain_torque(th0, 0.0, p.chain_ratio), p.chain_ratio
    )
    state = VehicleState(0.0, v0, pedal0, engaged0, scenario.battery.initial_soc)

    log = SimLog()
    last_transition = -math.inf
    human_work = 0.0
    coast_diss = 0.0
    brake_diss = 0.0
    clutch_loss = 0.0
    efficiencies = (scenario.battery.charge_efficiency, scenario.battery.discharge_efficiency)

    def kinetic(s: VehicleState) -> float:
        return 0.5 * total_mass(p) * s.speed_mps**2 \
            + 0.5 * p.generator_inertia_kgm2 * s.pedal_speed_radps**2

    ke_start = kinetic(state)
    soc_start = state.soc_fraction

    for k in range(n_ctrl):
        t = k * h
        ww = state.speed_mps / p.wheel_radius_m
        wp = state.pedal_speed_radps
        meas_ww = max(ww + (rng.gauss(0.0, noise) if noise else 0.0), 0.0)
        meas_wp = wp + (rng.gauss(0.0, noise) if noise else 0.0)
        th_now = rider.torque(t, wp)

        tau_v = math.nan
        kappa = math.nan
        tm_ref = 0.0
        tg_ref = 0.0
        if cc.mode != MODE_NONE:
            tau_v = virtual_ratio(policy, meas_ww)
            ig_meas = current_from_torque(p.generator_torque_constant_Nm_per_A, applied_tg)
            tg_ref, vc_new = generator_command_vc(
                vc_state, meas_wp, meas_ww, tau_v, ig_meas, h,
                cc.gains, p.generator_torque_constant_Nm_per_A, p.generator_torque_limit_Nm,
            )
            if vc_new.active_branch != vc_state.active_branch:
                log.branch_switches.append((t, vc_new.active_branch))
            vc_state = vc_new

            sensor = th_now if cc.torque_sensor else None
            estimate = estimate_rider_torque(applied_tg, state.clutch_engaged, sensor)
            if state.clutch_engaged:
                # Parallel mode: the mechanical chain closes the loop; the
                # motor applies nothing. The scaling filter re-seeds at the
                # next disengagement.
                tm_ref = 0.0
                if kappa_filter is not None and kappa_filter.initialized:
                    kappa_filter = replace(kappa_filter, initialized=False)
            else:
                est = estimate if estimate is not None else 0.0
                if cc.mode == MODE_VIRTUAL_CHAIN:
                    tm_ref = motor_torque_reference_vc(est, tau_v)
                else:
                    scaled = est / tau_v
                    if not kappa_filter.initialized:
                        # Seed on the virtual trajectory through the current
                        # speed; the filter then carries it forward.
                        seed_force = impedance_consistent_seed(
                            total_mass(p), beta,
                            cc.virtual_mass_kg, cc.virtual_resistance_N_per_mps,
                            h, state.speed_mps, scaled / p.wheel_radius_m,
                        )
                        tm_ref = seed_force * p.wheel_radius_m
                        kappa_filter = seed_kappa_filter(kappa_filter, scaled, tm_ref)
                    else:
                        tm_ref, kappa_filter = kappa_filter_step(kappa_filter, scaled, h)
                    if abs(scaled) > 1e-9:
                        kappa = tm_ref / scaled

        tm_sat = saturate_motor_torque(tm_ref, meas_ww, p)
        if tm_sat != tm_ref:
            log.saturation_events.append((t, "motor"))
        tg_sat = saturate_generator_torque(tg_ref, p)
        if tg_sat != tg_ref:
            log.saturation_events.append((t, "generator"))
        applied_tm, motor_lag = actuator_lag_step(motor_lag, tm_sat, h)
        applied_tg, generator_lag = actuator_lag_step(generator_lag, tg_sat, h)
        # Machine commands travel as currents; the torques the plant sees are
        # proportional through the torque constants.
        command = ControlCommand(
            motor_current_A=current_from_torque(p.motor_torque_constant_Nm_per_A, applied_tm),
            generator_current_A=current_from_torque(
                p.generator_torque_constant_Nm_per_A, applied_tg
            ),
            brake_torque_Nm=_brake_torque_at(scenario.brakes, t),
        )
        applied_tm = torque_from_current(
            p.motor_torque_constant_Nm_per_A, command.motor_current_A
        )
        applied_tg = torque_from_current(
            p.generator_torque_constant_Nm_per_A, command.generator_current_A
        )
        brake = command.brake_torque_Nm

        reaction = 0.0
        if state.clutch_engaged:
            _, reaction = derivatives_engaged(
                state, PlantInputs(th_now, applied_tm, applied_tg, brake), p, plant_c
            )
            if reaction <= 0.0:
                # The command update just released the ratchet; resolve the
                # transition at the control boundary so the logged sample is
                # mode-consistent.
                state = replace(state, clutch_engaged=False)
                log.clutch_events.append(ClutchEvent(
                    t, "disengage", state.speed_mps, state.speed_mps, wp, wp
                ))
                last_transition = t
                reaction = 0.0
        p_motor = applied_tm * ww
        p_gen = -applied_tg * wp

        log.t.append(t)
        log.v.append(state.speed_mps)
        log.omega_p.append(wp)
        log.omega_w.append(ww)
        log.xi.append(1 if state.clutch_engaged else 0)
        log.T_h.append(th_now)
        log.T_m.append(applied_tm)
        log.T_g.append(applied_tg)
        log.T_ch.append(reaction)
        log.tau_v.append(tau_v)
        log.kappa.append(kappa)
        log.P_m.append(p_motor)
        log.P_g.append(p_gen)
        log.soc.append(state.soc_fraction)
        log.motor_ref_Nm.append(tm_ref)
        log.generator_ref_Nm.append(tg_ref)

        # Machine energies over the period, accumulated at the plant rate so
        # battery bookkeeping matches the mechanical work exchanged (the
        # pedal can change speed noticeably within one control period).
        motor_energy = 0.0
        generator_energy = 0.0
        for i in range(n_sub):
            t_sub = t + i * dt
            th = rider.torque(t_sub, state.pedal_speed_radps)
            inputs = PlantInputs(th, applied_tm, applied_tg, _brake_torque_at(scenario.brakes, t_sub))
            allow = (t_sub - last_transition) >= dwell_s - 1e-12
            pre = state
            state, event = step_hybrid(state, inputs, p, plant_c, dt, allow_engage=allow)
            rider.advance_crank(0.5 * (pre.pedal_speed_radps + state.pedal_speed_radps), dt)
            if event is not None:
                log.clutch_events.append(event)
                last_transition = event.time_s
                clutch_loss += event.kinetic_energy_loss_J
            mean_pedal = 0.5 * (pre.pedal_speed_radps + state.pedal_speed_radps)
            mean_wheel = 0.5 * (pre.speed_mps + state.speed_mps) / p.wheel_radius_m
            human_work += th * mean_pedal * dt
            motor_energy += applied_tm * mean_wheel * dt
            generator_energy += -applied_tg * mean_pedal * dt
            coast_diss += 0.5 * (
                coastdown_force(plant_c, pre.speed_mps) * pre.speed_mps
                + coastdown_force(plant_c, state.speed_mps) * state.speed_mps
            ) * dt
            if inputs.brake_torque_Nm:
                brake_diss += -inputs.brake_torque_Nm * mean_wheel * dt

        new_soc, clamped = soc_update(
            state.soc_fraction, motor_energy / h, generator_energy / h,
            scenario.battery.capacity_Wh, efficiencies, h,
        )
        if clamped:
            log.soc_clamp_events.append(t)
        state = replace(state, soc_fraction=new_soc)

    energy = EnergyAudit(
        human_work_J=human_work,
        kinetic_delta_J=kinetic(state) - ke_start,
        battery_delta_J=3600.0 * scenario.battery.capacity_Wh * (state.soc_fraction - soc_start),
        coastdown_dissipation_J=coast_diss,
        brake_dissipation_J=brake_diss,
        clutch_loss_J=clutch_loss,
    )
    return SimResult(scenario, log, energy, state, beta, plant_c)


# ---------------------------------------------------------------------------
# Post-processing


def virtual_model_reference(
    log: SimLog,
    virtual_mass_kg: float,
    virtual_beta_N_per_mps: float,
    wheel_radius_m: float,
) -> list[float]:
    """Speed trace of the desired virtual vehicle fed with the logged rider
    torque, initialized at the first disengagement event. Samples before
    the disengagement are NaN. Integration is exact for the zero-order-held
    input over each control period."""
    start = None
    for k in range(1, len(log)):
        if log.xi[k - 1] == 1 and log.xi[k] == 0:
            start = k
            break
    if start is None:
        raise ValueError("log contains no disengagement event")

    h = log.t[1] - log.t[0]
    phi = math.exp(-virtual_beta_N_per_mps * h / virtual_mass_kg)
    gain = (1.0 - phi) / virtual_beta_N_per_mps
    ref = [math.nan] * len(log)
    ref[start] = log.v[start]
    for k in range(start, len(log) - 1):
        drive = log.T_h[k] / (log.tau_v[k] * wheel_radius_m)
        ref[k + 1] = phi * ref[k] + gain * drive
    return ref


def tracking_rms(log: SimLog, reference: list[float], window: slice) -> float:
    """Relative RMS of (v - reference) over the window."""
    err2 = 0.0
    ref2 = 0.0
    count = 0
    for k in range(*window.indices(len(log))):
        if math.isnan(reference[k]):
            continue
        err2 += (log.v[k] - reference[k]) ** 2
        ref2 += reference[k] ** 2
        count += 1
    if count == 0 or ref2 == 0.0:
        raise ValueError("empty comparison window")
    return math.sqrt(err2 / ref2)


def notch_postprocess(series, cadence_radps: float, q: float, sample_period_s: float):
    """Zero-phase notch at the pedal-ripple frequency (twice the crank rate)."""
    if cadence_radps <= 0.0:
        raise ValueError("cadence must be positive")
    fs = 1.0 / sample_period_s
    f0 = 2.0 * cadence_radps / (2.0 * math.pi)
    if f0 >= fs / 2.0:
        raise ValueError("notch frequency at or above Nyquist")
    b, a = iirnotch(f0, q, fs=fs)
    return filtfilt(b, a, np.asarray(series, dtype=float))


# ---------------------------------------------------------------------------
# Log serialization (fixed column order) and summary metrics


def write_log_csv(log: SimLog, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for k in range(len(log)):
            writer.writerow([
                repr(float(log.t[k])), repr(float(log.v[k])),
                repr(float(log.omega_p[k])), repr(float(log.omega_w[k])),
                int(log.xi[k]), repr(float(log.T_h[k])), repr(float(log.T_m[k])),
                repr(float(log.T_g[k])), repr(float(log.T_ch[k])),
                repr(float(log.tau_v[k])), repr(float(log.kappa[k])),
                repr(float(log.P_m[k])), repr(float(log.P_g[k])), repr(float(log.soc[k])),
            ])


def read_log_csv(path) -> SimLog:
    log = SimLog()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected log columns {header!r}")
        for row in reader:
            values = [float(x) for x in row]
            log.t.append(values[0])
            log.v.append(values[1])
            log.omega_p.append(values[2])
            log.omega_w.append(values[3])
            log.xi.append(int(values[4]))
            log.T_h.append(values[5])
            log.T_m.append(values[6])
            log.T_g.append(values[7])
            log.T_ch.append(values[8])
            log.tau_v.append(values[9])
            log.kappa.append(values[10])
            log.P_m.append(values[11])
            log.P_g.append(values[12])
            log.soc.append(values[13])
    return log


def window_mean(values, window: slice) -> float:
    chunk = values[window]
    if not chunk:
        raise ValueError("empty window")
    return sum(chunk) / len(chunk)


def steady_kappa(log: SimLog, window: slice | None = None) -> float:
    """Realized scaling at steady state: mean motor output over mean scaled
    input, ripple-insensitive. Uses the trailing quarter by default."""
    if window is None:
        window = slice(3 * len(log) // 4, len(log))
    num = 0.0
    den = 0.0
    for k in range(*window.indices(len(log))):
        if log.xi[k] == 0 and not math.isnan(log.tau_v[k]):
            num += log.T_m[k]
            den += log.T_h[k] / log.tau_v[k]
    if den == 0.0:
        return math.nan
    return num / den


def kappa_extent(log: SimLog, window: slice) -> tuple[float, float]:
    """(min, max) of the logged instantaneous scaling over valid samples."""
    values = [log.kappa[k] for k in range(*window.indices(len(log)))
              if not math.isnan(log.kappa[k])]
    if not values:
        return math.nan, math.nan
    return min(values), max(values)


# ---------------------------------------------------------------------------
# Invariant checks shared by the test suite and the run summary


def freewheel_violation(log: SimLog, chain_ratio: float) -> float:
    """Largest one-way-constraint violation tau_ch*omega_p - omega_w [rad/s];
    must never exceed EPS_SPEED."""
    worst = -math.inf
    for wp, ww in zip(log.omega_p, log.omega_w):
        worst = max(worst, chain_ratio * wp - ww)
    return worst


def engaged_sample_check(log: SimLog, chain_ratio: float) -> tuple[float, float]:
    """(max |speed lock mismatch|, min chain reaction) over engaged samples."""
    mismatch = 0.0
    min_reaction = math.inf
    for k in range(len(log)):
        if log.xi[k] == 1:
            mismatch = max(mismatch, abs(chain_ratio * log.omega_p[k] - log.omega_w[k]))
            min_reaction = min(min_reaction, log.T_ch[k])
    return mismatch, min_reaction


def min_event_gap_s(events: list[ClutchEvent]) -> float:
    if len(events) < 2:
        return math.inf
    return min(b.time_s - a.time_s for a, b in zip(events, events[1:]))


def summarize(result: SimResult) -> str:
    log = result.log
    lines = [f"scenario: {result.scenario.name}"]
    lines.append(f"samples: {len(log)} at {result.scenario.control_period_s}s")
    lines.append(f"final speed: {result.final_state.speed_mps:.4f} m/s")
    lines.append(f"soc: {log.soc[0]:.6f} -> {result.final_state.soc_fraction:.6f}")
    tail = slice(3 * len(log) // 4, len(log))
    cadence_rpm = window_mean(log.omega_p, tail) * 30.0 / math.pi
    lines.append(f"mean cadence (last quarter): {cadence_rpm:.3f} rpm")
    sk = steady_kappa(log)
    if not math.isnan(sk):
        lines.append(f"steady kappa: {sk:.4f}")
    disengaged = [k for k in range(len(log)) if log.xi[k] == 0]
    if disengaged and result.scenario.controller.mode == MODE_VIRTUAL_BIKE:
        lo, hi = kappa_extent(log, slice(disengaged[0], len(log)))
        lines.append(f"kappa range (disengaged window): [{lo:.4f}, {hi:.4f}]")
        try:
            ref = virtual_model_reference(
                log,
                result.scenario.controller.virtual_mass_kg,
                result.scenario.controller.virtual_resistance_N_per_mps,
                result.scenario.bike.wheel_radius_m,
            )
            start = next(k for k, r in enumerate(ref) if not math.isnan(r))
            rms = tracking_rms(log, ref, slice(start, len(log)))
            lines.append(f"virtual model tracking rms: {100.0 * rms:.3f} %")
        except ValueError:
            pass
    e = result.energy
    lines.append(
        "energy [J]: human %.2f, kinetic %.2f, battery %.2f, coastdown %.2f, "
        "brake %.2f, clutch %.4f, residual %.4f (relative %.3e)"
        % (
            e.human_work_J, e.kinetic_delta_J, e.battery_delta_J,
            e.coastdown_dissipation_J, e.brake_dissipation_J, e.clutch_loss_J,
            e.residual_J, e.relative_error,
        )
    )
    lines.append(f"clutch events: {len(log.clutch_events)}")
    for ev in log.clutch_events:
        lines.append(
            f"  {ev.time_s:.3f}s {ev.kind} v {ev.speed_before_mps:.4f}->{ev.speed_after_mps:.4f}"
            f" pedal {ev.pedal_before_radps:.4f}->{ev.pedal_after_radps:.4f}"
        )
    lines.append(f"saturation events: {len(log.saturation_events)}")
    lines.append(f"branch switches: {len(log.branch_switches)}")
    lines.append(f"soc clamps: {len(log.soc_clamp_events)}")
    lines.append(f"min clutch event gap: {min_event_gap_s(log.clutch_events):.4f} s")
    return "\n".join(lines) + "\n"
