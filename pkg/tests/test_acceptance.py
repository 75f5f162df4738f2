"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` (or -rA) to see the lines.
"""

import math
import random
import time
from dataclasses import replace
from importlib import resources

import numpy as np
import pytest

from ebikesim.controllers import (
    impedance_solution_check,
    kappa_gains,
    make_kappa_filter,
)
from ebikesim.core import (
    EPS_SPEED,
    BikeParameters,
    CoastdownCoeffs,
    kmh_to_mps,
    radps_to_rpm,
    rpm_to_radps,
    total_mass,
)
from ebikesim.ident import CoastdownTrace, fit_coastdown, linearize_beta
from ebikesim.powertrain import coastdown_force
from ebikesim.rider import RiderPhase, RiderScript
from ebikesim.scenariofile import load_scenario
from ebikesim.sim import (
    ControllerConfig,
    Scenario,
    engaged_sample_check,
    freewheel_violation,
    kappa_extent,
    min_event_gap_s,
    run_scenario,
    tracking_rms,
    virtual_model_reference,
    window_mean,
)

from conftest import random_scenario, simulate_coastdown_speeds, vb_preset_coastdown

TABLE_RATIOS = {
    "test1_light": (2.10, 1.47),
    "test2_medium": (1.26, 1.02),
    "test3_heavy": (0.70, 0.68),
}


def load_preset(name):
    path = resources.files("ebikesim").joinpath("presets", f"{name}.scenario")
    return load_scenario(str(path), name=name)


# ---------------------------------------------------------------------------
# shared expensive runs


@pytest.fixture(scope="module")
def vc_run():
    scenario = load_preset("virtual_chain_20rpm")
    t0 = time.monotonic()
    result = run_scenario(scenario)
    return result, time.monotonic() - t0


@pytest.fixture(scope="module")
def vb_runs():
    runs = {}
    for name in TABLE_RATIOS:
        scenario = load_preset(name)
        runs[name, False] = run_scenario(scenario)
        runs[name, True] = run_scenario(replace(scenario, linear_plant=True,
                                                name=f"{name}_linear"))
    return runs


@pytest.fixture(scope="module")
def random_runs():
    return [(seed, run_scenario(random_scenario(seed))) for seed in range(50)]


@pytest.fixture(scope="module")
def extra_runs():
    bike = BikeParameters(25.0, 70.0, 0.33, 1.80, 1.69, 10.7)
    coast_scenario = Scenario(
        bike=bike,
        coastdown=CoastdownCoeffs(0.4, 0.3, 4.0),
        rider=RiderScript((RiderPhase(10.0, "coast"),)),
        controller=ControllerConfig(mode="none"),
        duration_s=10.0,
        initial_speed_mps=6.0,
        name="coast",
    )
    from ebikesim.sim import BrakeInterval

    brake_scenario = replace(
        coast_scenario,
        rider=RiderScript((RiderPhase(12.0, "pedal", 22.0, 0.25),)),
        controller=ControllerConfig(
            mode="virtual_chain", cadence_reference_radps=rpm_to_radps(20.0)
        ),
        duration_s=12.0,
        initial_speed_mps=0.0,
        brakes=(BrakeInterval(7.0, 8.5, -10.0),),
        name="brake",
    )
    return [run_scenario(coast_scenario), run_scenario(brake_scenario)]


def disengaged_suffix(log):
    """Sample index one past the first valid scaling sample (post-seed)."""
    start = next(
        k for k in range(len(log)) if log.xi[k] == 0 and not math.isnan(log.kappa[k])
    )
    return start + 1


# ---------------------------------------------------------------------------
# 1. scaling-factor extremes


def test_criterion_1_kappa_extremes():
    t0 = time.monotonic()
    mass = 95.0
    beta = 1.7444444444444445
    for dc, hf in TABLE_RATIOS.values():
        got_dc, got_hf = kappa_gains(mass, beta, mass / hf, beta / dc)
        assert got_dc == pytest.approx(dc, rel=1e-12)
        assert got_hf == pytest.approx(hf, rel=1e-12)
        filt = make_kappa_filter(mass, beta, mass / hf, beta / dc, 0.01)
        assert abs(filt.dc_gain - dc) < 1e-10
        assert filt.frequency_gain(0.99 * math.pi / 0.01) == pytest.approx(hf, rel=0.01)
    elapsed = time.monotonic() - t0
    assert elapsed < 1.0
    print(f"\nACCEPTANCE 1 PASS: scaling extremes exact, filter DC/HF preserved "
          f"({elapsed * 1e3:.1f} ms)")


# ---------------------------------------------------------------------------
# 2. virtual-chain cadence regulation and freewheel emulation


def test_criterion_2_cadence_regulation(vc_run):
    result, elapsed = vc_run
    log = result.log
    # launch phase: parallel mode with both machines idle
    launch = log.window(0.0, 3.0)
    assert all(x == 1 for x in log.xi[launch])
    assert max(abs(x) for x in log.T_m[launch]) < 0.01
    assert max(abs(x) for x in log.T_g[launch]) < 0.01
    window = log.window(60.0, 80.0)
    cadence_rpm = radps_to_rpm(window_mean(log.omega_p, window))
    assert cadence_rpm == pytest.approx(20.0, abs=0.5)
    # slow-down phase spans [85, 93]; exclude the entry transient (torque
    # blend plus generator unloading) before asserting the freewheel emulation
    slowdown = log.window(86.5, 93.0)
    worst_motor = max(abs(x) for x in log.T_m[slowdown])
    worst_generator = max(abs(x) for x in log.T_g[slowdown])
    assert worst_motor < 0.1
    assert worst_generator < 0.1
    budget = 10.0 * result.scenario.duration_s / 60.0
    assert elapsed < budget
    print(f"\nACCEPTANCE 2 PASS: steady cadence {cadence_rpm:.3f} rpm, slow-down "
          f"|T_m|<{worst_motor:.4f} |T_g|<{worst_generator:.4f} Nm, "
          f"{elapsed:.1f}s wall for {result.scenario.duration_s:.0f}s sim")


# ---------------------------------------------------------------------------
# 3. power buffer / state of charge


def test_criterion_3_power_buffer(vc_run):
    result, _ = vc_run
    log = result.log
    window = log.window(20.0, 80.0)
    soc_values = log.soc[window]
    soc_drift = abs(soc_values[-1] - soc_values[0])
    p_m = window_mean(log.P_m, window)
    p_g = window_mean(log.P_g, window)
    mismatch = abs(p_g - p_m) / p_m
    assert soc_drift < 1e-3
    assert mismatch < 0.01
    print(f"\nACCEPTANCE 3 PASS: 60s SOC drift {soc_drift:.2e}, "
          f"windowed power mismatch {100 * mismatch:.3f}%")


# ---------------------------------------------------------------------------
# 4. virtual-bike model matching and scaling bounds


def test_criterion_4_virtual_bike_matching(vb_runs):
    lines = []
    for name, (dc, hf) in TABLE_RATIOS.items():
        for linear in (False, True):
            result = vb_runs[name, linear]
            log = result.log
            cc = result.scenario.controller
            ref = virtual_model_reference(
                log, cc.virtual_mass_kg, cc.virtual_resistance_N_per_mps,
                result.scenario.bike.wheel_radius_m,
            )
            start = next(k for k, r in enumerate(ref) if not math.isnan(r))
            window = log.window(log.t[start] + 1.0, log.t[-1] + 1.0)
            rms = tracking_rms(log, ref, window)
            limit = 0.001 if linear else 0.02
            assert rms < limit, (name, linear, rms)
            lines.append(f"{name}{'/linear' if linear else ''} rms {100 * rms:.3f}%")
        log = vb_runs[name, False].log
        lo, hi = kappa_extent(log, slice(disengaged_suffix(log) - 1, len(log)))
        if name == "test1_light":
            assert lo > 1.0
            lines.append(f"test1 min kappa {lo:.3f} > 1")
        if name == "test3_heavy":
            assert hi < 1.0
            lines.append(f"test3 max kappa {hi:.3f} < 1")
    print("\nACCEPTANCE 4 PASS: " + "; ".join(lines))


# ---------------------------------------------------------------------------
# 5. imposed-impedance identity on linear-plant closed loops


def test_criterion_5_impedance_identity():
    worst = 0.0
    for seed in range(20):
        rng = random.Random(1000 + seed)
        phases = tuple(
            RiderPhase(
                duration_s=rng.uniform(2.0, 5.0),
                behavior="pedal",
                mean_torque_Nm=rng.uniform(5.0, 35.0),
                ripple_fraction=rng.uniform(0.0, 0.4),
            )
            for _ in range(rng.randint(2, 4))
        )
        script = RiderScript(phases)
        bike = BikeParameters(25.0, rng.uniform(55.0, 90.0), 0.33, 1.80, 1.69, 10.7)
        coast = vb_preset_coastdown()
        beta = linearize_beta(coast, kmh_to_mps(6.5))
        mass = total_mass(bike)
        mv = mass * rng.uniform(0.5, 2.0)
        bv = beta * rng.uniform(0.5, 2.0)
        ratio = 3.0
        v0 = rng.uniform(2.0, 4.0)
        scenario = Scenario(
            bike=bike,
            coastdown=coast,
            rider=script,
            controller=ControllerConfig(
                mode="virtual_bike", fixed_ratio=ratio,
                virtual_mass_kg=mv, virtual_resistance_N_per_mps=bv,
                torque_sensor=True,
            ),
            duration_s=min(12.0, script.horizon_s),
            initial_speed_mps=v0,
            initial_cadence_radps=v0 / (bike.wheel_radius_m * ratio),
            linear_plant=True,
            name=f"impedance-{seed}",
        )
        log = run_scenario(scenario).log
        k0 = disengaged_suffix(log)
        drive = [log.T_h[k] / (log.tau_v[k] * bike.wheel_radius_m)
                 for k in range(k0, len(log))]
        error = impedance_solution_check(
            mass, beta, mv, bv, log.v[k0:], drive,
            [bool(x) for x in log.xi[k0:]], scenario.control_period_s,
        )
        worst = max(worst, error)
        assert error < 1e-3, (seed, error)
    print(f"\nACCEPTANCE 5 PASS: imposed-model error < 1e-3 N on 20 random "
          f"scripts (worst {worst:.2e} N)")


# ---------------------------------------------------------------------------
# 6. coast-down identification


def test_criterion_6_coastdown_identification():
    mass, radius = 95.0, 0.33
    true = CoastdownCoeffs(0.4, 0.3, 4.0)
    truth = np.array([0.4, 0.3, 4.0])

    t, v = simulate_coastdown_speeds(true, mass, 8.0, 50.0, 0.005)
    fit = fit_coastdown(CoastdownTrace(t, v / radius), mass, radius)
    got = np.array([fit.coeffs.quadratic_N_per_mps2, fit.coeffs.linear_N_per_mps,
                    fit.coeffs.constant_N])
    noiseless_rel = np.max(np.abs(got - truth) / truth)
    assert noiseless_rel < 1e-3
    assert fit.residual_rms_N < 1e-6

    t2, v2 = simulate_coastdown_speeds(true, mass, 9.0, 65.0, 0.05)
    wheel = v2 / radius
    rng = np.random.default_rng(2024)
    estimates = []
    for _ in range(100):
        noisy = np.clip(wheel + rng.normal(0.0, 0.05, len(wheel)), 0.0, None)
        f = fit_coastdown(CoastdownTrace(t2, noisy), mass, radius)
        estimates.append([f.coeffs.quadratic_N_per_mps2, f.coeffs.linear_N_per_mps,
                          f.coeffs.constant_N])
    mean = np.mean(estimates, axis=0)
    noisy_rel = np.max(np.abs(mean - truth) / truth)
    assert noisy_rel < 0.05

    h = 1e-4
    worst_fd = 0.0
    for v_bar in (0.3, 1.0, 1.8055555555555556, 4.0, 8.0):
        fd = (coastdown_force(true, v_bar + h) - coastdown_force(true, v_bar - h)) / (2 * h)
        worst_fd = max(worst_fd, abs(linearize_beta(true, v_bar) - fd))
    assert worst_fd < 1e-6
    print(f"\nACCEPTANCE 6 PASS: noiseless recovery {noiseless_rel:.2e}, "
          f"100-seed mean recovery {100 * noisy_rel:.2f}%, "
          f"beta finite-difference {worst_fd:.2e}")


# ---------------------------------------------------------------------------
# 7. freewheel invariants across the suite plus randomized scenarios


def test_criterion_7_freewheel_invariants(vc_run, vb_runs, random_runs, extra_runs):
    suite = [vc_run[0]] + list(vb_runs.values()) + extra_runs \
        + [result for _, result in random_runs]
    worst_overrun = -math.inf
    worst_lock = 0.0
    min_reaction = math.inf
    min_gap = math.inf
    for result in suite:
        log = result.log
        ratio = result.scenario.bike.chain_ratio
        worst_overrun = max(worst_overrun, freewheel_violation(log, ratio))
        mismatch, reaction = engaged_sample_check(log, ratio)
        worst_lock = max(worst_lock, mismatch)
        min_reaction = min(min_reaction, reaction)
        gap = min_event_gap_s(log.clutch_events)
        dwell = 2.0 * result.scenario.control_period_s
        assert gap >= dwell - 1e-9, (result.scenario.name, gap)
        min_gap = min(min_gap, gap)
    assert worst_overrun <= EPS_SPEED
    assert worst_lock <= EPS_SPEED
    assert min_reaction > -1e-9
    print(f"\nACCEPTANCE 7 PASS: {len(suite)} runs, max pedal overrun "
          f"{worst_overrun:.2e} rad/s, max engaged lock error {worst_lock:.2e}, "
          f"min engaged reaction {min_reaction:.2e} Nm, min event gap {min_gap:.3f}s")


# ---------------------------------------------------------------------------
# 8. degeneracy: virtual bike with the vehicle's own parameters == virtual chain


def test_criterion_8_degeneracy_equivalence():
    bike = BikeParameters(25.0, 70.0, 0.33, 1.80, 1.69, 10.7)
    coast = vb_preset_coastdown()
    beta = linearize_beta(coast, kmh_to_mps(6.5))
    script = RiderScript((
        RiderPhase(4.6, "pedal", 17.0, 0.3),
        RiderPhase(25.4, "pedal", 3.0, 0.3),
    ))
    common = dict(
        bike=bike, coastdown=coast, rider=script, duration_s=30.0,
    )
    vb = Scenario(
        controller=ControllerConfig(
            mode="virtual_bike", cadence_reference_radps=rpm_to_radps(20.0),
            virtual_mass_kg=total_mass(bike), virtual_resistance_N_per_mps=beta,
        ),
        name="degenerate_vb", **common,
    )
    vc = Scenario(
        controller=ControllerConfig(
            mode="virtual_chain", cadence_reference_radps=rpm_to_radps(20.0),
        ),
        name="degenerate_vc", **common,
    )
    log_vb = run_scenario(vb).log
    log_vc = run_scenario(vc).log
    worst = max(abs(a - b) for a, b in zip(log_vb.T_m, log_vc.T_m))
    assert worst < 1e-9
    print(f"\nACCEPTANCE 8 PASS: degenerate virtual bike matches virtual chain "
          f"sample-by-sample (max |dT_m| {worst:.2e} Nm)")


# ---------------------------------------------------------------------------
# 9. energy audit


def test_criterion_9_energy_audit(vc_run, vb_runs, random_runs, extra_runs):
    suite = [vc_run[0]] + list(vb_runs.values()) + extra_runs \
        + [result for _, result in random_runs]
    worst = 0.0
    for result in suite:
        assert result.energy.relative_error < 0.005, (
            result.scenario.name, result.energy,
        )
        worst = max(worst, result.energy.relative_error)
    print(f"\nACCEPTANCE 9 PASS: energy audit closes within 0.5% on "
          f"{len(suite)} runs (worst {100 * worst:.3f}%)")
