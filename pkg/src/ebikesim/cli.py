"""Command-line entry point: scenario runs, coast-down identification and
parameter sweeps. The CLI is a thin shell over the library; every behavior
here is reachable through library calls.

Exit codes: 0 success, 2 scenario/validation failure, 3 numerical fault,
4 identifiability failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import replace
from importlib import resources

import numpy as np

from . import scenariofile
from .core import mps_to_kmh, radps_to_rpm
from .ident import CoastdownTrace, IdentifiabilityError, fit_coastdown, linearize_beta
from .powertrain import SimulationFault
from .scenariofile import ScenarioFileError
from .sim import (
    MODE_VIRTUAL_BIKE,
    run_scenario,
    steady_kappa,
    summarize,
    tracking_rms,
    virtual_model_reference,
    window_mean,
    write_log_csv,
)
from .svgplot import line_plot_svg

log = logging.getLogger("ebikesim")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IDENT = 4


def _resolve_scenario_path(spec: str) -> str:
    if os.path.exists(spec):
        return spec
    name = spec[:-len(".scenario")] if spec.endswith(".scenario") else spec
    preset = resources.files("ebikesim").joinpath("presets", f"{name}.scenario")
    if preset.is_file():
        return str(preset)
    raise FileNotFoundError(f"no scenario file or preset named {spec!r}")


def _emit_plots(result, out_dir: str) -> None:
    lg = result.log
    t = lg.t
    speed_series = [("measured", t, [mps_to_kmh(v) for v in lg.v])]
    if result.scenario.controller.mode == MODE_VIRTUAL_BIKE:
        try:
            ref = virtual_model_reference(
                lg,
                result.scenario.controller.virtual_mass_kg,
                result.scenario.controller.virtual_resistance_N_per_mps,
                result.scenario.bike.wheel_radius_m,
            )
            speed_series.append(("virtual model", t, [mps_to_kmh(r) for r in ref]))
        except ValueError:
            pass
    line_plot_svg(os.path.join(out_dir, "speed.svg"),
                  "vehicle speed", speed_series, "time [s]", "speed [km/h]")
    line_plot_svg(os.path.join(out_dir, "torques.svg"), "torques",
                  [("rider", t, lg.T_h), ("motor", t, lg.T_m), ("generator", t, lg.T_g)],
                  "time [s]", "torque [Nm]")
    line_plot_svg(os.path.join(out_dir, "cadence.svg"), "pedal cadence",
                  [("pedal", t, [radps_to_rpm(w) for w in lg.omega_p]),
                   ("wheel (geared)", t,
                    [radps_to_rpm(w / result.scenario.bike.chain_ratio) for w in lg.omega_w])],
                  "time [s]", "cadence [rpm]")
    if any(not math.isnan(k) for k in lg.kappa):
        line_plot_svg(os.path.join(out_dir, "kappa.svg"), "assist scaling factor",
                      [("kappa", t, lg.kappa)], "time [s]", "kappa [-]")
    line_plot_svg(os.path.join(out_dir, "soc.svg"), "battery state of charge",
                  [("soc", t, lg.soc)], "time [s]", "soc [-]")


def cmd_run(args) -> int:
    try:
        path = _resolve_scenario_path(args.scenario)
        scenario = scenariofile.load_scenario(path)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ScenarioFileError as exc:
        for problem in exc.problems:
            print(f"scenario error: {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    log.info("running scenario %s for %.1fs", scenario.name, scenario.duration_s)
    try:
        result = run_scenario(scenario)
    except SimulationFault as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    os.makedirs(args.out, exist_ok=True)
    write_log_csv(result.log, os.path.join(args.out, "log.csv"))
    summary = summarize(result)
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(summary)
    print(summary, end="")
    if args.svg:
        _emit_plots(result, args.out)
    return EXIT_OK


def cmd_identify(args) -> int:
    times = []
    speeds = []
    try:
        with open(args.trace, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["t", "omega_w"]:
                print(f"error: expected header 't,omega_w', got {header!r}", file=sys.stderr)
                return EXIT_VALIDATION
            for row in reader:
                times.append(float(row[0]))
                speeds.append(float(row[1]))
        trace = CoastdownTrace(np.array(times), np.array(speeds))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        fit = fit_coastdown(trace, args.mass, args.radius)
    except IdentifiabilityError as exc:
        print(f"identifiability error: {exc}", file=sys.stderr)
        return EXIT_IDENT
    c = fit.coeffs
    print(f"constant_N (A):          {c.constant_N:.6f}")
    print(f"linear_N_per_mps (B):    {c.linear_N_per_mps:.6f}")
    print(f"quadratic_N_per_mps2 (C): {c.quadratic_N_per_mps2:.6f}")
    print(f"residual RMS [N]:        {fit.residual_rms_N:.3e}")
    if args.vbar is not None:
        v_bar = args.vbar / 3.6
        print(f"beta({args.vbar} km/h) [N/(m/s)]: {linearize_beta(c, v_bar):.6f}")
    out = args.out or (os.path.splitext(args.trace)[0] + ".coastdown.toml")
    with open(out, "w") as fh:
        fh.write("[coastdown]\n")
        fh.write(f"quadratic_N_per_mps2 = {c.quadratic_N_per_mps2!r}\n")
        fh.write(f"linear_N_per_mps = {c.linear_N_per_mps!r}\n")
        fh.write(f"constant_N = {c.constant_N!r}\n")
    log.info("coefficients written to %s", out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        path = _resolve_scenario_path(args.scenario)
        raw = scenariofile.load_raw(path)
        values = [float(x) for x in args.values.split(",") if x.strip()]
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if not values:
        print("error: empty sweep value list", file=sys.stderr)
        return EXIT_VALIDATION
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for value in values:
        try:
            patched = scenariofile.apply_override(raw, args.param, value)
            scenario = scenariofile.build_scenario(patched, f"{args.param}={value:g}")
        except ScenarioFileError as exc:
            for problem in exc.problems:
                print(f"scenario error: {problem}", file=sys.stderr)
            return EXIT_VALIDATION
        try:
            result = run_scenario(scenario)
        except SimulationFault as exc:
            print(f"numerical fault at {args.param}={value:g}: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        lg = result.log
        run_dir = os.path.join(args.out, f"{args.param.replace('.', '_')}_{value:g}")
        os.makedirs(run_dir, exist_ok=True)
        write_log_csv(lg, os.path.join(run_dir, "log.csv"))
        with open(os.path.join(run_dir, "summary.txt"), "w") as fh:
            fh.write(summarize(result))
        tail = slice(3 * len(lg) // 4, len(lg))
        cadence_rpm = radps_to_rpm(window_mean(lg.omega_p, tail))
        cadence_err = math.nan
        if scenario.controller.cadence_reference_radps is not None:
            cadence_err = cadence_rpm - radps_to_rpm(scenario.controller.cadence_reference_radps)
        rms = math.nan
        if scenario.controller.mode == MODE_VIRTUAL_BIKE:
            try:
                ref = virtual_model_reference(
                    lg, scenario.controller.virtual_mass_kg,
                    scenario.controller.virtual_resistance_N_per_mps,
                    scenario.bike.wheel_radius_m,
                )
                start = next(k for k, r in enumerate(ref) if not math.isnan(r))
                rms = tracking_rms(lg, ref, slice(start, len(lg)))
            except (ValueError, StopIteration):
                pass
        rows.append({
            "value": value,
            "steady_kappa": steady_kappa(lg),
            "mean_cadence_rpm": cadence_rpm,
            "cadence_error_rpm": cadence_err,
            "delta_soc": lg.soc[-1] - lg.soc[0],
            "virtual_tracking_rms": rms,
        })
    table_path = os.path.join(args.out, "sweep.csv")
    with open(table_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    width = 22
    print(args.param.rjust(width) + "".join(k.rjust(width) for k in rows[0] if k != "value"))
    for row in rows:
        print(f"{row['value']:>{width}.6g}" + "".join(
            f"{row[k]:>{width}.6g}" for k in row if k != "value"
        ))
    log.info("sweep table written to %s", table_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebikesim",
        description="Series-parallel e-bike simulator: scenario runs, "
                    "coast-down identification, parameter sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file or preset")
    p_run.add_argument("scenario", help="scenario file path or preset name")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override measurement-noise seed")
    p_run.add_argument("--svg", action="store_true", help="emit static SVG plots")
    p_run.set_defaults(func=cmd_run)

    p_id = sub.add_parser("identify", help="fit coast-down coefficients from a trace CSV")
    p_id.add_argument("trace", help="CSV with header t,omega_w")
    p_id.add_argument("--mass", type=float, required=True, help="vehicle mass incl. rider [kg]")
    p_id.add_argument("--radius", type=float, required=True, help="wheel radius [m]")
    p_id.add_argument("--vbar", type=float, default=None, help="report beta at this speed [km/h]")
    p_id.add_argument("--out", default=None, help="coefficients file (TOML [coastdown] section)")
    p_id.set_defaults(func=cmd_identify)

    p_sw = sub.add_parser("sweep", help="run one scenario per parameter value")
    p_sw.add_argument("scenario", help="scenario file path or preset name")
    p_sw.add_argument("--param", required=True, help="dotted scenario key, e.g. controller.virtual_mass_kg")
    p_sw.add_argument("--values", required=True, help="comma-separated numeric values")
    p_sw.add_argument("--out", required=True, help="output directory")
    p_sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("EBIKESIM_LOG", "WARNING").upper())
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
