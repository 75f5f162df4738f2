"""Coast-down parameter identification and the local linearization used by
the virtual-bike controller.

The resistance model F(v) = C*v^2 + B*v + A is identified from unpowered
deceleration traces. During a coast-down the wheel balance reduces to
F(v) = -M * R_w * dOmega_w/dt, so the classic approach regresses an
estimated deceleration onto [v^2, v, 1]. Differentiating measured speed
amplifies noise badly, so the deceleration-domain fit (kept for its
residual diagnostics) only seeds a trajectory-domain refinement: the
integrated balance

    M * (v(t) - v0) = -(C * I2(t) + B * I1(t) + A * t),
    I1 = integral of v, I2 = integral of v^2,

is linear in (v0, A, B, C) with integrated (hence smoothed) regressors.
Two refit passes rebuild I1, I2 from the fitted model to suppress the
errors-in-variables bias. Non-negativity of A, B, C is enforced by an
active-set non-negative solve when the unconstrained fit violates it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls
from scipy.signal import savgol_filter

from .core import CoastdownCoeffs

# Window of the local-quadratic smoother applied before differencing.
SMOOTHER_WINDOW = 5

# A trace must span at least this speed range [m/s] to excite all three
# coefficients; below it the regressor is rank-deficient in practice.
MIN_SPEED_RANGE_MPS = 0.05


class IdentifiabilityError(RuntimeError):
    """Trace does not excite the model (e.g. constant speed)."""


@dataclass(frozen=True)
class CoastdownTrace:
    """Uniformly sampled unpowered-deceleration record."""

    time_s: np.ndarray
    wheel_speed_radps: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.time_s, dtype=float)
        w = np.asarray(self.wheel_speed_radps, dtype=float)
        object.__setattr__(self, "time_s", t)
        object.__setattr__(self, "wheel_speed_radps", w)
        if t.ndim != 1 or t.shape != w.shape:
            raise ValueError("time and speed must be 1-D arrays of equal length")
        if len(t) < 10:
            raise ValueError("need at least 10 samples")
        dt = np.diff(t)
        if np.any(dt <= 0.0):
            raise ValueError("time must be strictly increasing")
        if not np.allclose(dt, dt[0], rtol=1e-6, atol=1e-9):
            raise ValueError("sampling must be uniform")
        if np.any(w < 0.0):
            raise ValueError("wheel speeds must be >= 0")

    @property
    def sample_period_s(self) -> float:
        return float(self.time_s[1] - self.time_s[0])


@dataclass(frozen=True)
class CoastdownFit:
    coeffs: CoastdownCoeffs
    residual_rms_N: float
    initial_speed_mps: float


def _deceleration_domain_fit(v_smooth, decel_force, clamp=True):
    """Least squares of force on [v^2, v, 1], non-negative coefficients."""
    X = np.column_stack([v_smooth**2, v_smooth, np.ones_like(v_smooth)])
    sol, *_ = np.linalg.lstsq(X, decel_force, rcond=None)
    if clamp and np.any(sol < 0.0):
        sol, _ = nnls(X, decel_force)
    return sol  # (C, B, A)


def _simulate_speeds(coeffs_cba, v0, t):
    """RK4 forward simulation of M dv/dt = -F(v) at the trace timestamps,
    in force-per-unit-mass form (coefficients already divided by M)."""
    c, b, a = coeffs_cba

    def f(v):
        v = max(v, 0.0)
        return -((c * v + b) * v + a)

    out = np.empty_like(t)
    v = v0
    out[0] = v
    for i in range(1, len(t)):
        dt = t[i] - t[i - 1]
        k1 = f(v)
        k2 = f(v + 0.5 * dt * k1)
        k3 = f(v + 0.5 * dt * k2)
        k4 = f(v + dt * k3)
        v = max(v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0)
        out[i] = v
    return out


def fit_coastdown(trace: CoastdownTrace, mass_kg: float, wheel_radius_m: float) -> CoastdownFit:
    """Identify (A, B, C) from a coast-down trace. See the module docstring
    for the two-stage scheme. Raises IdentifiabilityError when the trace
    carries no usable excitation (constant speed)."""
    if mass_kg <= 0.0 or wheel_radius_m <= 0.0:
        raise ValueError("mass and wheel radius must be positive")

    t = trace.time_s - trace.time_s[0]
    v = trace.wheel_speed_radps * wheel_radius_m
    if float(np.max(v) - np.min(v)) < MIN_SPEED_RANGE_MPS:
        raise IdentifiabilityError(
            "trace speed range too small to identify the resistance model"
        )

    # Stage 1: smoothed-derivative fit (also the residual diagnostic domain).
    # Boundary samples carry one-sided smoother/difference errors; the fit
    # and the residual use the interior only.
    window = min(SMOOTHER_WINDOW, len(v) - (1 - len(v) % 2))
    v_smooth = savgol_filter(v, window, polyorder=2)
    dvdt = np.gradient(v_smooth, t)
    margin = window // 2 + 1
    interior = slice(margin, len(v) - margin)
    v_smooth = v_smooth[interior]
    decel_force = -mass_kg * dvdt[interior]  # F = -M * R_w * dOmega_w/dt
    c1, b1, a1 = _deceleration_domain_fit(v_smooth, decel_force)

    # Stage 2: integrated-balance regression, iterated to clean regressors.
    def cumtrapz0(y):
        out = np.zeros_like(y)
        np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t), out=out[1:])
        return out

    params = np.array([c1 / mass_kg, b1 / mass_kg, a1 / mass_kg, v[0]])
    v_model = v
    for _ in range(3):
        i1 = cumtrapz0(v_model)
        i2 = cumtrapz0(v_model**2)
        # v_k = v0 - (C/M)*I2 - (B/M)*I1 - (A/M)*t
        X = np.column_stack([-i2, -i1, -t, np.ones_like(t)])
        sol, *_ = np.linalg.lstsq(X, v, rcond=None)
        if np.any(sol[:3] < 0.0):
            sol, _ = nnls(X, v)
        params = sol
        v_model = _simulate_speeds(params[:3], params[3], t)

    c_est, b_est, a_est = params[0] * mass_kg, params[1] * mass_kg, params[2] * mass_kg
    coeffs = CoastdownCoeffs(
        quadratic_N_per_mps2=float(c_est),
        linear_N_per_mps=float(b_est),
        constant_N=float(a_est),
    )
    fitted_force = (c_est * v_smooth + b_est) * v_smooth + a_est
    residual_rms = float(np.sqrt(np.mean((decel_force - fitted_force) ** 2)))
    return CoastdownFit(coeffs, residual_rms, float(params[3]))


def validate_constant_speed(
    coeffs: CoastdownCoeffs, v_bar_mps: float, motor_torque_Nm: float, wheel_radius_m: float
) -> float:
    """Constant-speed cross-check: residual F(v_bar) - T_m/R_w, near zero
    when the identified model matches the torque holding that speed."""
    if v_bar_mps <= 0.0:
        raise ValueError("validation speed must be positive")
    force = (coeffs.quadratic_N_per_mps2 * v_bar_mps + coeffs.linear_N_per_mps) * v_bar_mps \
        + coeffs.constant_N
    return force - motor_torque_Nm / wheel_radius_m


def linearize_beta(coeffs: CoastdownCoeffs, v_bar_mps: float) -> float:
    """Local slope of the resistance at v_bar: beta = 2*C*v_bar + B."""
    if v_bar_mps < 0.0 or not math.isfinite(v_bar_mps):
        raise ValueError("linearization speed must be >= 0")
    return 2.0 * coeffs.quadratic_N_per_mps2 * v_bar_mps + coeffs.linear_N_per_mps
