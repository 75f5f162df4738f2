"""Scripted rider: a deterministic pedal-torque source.

A script is an ordered list of phases. Pedal phases produce a mean torque
with a two-per-revolution ripple (the dominant crank harmonic),

    torque = T0 * (1 + a * sin(2 * crank_angle)),

so the mean over one revolution at fixed cadence is exactly T0 and the
ripple fundamental sits at twice the crank frequency, which is where the
notch post-filter is aimed. Coast phases apply nothing. Slow-down phases
track a decreasing cadence ramp with a proportional "leg" controller,
reproducing the rider actively braking the pedals.

Mean torque is blended linearly across phase boundaries (legs do not step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

PEDAL = "pedal"
COAST = "coast"
BACKPEDAL_SLOWDOWN = "backpedal_slowdown"

BEHAVIORS = (PEDAL, COAST, BACKPEDAL_SLOWDOWN)

# Physiological clamp on anything the legs can exert.
MAX_LEG_TORQUE_NM = 80.0

# Proportional gain of the internal leg controller used by slow-down phases.
LEG_GAIN_NMS_PER_RAD = 5.0

# Mean-torque blend time at phase boundaries.
BLEND_S = 0.5


class ScriptExhausted(RuntimeError):
    """Requested time lies beyond the script horizon."""


@dataclass(frozen=True)
class RiderPhase:
    duration_s: float
    behavior: str = PEDAL
    mean_torque_Nm: float = 0.0
    ripple_fraction: float = 0.3

    def __post_init__(self) -> None:
        if self.duration_s <= 0.0:
            raise ValueError("phase duration must be positive")
        if self.behavior not in BEHAVIORS:
            raise ValueError(f"unknown behavior {self.behavior!r}")
        if not 0.0 <= self.ripple_fraction < 1.0:
            raise ValueError("ripple fraction must be in [0, 1) so torque never flips sign")


@dataclass(frozen=True)
class RiderScript:
    phases: tuple[RiderPhase, ...]

    def __post_init__(self) -> None:
        if not self.phases:
            raise ValueError("script needs at least one phase")

    @property
    def horizon_s(self) -> float:
        return sum(p.duration_s for p in self.phases)

    def phase_at(self, t_s: float) -> tuple[int, float]:
        """Phase index and time elapsed inside it. t must be within horizon."""
        if t_s < 0.0:
            raise ScriptExhausted(f"t={t_s} before script start")
        start = 0.0
        for i, phase in enumerate(self.phases):
            if t_s < start + phase.duration_s:
                return i, t_s - start
            start += phase.duration_s
        if math.isclose(t_s, start, rel_tol=0.0, abs_tol=1e-9):
            return len(self.phases) - 1, self.phases[-1].duration_s
        raise ScriptExhausted(f"t={t_s}s beyond script horizon {start}s")


def _mean_torque(phase: RiderPhase) -> float:
    return phase.mean_torque_Nm if phase.behavior == PEDAL else 0.0


def _effort_envelope(script: RiderScript, index: int, elapsed_s: float) -> float:
    """Mean torque with a linear ramp from the previous phase's level."""
    phase = script.phases[index]
    level = _mean_torque(phase)
    if index == 0:
        return level
    blend = min(BLEND_S, phase.duration_s / 3.0)
    if elapsed_s >= blend:
        return level
    prev = _mean_torque(script.phases[index - 1])
    return prev + (level - prev) * (elapsed_s / blend)


def rider_torque(
    script: RiderScript,
    t_s: float,
    crank_angle_rad: float,
    pedal_speed_radps: float,
    phase_entry_cadence_radps: float | None = None,
) -> float:
    """Scripted torque at time t given the crank angle and cadence.

    Slow-down phases need the cadence at phase entry (the ramp start); the
    stateful Rider records it, a bare call may pass it explicitly (defaults
    to the current cadence, i.e. a ramp starting now).
    """
    index, elapsed = script.phase_at(t_s)
    phase = script.phases[index]
    if phase.behavior == COAST:
        return 0.0
    if phase.behavior == BACKPEDAL_SLOWDOWN:
        entry = phase_entry_cadence_radps if phase_entry_cadence_radps is not None else pedal_speed_radps
        target = entry * max(0.0, 1.0 - elapsed / phase.duration_s)
        torque = LEG_GAIN_NMS_PER_RAD * (target - pedal_speed_radps)
    else:
        level = _effort_envelope(script, index, elapsed)
        torque = level * (1.0 + phase.ripple_fraction * math.sin(2.0 * crank_angle_rad))
    return min(max(torque, -MAX_LEG_TORQUE_NM), MAX_LEG_TORQUE_NM)


class Rider:
    """Single-owner stateful wrapper: integrates the crank angle and
    remembers the cadence at slow-down phase entries."""

    def __init__(self, script: RiderScript):
        self.script = script
        self.crank_angle_rad = 0.0
        self._entry_cadence: dict[int, float] = {}

    def torque(self, t_s: float, pedal_speed_radps: float) -> float:
        """Instantaneous torque; does not advance the crank."""
        index, _ = self.script.phase_at(t_s)
        entry = None
        if self.script.phases[index].behavior == BACKPEDAL_SLOWDOWN:
            entry = self._entry_cadence.setdefault(index, pedal_speed_radps)
        return rider_torque(self.script, t_s, self.crank_angle_rad, pedal_speed_radps, entry)

    def advance_crank(self, pedal_speed_radps: float, dt_s: float) -> None:
        self.crank_angle_rad += pedal_speed_radps * dt_s
