"""Systems under test: the Ackley objective and a transmission surrogate.

Both sit behind one interface: a system maps an initial/environment
condition vector from a box to a deterministic, uniformly sampled output
trace. For the transmission surrogate the condition vector encodes
piecewise-constant throttle and brake profiles over equal segments of the
simulation window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .signals import Signal

__all__ = [
    "SystemUnderTest",
    "simulate",
    "ackley",
    "transmission_surrogate",
    "TRANSMISSION_CHANNELS",
]

# --- transmission surrogate constants (four-speed automatic, desk-scale) ---
# The numbers are not calibrated to any production vehicle; they are chosen
# so that the three benchmark requirements all bind: 100 mph is reachable
# only under sustained high throttle, engine speed saturates at its 6500 rpm
# limiter whenever the car runs fast, and hard braking forces downshifts
# that pin gear dwells at the 0.4 s hysteresis floor.
GEAR_RATIOS = (4.0, 2.5, 1.5, 1.0)
RPM_IDLE = 600.0
RPM_LIMIT = 6500.0
RPM_PER_MPH = 65.0        # engine speed per mph in top gear
RPM_PER_THROTTLE = 6.0
SHIFT_UP_BASE = 4200.0    # upshift when rpm > base + slope * throttle
SHIFT_UP_SLOPE = 8.0
SHIFT_DOWN_RPM = 1200.0
SHIFT_DWELL = 0.4         # s between consecutive shifts (hysteresis)
THRUST_GAIN = 0.055       # mph/s per unit throttle at ratio 1
BRAKE_GAIN = 0.07         # mph/s per unit brake torque
DRAG = 0.00032            # mph/s per mph^2
ROLLING = 0.08            # mph/s constant resistance

TRANSMISSION_CHANNELS = ("speed", "RPM", "gear")

THROTTLE_MAX = 100.0
BRAKE_MAX = 325.0


def ackley(x: float, y: float) -> float:
    """The 2-D Ackley test function; 0 at the origin, positive elsewhere."""
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"ackley needs finite inputs, got ({x}, {y})")
    radial = -20.0 * math.exp(-0.2 * math.sqrt(0.5 * (x * x + y * y)))
    ripple = -math.exp(0.5 * (math.cos(2.0 * math.pi * x) + math.cos(2.0 * math.pi * y)))
    return radial + ripple + math.e + 20.0


@dataclass(frozen=True)
class SystemUnderTest:
    """A deterministic simulator over a box of initial conditions."""

    name: str
    x0_bounds: tuple[tuple[float, float], ...]
    sim_horizon: float
    dt: float
    channel_names: tuple[str, ...]
    trace_fn: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if not self.sim_horizon > 0:
            raise ValueError(f"sim_horizon must be positive, got {self.sim_horizon}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.channel_names:
            raise ValueError("system needs at least one output channel")

    @property
    def n_samples(self) -> int:
        return int(round(self.sim_horizon / self.dt)) + 1


def simulate(system: SystemUnderTest, x0) -> Signal:
    """Deterministic trace of the system from condition x0 (inside its box)."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (len(system.x0_bounds),):
        raise ValueError(
            f"{system.name}: condition must have shape ({len(system.x0_bounds)},), got {x0.shape}"
        )
    for v, (lo, hi) in zip(x0, system.x0_bounds):
        if not (lo <= v <= hi):
            raise ValueError(f"{system.name}: condition {x0} outside box component [{lo}, {hi}]")
    values = system.trace_fn(x0)
    if not np.all(np.isfinite(values)):
        raise RuntimeError(f"{system.name}: simulation produced non-finite state")
    return Signal(system.channel_names, 0.0, system.dt, values)


def _transmission_step_loop(
    inputs: np.ndarray, n_steps: int, dt: float, ratios: np.ndarray, min_dwell_steps: int
) -> np.ndarray:
    """Euler-integrate the surrogate; inputs is (n_steps+1, 2) throttle/brake.

    Shift hysteresis is counted in whole steps, so the minimum time between
    shifts is exactly ``min_dwell_steps * dt`` regardless of float drift.
    Engine speed is recomputed after a shift so each output row reflects
    the gear active at that sample.
    """
    out = np.empty((n_steps + 1, 3))
    v = 0.0
    gear = 1
    dwell = min_dwell_steps  # start free of shift hysteresis
    for i in range(n_steps + 1):
        throttle = inputs[i, 0]
        brake = inputs[i, 1]
        raw = RPM_PER_MPH * v * ratios[gear - 1] + RPM_PER_THROTTLE * throttle
        rpm = min(max(raw, RPM_IDLE), RPM_LIMIT)
        if dwell >= min_dwell_steps:
            shifted = False
            if gear < 4 and rpm > SHIFT_UP_BASE + SHIFT_UP_SLOPE * throttle:
                gear += 1
                shifted = True
            elif gear > 1 and rpm < SHIFT_DOWN_RPM:
                gear -= 1
                shifted = True
            if shifted:
                dwell = 0
                raw = RPM_PER_MPH * v * ratios[gear - 1] + RPM_PER_THROTTLE * throttle
                rpm = min(max(raw, RPM_IDLE), RPM_LIMIT)
        out[i, 0] = v
        out[i, 1] = rpm
        out[i, 2] = gear
        accel = (
            THRUST_GAIN * throttle * ratios[gear - 1]
            - BRAKE_GAIN * brake
            - DRAG * v * v
            - ROLLING
        )
        v = v + dt * accel
        if v < 0.0:
            v = 0.0
        dwell += 1
    return out


try:  # optional JIT; the pure-Python loop is the semantic reference
    from numba import njit

    _transmission_step_loop = njit(cache=True)(_transmission_step_loop)
except ImportError:  # pragma: no cover - exercised only without numba
    pass


def transmission_surrogate(
    n_segments: int = 2, sim_horizon: float = 30.0, dt: float = 0.01
) -> SystemUnderTest:
    """Four-speed automatic-transmission surrogate.

    The condition vector is (throttle_1..throttle_k, brake_1..brake_k):
    piecewise-constant throttle in [0, 100] and brake torque in [0, 325]
    over k equal segments of the simulation window. Output channels are
    vehicle "speed" (mph), engine "RPM", and the integer-valued "gear".
    """
    if n_segments < 1:
        raise ValueError(f"need at least one input segment, got {n_segments}")
    n_steps = int(round(sim_horizon / dt))
    bounds = tuple([(0.0, THROTTLE_MAX)] * n_segments + [(0.0, BRAKE_MAX)] * n_segments)

    ratios = np.array(GEAR_RATIOS)
    min_dwell_steps = math.ceil(SHIFT_DWELL / dt - 1e-9)

    def trace_fn(x0: np.ndarray) -> np.ndarray:
        throttle_levels = x0[:n_segments]
        brake_levels = x0[n_segments:]
        seg = np.minimum(
            (np.arange(n_steps + 1) * n_segments) // (n_steps + 1), n_segments - 1
        )
        inputs = np.column_stack([throttle_levels[seg], brake_levels[seg]])
        return _transmission_step_loop(inputs, n_steps, dt, ratios, min_dwell_steps)

    return SystemUnderTest(
        name="transmission",
        x0_bounds=bounds,
        sim_horizon=sim_horizon,
        dt=dt,
        channel_names=TRANSMISSION_CHANNELS,
        trace_fn=trace_fn,
    )
