"""Uniformly sampled multi-channel signals and their CSV form."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Signal",
    "SignalError",
    "OffGridError",
    "read_signal_csv",
    "write_signal_csv",
]

# On-grid checks tolerate this much drift, measured in fractions of dt.
GRID_TOL = 1e-6


class SignalError(ValueError):
    """Malformed signal data: bad grid, duplicate channels, non-finite values."""


class OffGridError(SignalError):
    """A queried time does not land on the sample grid."""


@dataclass(frozen=True)
class Signal:
    """A uniformly sampled, real-valued, multi-channel trace.

    ``values`` has shape (n_samples, n_channels); column k holds channel
    ``channel_names[k]``. Sample i sits at time ``t0 + i * dt``. Instances
    are immutable: the value matrix is copied and marked read-only, so a
    Signal can be shared freely across threads.
    """

    channel_names: tuple[str, ...]
    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        names = tuple(self.channel_names)
        object.__setattr__(self, "channel_names", names)
        if len(names) == 0:
            raise SignalError("signal needs at least one channel")
        if len(set(names)) != len(names):
            raise SignalError(f"duplicate channel names in {names}")
        if not (self.dt > 0.0):
            raise SignalError(f"dt must be positive, got {self.dt}")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise SignalError(f"values must be 2-D, got shape {vals.shape}")
        if vals.shape[0] < 1:
            raise SignalError("signal needs at least one sample")
        if vals.shape[1] != len(names):
            raise SignalError(
                f"{vals.shape[1]} value columns for {len(names)} channels"
            )
        if not np.all(np.isfinite(vals)):
            raise SignalError("signal values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def end_time(self) -> float:
        return self.t0 + (self.n_samples - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    def channel(self, name: str) -> np.ndarray:
        """Return the column for ``name`` (read-only view)."""
        try:
            k = self.channel_names.index(name)
        except ValueError:
            raise SignalError(
                f"channel {name!r} not in signal (has {self.channel_names})"
            ) from None
        return self.values[:, k]

    def index_at(self, t: float) -> int:
        """Map an on-grid time to its sample index.

        Raises OffGridError when t is not within GRID_TOL*dt of a grid
        point, or falls outside the sampled range.
        """
        x = (t - self.t0) / self.dt
        i = int(round(x))
        if abs(x - i) > GRID_TOL:
            raise OffGridError(f"time {t} is off the sampling grid (dt={self.dt})")
        if i < 0 or i >= self.n_samples:
            raise OffGridError(f"time {t} outside sampled range [{self.t0}, {self.end_time}]")
        return i


def read_signal_csv(path: str | os.PathLike) -> Signal:
    """Read a signal from CSV with a ``time,ch1,ch2,...`` header.

    The time column must advance in uniform steps.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise SignalError(f"{path}: empty signal file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[0] != "time":
        raise SignalError(f"{path}: header must be 'time,ch1,...', got {header}")
    try:
        data = np.array([[float(c) for c in row] for row in rows[1:]], dtype=float)
    except ValueError as exc:
        raise SignalError(f"{path}: non-numeric cell ({exc})") from None
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] != len(header):
        raise SignalError(f"{path}: ragged or empty data")
    times = data[:, 0]
    if len(times) == 1:
        dt = 1.0  # degenerate single-sample trace; dt is arbitrary
    else:
        steps = np.diff(times)
        dt = float(steps[0])
        if dt <= 0 or np.any(np.abs(steps - dt) > GRID_TOL * max(dt, 1e-300)):
            raise SignalError(f"{path}: time column is not a uniform grid")
    return Signal(tuple(header[1:]), float(times[0]), dt, data[:, 1:])


def write_signal_csv(signal: Signal, path: str | os.PathLike) -> None:
    """Write a signal in the ``time,ch1,...`` CSV format (round-trips)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("time",) + signal.channel_names)
        times = signal.times
        for i in range(signal.n_samples):
            writer.writerow(
                [repr(float(times[i]))] + [repr(float(v)) for v in signal.values[i]]
            )
