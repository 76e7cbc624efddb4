"""Sliding observation windows over pendulum traces.

A window ending at time t carries the last n samples of angular position and
velocity, oldest first, left-padded with zeros when the trace is shorter than
the window. The deflection lane is shifted one sample into the past: slot j
holds the deflection executed just before slot j's state was observed. That
keeps the deflection a model is about to produce out of its own input.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

THETA_SCALE = 60.0
OMEGA_SCALE = 300.0


@dataclass(frozen=True)
class WindowConfig:
    win_size: float = 0.0
    future: float = 0.0
    include_deflections: bool = True
    sample_hz: float = 50.0

    def __post_init__(self) -> None:
        if self.win_size < 0 or self.future < 0:
            raise ValueError("win_size and future must be >= 0")
        if self.sample_hz <= 0:
            raise ValueError("sample_hz must be positive")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.win_size * self.sample_hz)))

    @property
    def feature_dim(self) -> int:
        return 3 if self.include_deflections else 2

    def input_dim(self, arch: str) -> int:
        """Network input size implied by this window for the given family."""
        if arch == "mlp":
            return self.n_steps * self.feature_dim
        return self.feature_dim


@dataclass(frozen=True)
class ObservationWindow:
    thetas: tuple
    omegas: tuple
    deflections: Optional[tuple] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "thetas", tuple(float(v) for v in self.thetas))
        object.__setattr__(self, "omegas", tuple(float(v) for v in self.omegas))
        if self.deflections is not None:
            object.__setattr__(self, "deflections", tuple(float(v) for v in self.deflections))
        n = len(self.thetas)
        if n == 0:
            raise ValueError("empty window")
        if len(self.omegas) != n or (self.deflections is not None and len(self.deflections) != n):
            raise ValueError("window lanes differ in length")

    def __len__(self) -> int:
        return len(self.thetas)

    def features(self) -> np.ndarray:
        """Per-step feature rows with fixed scaling: theta/60, omega/300, d/1."""
        cols = [np.asarray(self.thetas) / THETA_SCALE, np.asarray(self.omegas) / OMEGA_SCALE]
        if self.deflections is not None:
            cols.append(np.asarray(self.deflections))
        return np.stack(cols, axis=1)


class TraceBuffer:
    """Append-only record of (t, theta, omega, executed deflection) samples.

    The deflection of the newest row may be filled in after the fact via
    set_last_deflection, since a control loop observes the state first and
    only then knows what was executed.
    """

    def __init__(self, capacity_hint: int = 4096):
        self._data = np.zeros((max(16, capacity_hint), 4))
        self._n = 0

    def __len__(self) -> int:
        return self._n

    def push(self, t: float, theta: float, omega: float, deflection: float = 0.0) -> None:
        if self._n == self._data.shape[0]:
            grown = np.zeros((self._data.shape[0] * 2, 4))
            grown[: self._n] = self._data
            self._data = grown
        self._data[self._n] = (t, theta, omega, deflection)
        self._n += 1

    def set_last_deflection(self, deflection: float) -> None:
        if self._n == 0:
            raise ValueError("empty trace")
        self._data[self._n - 1, 3] = deflection

    @property
    def times(self) -> np.ndarray:
        return self._data[: self._n, 0]

    @property
    def thetas(self) -> np.ndarray:
        return self._data[: self._n, 1]

    @property
    def omegas(self) -> np.ndarray:
        return self._data[: self._n, 2]

    @property
    def deflections(self) -> np.ndarray:
        return self._data[: self._n, 3]

    @classmethod
    def from_arrays(cls, times, thetas, omegas, deflections) -> "TraceBuffer":
        times = np.asarray(times, dtype=np.float64)
        n = times.size
        buf = cls(capacity_hint=n)
        buf._data[:n, 0] = times
        buf._data[:n, 1] = thetas
        buf._data[:n, 2] = omegas
        buf._data[:n, 3] = deflections
        buf._n = n
        return buf


def window_at(buffer: TraceBuffer, end_index: int, cfg: WindowConfig) -> ObservationWindow:
    """Window whose newest slot is the sample at end_index."""
    if len(buffer) == 0:
        raise ValueError("empty history")
    if not 0 <= end_index < len(buffer):
        raise ValueError(f"end_index {end_index} out of range")
    n = cfg.n_steps
    start = end_index - n + 1
    thetas = _padded_slice(buffer.thetas, start, end_index + 1, n)
    omegas = _padded_slice(buffer.omegas, start, end_index + 1, n)
    if not cfg.include_deflections:
        return ObservationWindow(thetas, omegas, None)
    # one earlier than the state lanes; the slot before the trace began is 0
    deflections = _padded_slice(buffer.deflections, start - 1, end_index, n)
    return ObservationWindow(thetas, omegas, deflections)


def _padded_slice(arr: np.ndarray, start: int, stop: int, n: int) -> np.ndarray:
    if start >= 0:
        return arr[start:stop]
    out = np.zeros(n)
    if stop > 0:
        out[n - stop :] = arr[:stop]
    return out


def build_window(history, t_now: float, cfg: WindowConfig) -> ObservationWindow:
    """Window of the last n samples at or before t_now (half-step tolerance)."""
    buffer = history if isinstance(history, TraceBuffer) else _buffer_from_rows(history)
    if len(buffer) == 0:
        raise ValueError("empty history")
    end = int(np.searchsorted(buffer.times, t_now + 0.5 / cfg.sample_hz, side="right")) - 1
    if end < 0:
        raise ValueError(f"t_now={t_now} precedes the recorded history")
    return window_at(buffer, end, cfg)


def _buffer_from_rows(rows) -> TraceBuffer:
    rows = list(rows)
    if not rows:
        return TraceBuffer(16)
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError("history rows must be (t, theta, omega, deflection)")
    return TraceBuffer.from_arrays(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
