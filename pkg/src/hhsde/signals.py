"""Deterministic input signals: constant, sinusoid, tabulated."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InputSignal:
    """Scalar signal of time; evaluates on floats and numpy arrays."""

    def __call__(self, t):
        raise NotImplementedError

    def integral(self, t):
        """Integral of the signal over [0, t]."""
        raise NotImplementedError

    def sup_abs(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(InputSignal):
    value: float

    def __call__(self, t):
        if isinstance(t, np.ndarray):
            return np.full_like(t, self.value, dtype=float)
        return self.value

    def integral(self, t):
        return self.value * t

    def sup_abs(self):
        return abs(self.value)

    def to_dict(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class Sinusoid(InputSignal):
    """a * (1 + sin(2 pi t / period)), oscillating between 0 and 2a."""

    amplitude: float
    period: float

    def __post_init__(self):
        if self.amplitude <= 0 or self.period <= 0:
            raise ValueError("sinusoid needs amplitude > 0 and period > 0")

    def __call__(self, t):
        if isinstance(t, np.ndarray):
            return self.amplitude * (1.0 + np.sin(2.0 * np.pi * t / self.period))
        return self.amplitude * (1.0 + math.sin(2.0 * math.pi * t / self.period))

    def integral(self, t):
        w = 2.0 * math.pi / self.period
        if isinstance(t, np.ndarray):
            return self.amplitude * (t + (1.0 - np.cos(w * t)) / w)
        return self.amplitude * (t + (1.0 - math.cos(w * t)) / w)

    def sup_abs(self):
        return 2.0 * self.amplitude

    def to_dict(self):
        return {"kind": "sinusoid", "amplitude": self.amplitude, "period": self.period}


class Table(InputSignal):
    """Piecewise-linear interpolation of sampled (t_i, I_i) pairs."""

    def __init__(self, times, values):
        t = np.asarray(times, dtype=float)
        x = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != x.shape or t.size < 2:
            raise ValueError("table needs matching 1-d arrays of length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("table times must be strictly increasing")
        self.times = t
        self.values = x
        # cumulative trapezoid for the running integral
        self._cum = np.concatenate(
            ([0.0], np.cumsum(0.5 * (x[1:] + x[:-1]) * np.diff(t)))
        )

    def __call__(self, t):
        out = np.interp(t, self.times, self.values)
        return out if isinstance(t, np.ndarray) else float(out)

    def integral(self, t):
        base = np.interp(t, self.times, self._cum)
        # linear interpolation of the integral is exact off the nodes only
        # to first order; correct with the local trapezoid
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0,
                      self.times.size - 2)
        t0 = self.times[idx]
        frac = np.asarray(t) - t0
        v0 = np.interp(t0, self.times, self.values)
        vt = np.interp(t, self.times, self.values)
        exact = self._cum[idx] + 0.5 * (v0 + vt) * frac
        return exact if isinstance(t, np.ndarray) else float(exact)

    def sup_abs(self):
        return float(np.max(np.abs(self.values)))

    def to_dict(self):
        return {"kind": "table", "times": self.times.tolist(),
                "values": self.values.tolist()}


def signal_from_dict(d) -> InputSignal:
    if isinstance(d, (int, float)):
        return Constant(float(d))
    kind = d.get("kind")
    if kind == "constant":
        return Constant(float(d["value"]))
    if kind == "sinusoid":
        return Sinusoid(float(d["amplitude"]), float(d["period"]))
    if kind == "table":
        return Table(d["times"], d["values"])
    raise ValueError(f"unknown signal kind: {kind!r}")
