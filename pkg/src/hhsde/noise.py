"""Random-input laws for the last coordinate: OU, CIR, or user-supplied."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .signals import Constant, InputSignal


def _as_signal(s) -> InputSignal:
    if isinstance(s, InputSignal):
        return s
    return Constant(float(s))


class Noise:
    """Mean-reverting diffusion dxi = drift(t, xi) dt + sigma(xi) dW on U."""

    interval: tuple[float, float]  # the open state interval U

    def drift(self, t, xi):
        raise NotImplementedError

    def sigma(self, xi):
        raise NotImplementedError

    def sigma_prime(self, xi):
        raise NotImplementedError

    def drift_dxi(self, t, xi):
        """d drift / d xi, needed by the first-variation flow."""
        raise NotImplementedError

    def contains(self, xi) -> bool:
        lo, hi = self.interval
        return bool(np.all((xi > lo) & (xi < hi)))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class OUNoise(Noise):
    """d xi = (S(t) - xi) tau dt + gamma sqrt(tau) dW on the whole line."""

    tau: float
    gamma: float
    signal: InputSignal = Constant(0.0)

    def __post_init__(self):
        if self.tau <= 0 or self.gamma < 0:
            raise ValueError("OU noise needs tau > 0 and gamma >= 0")
        object.__setattr__(self, "signal", _as_signal(self.signal))

    interval = (-math.inf, math.inf)

    def drift(self, t, xi):
        return (self.signal(t) - xi) * self.tau

    def sigma(self, xi):
        if isinstance(xi, np.ndarray):
            return np.full_like(xi, self.gamma * math.sqrt(self.tau))
        return self.gamma * math.sqrt(self.tau)

    def sigma_prime(self, xi):
        if isinstance(xi, np.ndarray):
            return np.zeros_like(xi)
        return 0.0

    def drift_dxi(self, t, xi):
        return -self.tau

    def stationary_std(self) -> float:
        # stationary variance gamma^2 / 2 for a frozen signal
        return self.gamma / math.sqrt(2.0)

    def to_dict(self):
        return {"kind": "ou", "tau": self.tau, "gamma": self.gamma,
                "signal": self.signal.to_dict()}


@dataclass(frozen=True)
class CIRNoise(Noise):
    """Square-root diffusion on U = (-K, inf): sigma = gamma sqrt(tau (xi+K))."""

    tau: float
    gamma: float
    signal: InputSignal = Constant(0.0)
    K: float = 1.0

    def __post_init__(self):
        if self.tau <= 0 or self.gamma < 0:
            raise ValueError("CIR noise needs tau > 0 and gamma >= 0")
        object.__setattr__(self, "signal", _as_signal(self.signal))
        admissible = self.gamma ** 2 / 2.0 + self.signal.sup_abs()
        if self.K <= admissible:
            raise ValueError(
                f"CIR shift K = {self.K} must exceed gamma^2/2 + sup|S| = {admissible}"
            )
        object.__setattr__(self, "interval", (-self.K, math.inf))

    def drift(self, t, xi):
        return (self.signal(t) - xi) * self.tau

    def _q(self, xi):
        if isinstance(xi, np.ndarray):
            return np.sqrt(np.maximum(xi + self.K, 0.0))
        return math.sqrt(max(xi + self.K, 0.0))

    def sigma(self, xi):
        return self.gamma * math.sqrt(self.tau) * self._q(xi)

    def sigma_prime(self, xi):
        q = self._q(xi)
        scale = self.gamma * math.sqrt(self.tau)
        if isinstance(xi, np.ndarray):
            return np.where(q > 0, scale / (2.0 * np.maximum(q, 1e-300)), 0.0)
        return scale / (2.0 * q) if q > 0 else 0.0

    def drift_dxi(self, t, xi):
        return -self.tau

    def to_dict(self):
        return {"kind": "cir", "tau": self.tau, "gamma": self.gamma,
                "K": self.K, "signal": self.signal.to_dict()}


class GenericNoise(Noise):
    """User-supplied drift/diffusion hook; only OU/CIR are exercised by tests."""

    def __init__(self, drift: Callable, sigma: Callable,
                 sigma_prime: Callable | None = None,
                 interval: tuple[float, float] = (-math.inf, math.inf)):
        self._drift = drift
        self._sigma = sigma
        self._sigma_prime = sigma_prime
        self.interval = interval

    def drift(self, t, xi):
        return self._drift(t, xi)

    def sigma(self, xi):
        return self._sigma(xi)

    def sigma_prime(self, xi):
        if self._sigma_prime is not None:
            return self._sigma_prime(xi)
        h = 1e-6 * (1.0 + abs(xi))
        return (self._sigma(xi + h) - self._sigma(xi - h)) / (2.0 * h)

    def drift_dxi(self, t, xi):
        h = 1e-6 * (1.0 + abs(xi))
        return (self._drift(t, xi + h) - self._drift(t, xi - h)) / (2.0 * h)

    def to_dict(self):
        return {"kind": "generic"}


def noise_from_dict(d: dict) -> Noise:
    kind = d.get("kind")
    from .signals import signal_from_dict
    if kind == "ou":
        return OUNoise(float(d["tau"]), float(d["gamma"]),
                       signal_from_dict(d.get("signal", 0.0)))
    if kind == "cir":
        return CIRNoise(float(d["tau"]), float(d["gamma"]),
                        signal_from_dict(d.get("signal", 0.0)), K=float(d["K"]))
    raise ValueError(f"unknown noise kind: {kind!r}")
