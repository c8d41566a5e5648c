"""Hodgkin-Huxley rate functions, parameters, drift and steady-state maps.

Voltage is in mV, time in ms, conductances in mS/cm^2.  The rate functions
are the classical squid-axon ones with the resting potential shifted to
roughly 0 mV.  The two removable singularities (alpha_n at v=10, alpha_m at
v=25) are evaluated through the series limit of x/(e^x - 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .jets import Jet4, SERIES_BAND, expm1_ratio, expm1_ratio_jet, poly_eval
from .jets import _EXPM1_RATIO_SERIES


@dataclass(frozen=True)
class HHParams:
    """Maximal conductances (mS/cm^2) and reversal potentials (mV)."""

    g_k: float = 36.0
    g_na: float = 120.0
    g_l: float = 0.3
    e_k: float = -12.0
    e_na: float = 120.0
    e_l: float = 10.6

    def __post_init__(self):
        if min(self.g_k, self.g_na, self.g_l) <= 0:
            raise ValueError("conductances must be positive")


DEFAULT_PARAMS = HHParams()


class HHState(NamedTuple):
    v: float
    n: float
    m: float
    h: float


class FullState(NamedTuple):
    """HH state plus the value of the random input."""

    hh: HHState
    xi: float

    def as_array(self) -> np.ndarray:
        return np.array([*self.hh, self.xi], dtype=float)

    @staticmethod
    def from_array(x) -> "FullState":
        v, n, m, h, xi = (float(c) for c in x)
        return FullState(HHState(v, n, m, h), xi)


RATE_NAMES = ("alpha_n", "beta_n", "alpha_m", "beta_m", "alpha_h", "beta_h")
GATES = ("n", "m", "h")


# -- scalar rates -----------------------------------------------------------

def alpha_n(v: float) -> float:
    return 0.1 * expm1_ratio(1.0 - 0.1 * v)


def beta_n(v: float) -> float:
    return 0.125 * math.exp(-v / 80.0)


def alpha_m(v: float) -> float:
    return expm1_ratio(2.5 - 0.1 * v)


def beta_m(v: float) -> float:
    return 4.0 * math.exp(-v / 18.0)


def alpha_h(v: float) -> float:
    return 0.07 * math.exp(-v / 20.0)


def beta_h(v: float) -> float:
    return 1.0 / (math.exp(3.0 - 0.1 * v) + 1.0)


_SCALAR_RATES = {
    "alpha_n": alpha_n,
    "beta_n": beta_n,
    "alpha_m": alpha_m,
    "beta_m": beta_m,
    "alpha_h": alpha_h,
    "beta_h": beta_h,
}


# -- jet rates --------------------------------------------------------------

def _affine_jet(p: float, q: float, v: Jet4) -> Jet4:
    return v * q + p


def rate(name: str, v) -> Jet4:
    """Order-4 jet of the named rate function at v.

    v may be a Jet4 (evaluated as given) or a float (seeded as the
    identity jet at that point).
    """
    if not isinstance(v, Jet4):
        v = Jet4.variable(float(v))
    if name == "alpha_n":
        return expm1_ratio_jet(_affine_jet(1.0, -0.1, v)) * 0.1
    if name == "beta_n":
        return _affine_jet(0.0, -1.0 / 80.0, v).exp() * 0.125
    if name == "alpha_m":
        return expm1_ratio_jet(_affine_jet(2.5, -0.1, v))
    if name == "beta_m":
        return _affine_jet(0.0, -1.0 / 18.0, v).exp() * 4.0
    if name == "alpha_h":
        return _affine_jet(0.0, -1.0 / 20.0, v).exp() * 0.07
    if name == "beta_h":
        return 1.0 / (_affine_jet(3.0, -0.1, v).exp() + 1.0)
    raise ValueError(f"unknown rate name: {name!r}")


def gate_rate_jets(v) -> dict[str, tuple[Jet4, Jet4]]:
    """Jets of (a_x, b_x) for each gate x, with a = alpha+beta, b = alpha."""
    out = {}
    for g in GATES:
        a = rate(f"alpha_{g}", v)
        b = rate(f"beta_{g}", v)
        out[g] = (a + b, a)
    return out


# -- steady states and drifts ----------------------------------------------

def steady_state(v: float) -> tuple[float, float, float]:
    """Equilibrium gate values (n, m, h) for the voltage held at v."""
    n = alpha_n(v) / (alpha_n(v) + beta_n(v))
    m = alpha_m(v) / (alpha_m(v) + beta_m(v))
    h = alpha_h(v) / (alpha_h(v) + beta_h(v))
    return n, m, h


def gate_drift(gate: str, v: float, x: float) -> float:
    a = _SCALAR_RATES[f"alpha_{gate}"](v)
    b = _SCALAR_RATES[f"beta_{gate}"](v)
    return a * (1.0 - x) - b * x


def conductance_sum(n: float, m: float, h: float,
                    params: HHParams = DEFAULT_PARAMS) -> float:
    """Total membrane conductance g_K n^4 + g_Na m^3 h + g_L (> 0 on [0,1]^3)."""
    return params.g_k * n ** 4 + params.g_na * m ** 3 * h + params.g_l


def F(state: HHState, params: HHParams = DEFAULT_PARAMS) -> float:
    """Current-balance drift of the membrane potential (mV/ms).

    dV = I(t) dt + F dt, so F is affine in v with negative slope
    -conductance_sum for fixed gates.
    """
    v, n, m, h = state
    return -(params.g_k * n ** 4 * (v - params.e_k)
             + params.g_na * m ** 3 * h * (v - params.e_na)
             + params.g_l * (v - params.e_l))


def hh_vector_field(state: HHState, input_value: float,
                    params: HHParams = DEFAULT_PARAMS) -> tuple[float, float, float, float]:
    """Right-hand side (dv, dn, dm, dh) of the deterministic system."""
    v = state.v
    return (
        F(state, params) + input_value,
        gate_drift("n", v, state.n),
        gate_drift("m", v, state.m),
        gate_drift("h", v, state.h),
    )


def equilibrium_curve_point(v: float) -> HHState:
    n, m, h = steady_state(v)
    return HHState(v, n, m, h)


def equilibrium_input(v: float, params: HHParams = DEFAULT_PARAMS) -> float:
    """Constant input that balances the drift at the steady state for v.

    This is -F(v, n_inf(v), m_inf(v), h_inf(v)); at v = 0 it is the
    anchor value close to -0.0534, and it maps (-10, +10) onto the window
    (-6.15, 26.61) of inputs with an equilibrium on that voltage range.
    """
    return -F(equilibrium_curve_point(v), params)


# -- numpy array versions (used by the vectorised SDE engine) ---------------

def _expm1_ratio_np(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_BAND
    safe = np.where(small, 1.0, x)
    raw = safe / np.expm1(safe)
    series = np.zeros_like(x)
    for c in reversed(_EXPM1_RATIO_SERIES):
        series = series * x + c
    return np.where(small, series, raw)


def gate_rate_arrays(v: np.ndarray) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Vectorised (a_x, x_inf) per gate for an array of voltages."""
    a_n = 0.1 * _expm1_ratio_np(1.0 - 0.1 * v)
    b_n = 0.125 * np.exp(-v / 80.0)
    a_m = _expm1_ratio_np(2.5 - 0.1 * v)
    b_m = 4.0 * np.exp(-v / 18.0)
    a_h = 0.07 * np.exp(-v / 20.0)
    b_h = 1.0 / (np.exp(3.0 - 0.1 * v) + 1.0)
    return {
        "n": (a_n + b_n, a_n / (a_n + b_n)),
        "m": (a_m + b_m, a_m / (a_m + b_m)),
        "h": (a_h + b_h, a_h / (a_h + b_h)),
    }


def membrane_drift_arrays(v, n, m, h, params: HHParams = DEFAULT_PARAMS):
    """Vectorised F for ensembles of states."""
    return -(params.g_k * n ** 4 * (v - params.e_k)
             + params.g_na * m ** 3 * h * (v - params.e_na)
             + params.g_l * (v - params.e_l))


def _expm1_ratio_prime_np(x: np.ndarray) -> np.ndarray:
    """d/dx of x/(e^x - 1), with the same series guard as the value."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_BAND
    safe = np.where(small, 1.0, x)
    em = np.expm1(safe)
    raw = 1.0 / em - safe * np.exp(safe) / em ** 2
    series = np.zeros_like(x)
    for k, c in reversed(list(enumerate(_EXPM1_RATIO_SERIES))):
        if k == 0:
            continue
        series = series * x + k * c
    return np.where(small, series, raw)


def gate_rate_derivative_arrays(v: np.ndarray) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Vectorised voltage derivatives (a_x', b_x') per gate."""
    v = np.asarray(v, dtype=float)
    da_n = -0.01 * _expm1_ratio_prime_np(1.0 - 0.1 * v)
    db_n = -0.125 / 80.0 * np.exp(-v / 80.0)
    da_m = -0.1 * _expm1_ratio_prime_np(2.5 - 0.1 * v)
    db_m = -4.0 / 18.0 * np.exp(-v / 18.0)
    da_h = -0.07 / 20.0 * np.exp(-v / 20.0)
    eu = np.exp(3.0 - 0.1 * v)
    db_h = 0.1 * eu / (eu + 1.0) ** 2
    return {
        "n": (da_n + db_n, da_n),
        "m": (da_m + db_m, da_m),
        "h": (da_h + db_h, da_h),
    }
