"""Stochastic Hodgkin-Huxley toolkit.

Simulation of the deterministic and stochastically driven Hodgkin-Huxley
system (and generic conductance-based models), hypoellipticity diagnostics
through determinants and numerically computed Lie brackets, control-path
constructions, Monte Carlo ball-hitting estimates and Malliavin covariance
probes.
"""

from .jets import Jet4, expm1_ratio
from .model import (
    DEFAULT_PARAMS,
    F,
    FullState,
    HHParams,
    HHState,
    equilibrium_curve_point,
    equilibrium_input,
    gate_drift,
    hh_vector_field,
    rate,
    steady_state,
)

__version__ = "0.1.0"

__all__ = [
    "Jet4",
    "expm1_ratio",
    "HHParams",
    "HHState",
    "FullState",
    "DEFAULT_PARAMS",
    "F",
    "rate",
    "steady_state",
    "gate_drift",
    "hh_vector_field",
    "equilibrium_curve_point",
    "equilibrium_input",
    "__version__",
]
