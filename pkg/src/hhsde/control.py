"""Deterministic control paths: voltage ramps and arbitrary-input imitation.

The constructions produce a path Z together with the control intensity
hdot that makes the noise-replaced system track Z exactly.  Tube hitting
probabilities then probe, at desk scale, that the driven system follows
such paths with positive probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conductance import ConductanceModel, build_hh_as_conductance_model
from .density import DEFAULT_WEIGHTS, HitEstimate, wilson_interval
from .errors import AdmissibilityError, SimulationError
from .model import FullState
from .noise import Noise
from .sde import simulate_ensemble
from .signals import Constant, InputSignal
from .system import CoupledSystem

SIGMA_FLOOR = 1e-12


def smooth_step(s: float) -> float:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, exp-based in between."""
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    f = math.exp(-1.0 / s)
    g = math.exp(-1.0 / (1.0 - s))
    return f / (f + g)


def smooth_step_prime(s: float) -> float:
    if s <= 0.0 or s >= 1.0:
        return 0.0
    f = math.exp(-1.0 / s)
    g = math.exp(-1.0 / (1.0 - s))
    fp = f / (s * s)
    gp = -g / ((1.0 - s) * (1.0 - s))
    return (fp * g - f * gp) / (f + g) ** 2


@dataclass
class ControlPath:
    times: np.ndarray
    Z: np.ndarray              # (n_steps + 1, m)
    hdot: np.ndarray           # control intensity sampled on the grid
    admissible: bool
    kind: str
    model: ConductanceModel
    noise: Noise

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def _hdot_value(noise: Noise, t: float, xi: float, forcing: float) -> float:
    """(forcing - b_m + sigma sigma'/2) / sigma at the input coordinate."""
    sig = noise.sigma(xi)
    if abs(sig) < SIGMA_FLOOR:
        raise SimulationError("control undefined: diffusion vanishes on path")
    return (forcing - noise.drift(t, xi)
            + 0.5 * sig * noise.sigma_prime(xi)) / sig


def _interval_margin(noise: Noise, xi: np.ndarray) -> float:
    lo, hi = noise.interval
    margin = math.inf
    if math.isfinite(lo):
        margin = min(margin, float(np.min(xi - lo)))
    if math.isfinite(hi):
        margin = min(margin, float(np.min(hi - xi)))
    return margin


def build_ramp_path(x0: FullState, z1_target: float, t_end: float,
                    dt: float = 1e-3, noise: Noise | None = None,
                    model: ConductanceModel | None = None) -> ControlPath:
    """Ramp the voltage to z1_target over [0, 1] and hold it.

    The voltage coordinate follows the smooth ramp exactly, the gates relax
    under it, and the input coordinate absorbs whatever increment balances
    the current; hdot is the control realising that input path.
    """
    if t_end <= 1.0:
        raise ValueError("ramp paths need t_end > 1 (the ramp occupies [0, 1])")
    if noise is None:
        raise ValueError("a noise law is required (its sigma enters hdot)")
    model = model or build_hh_as_conductance_model()
    k = model.k
    n_steps = int(round(t_end / dt))
    times = dt * np.arange(n_steps + 1)
    x0_arr = x0.as_array()
    v0 = x0_arr[0]
    dz = z1_target - v0

    def gamma(s):
        return v0 + dz * smooth_step(s)

    def gamma_dot(s):
        return dz * smooth_step_prime(s)

    # RK4 on the gates plus the running integral of the membrane drift
    def rhs(s, y):
        g = gamma(s)
        gates = y[:k]
        out = np.empty(k + 1)
        for i in range(k):
            out[i] = model.gate_drift(i, g, gates[i])
        out[k] = model.membrane_drift(g, gates)
        return out

    y = np.concatenate([x0_arr[1:1 + k], [0.0]])
    Z = np.empty((n_steps + 1, k + 2))
    hdot = np.empty(n_steps + 1)
    for i in range(n_steps + 1):
        s = times[i]
        g = gamma(s)
        drift_integral = y[k]
        zm = x0_arr[-1] - v0 + g - drift_integral
        Z[i] = (g, *y[:k], zm)
        forcing = gamma_dot(s) - model.membrane_drift(g, y[:k])
        hdot[i] = _hdot_value(noise, s, zm, forcing)
        if i < n_steps:
            k1 = rhs(s, y)
            k2 = rhs(s + dt / 2, y + dt / 2 * k1)
            k3 = rhs(s + dt / 2, y + dt / 2 * k2)
            k4 = rhs(s + dt, y + dt * k3)
            y = y + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    admissible = _interval_margin(noise, Z[:, -1]) > 0.0
    return ControlPath(times, Z, hdot, admissible, "ramp", model, noise)


def build_imitation_path(x0: FullState, signal: InputSignal | float,
                         t_end: float, dt: float = 1e-3,
                         noise: Noise | None = None,
                         model: ConductanceModel | None = None) -> ControlPath:
    """Track the deterministic system under an arbitrary input signal.

    The membrane block follows the input-driven flow, the input coordinate
    moves by the running integral of the signal, and hdot compensates the
    input law's own drift so the noise budget realises exactly the signal.
    """
    if not isinstance(signal, InputSignal):
        signal = Constant(float(signal))
    if noise is None:
        raise ValueError("a noise law is required (its sigma enters hdot)")
    model = model or build_hh_as_conductance_model()
    k = model.k
    n_steps = int(round(t_end / dt))
    times = dt * np.arange(n_steps + 1)
    x0_arr = x0.as_array()

    def rhs(s, y):
        return model.vector_field(y, signal(s))

    y = x0_arr[:k + 1].copy()
    Z = np.empty((n_steps + 1, k + 2))
    hdot = np.empty(n_steps + 1)
    lo, hi = noise.interval
    for i in range(n_steps + 1):
        s = times[i]
        chi = x0_arr[-1] + signal.integral(s)
        if not (lo < chi < hi):
            raise AdmissibilityError(
                f"admissibility violated: input coordinate {chi:.6g} leaves "
                f"state interval at t = {s:.6g}"
            )
        Z[i] = (*y, chi)
        hdot[i] = _hdot_value(noise, s, chi, signal(s))
        if i < n_steps:
            k1 = rhs(s, y)
            k2 = rhs(s + dt / 2, y + dt / 2 * k1)
            k3 = rhs(s + dt / 2, y + dt / 2 * k2)
            k4 = rhs(s + dt, y + dt * k3)
            y = y + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    admissible = _interval_margin(noise, Z[:, -1]) > 0.0
    return ControlPath(times, Z, hdot, admissible, "imitation", model, noise)


def verify_roundtrip(path: ControlPath) -> float:
    """Integrate the noise-replaced system with the stored control.

    RK4 on the same grid with the control linearly interpolated; returns
    the max-norm deviation from the stored path, the self-consistency
    check of the construction.
    """
    if not path.admissible:
        raise SimulationError("path marked inadmissible; roundtrip undefined")
    system = CoupledSystem(path.model, path.noise)
    times, Z, hdot = path.times, path.Z, path.hdot
    dt = path.dt

    def hdot_at(s):
        return float(np.interp(s, times, hdot))

    def rhs(s, x):
        return system.strat_drift(s, x) + system.sigma_vec(x) * hdot_at(s)

    x = Z[0].copy()
    dev = 0.0
    for i in range(len(times) - 1):
        s = times[i]
        k1 = rhs(s, x)
        k2 = rhs(s + dt / 2, x + dt / 2 * k1)
        k3 = rhs(s + dt / 2, x + dt / 2 * k2)
        k4 = rhs(s + dt, x + dt * k3)
        x = x + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        dev = max(dev, float(np.max(np.abs(x - Z[i + 1]))))
    return dev


def tube_probability(path: ControlPath, delta: float, n_paths: int = 10_000,
                     seed: int = 0, weights=None, threads: int = 1) -> HitEstimate:
    """Probability that driven paths stay inside the weighted tube.

    Simulates on the control path's grid and counts paths whose weighted
    max-norm distance to Z stays below delta at every grid time.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    weights = DEFAULT_WEIGHTS if weights is None else np.asarray(weights, dtype=float)
    Z = path.Z
    alive = np.ones(n_paths, dtype=bool)

    def per_step(i_step, t_next, block, offset):
        ref = Z[i_step + 1]
        dist = np.max(np.abs(block - ref[None, :]) * weights[None, :], axis=1)
        sl = slice(offset, offset + block.shape[0])
        alive[sl] &= dist <= delta

    x0 = FullState.from_array(Z[0])
    simulate_ensemble(x0, path.noise, float(path.times[-1]), dt=path.dt,
                      seed=seed, n_paths=n_paths, model=path.model,
                      per_step=per_step, threads=threads)
    hits = int(np.sum(alive))
    p, lo, hi = wilson_interval(hits, n_paths)
    return HitEstimate(p, lo, hi, n_paths, hits, Z[-1].copy(), delta, weights)
