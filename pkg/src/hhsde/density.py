"""Ball-hitting probability estimates and low-dimensional density views."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conductance import ConductanceModel
from .errors import AdmissibilityError
from .model import FullState, equilibrium_curve_point
from .noise import CIRNoise, Noise, OUNoise
from .ode import Orbit, equilibrium_for_input
from .sde import simulate_ensemble
from .signals import InputSignal

# default per-coordinate weights of the max-norm ball: epsilon = 1 means
# +-3 mV on voltage-like coordinates and +-0.05 on the gates
DEFAULT_WEIGHTS = np.array([1.0 / 3.0, 20.0, 20.0, 20.0, 1.0 / 3.0])

_Z95 = 1.959963984540054


def wilson_interval(successes: int, n: int, z: float = _Z95) -> tuple[float, float, float]:
    """Point estimate with the Wilson 95% interval, valid near zero."""
    if n <= 0:
        raise ValueError("need at least one trial")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return p, max(center - half, 0.0), min(center + half, 1.0)


@dataclass(frozen=True)
class HitEstimate:
    probability: float
    ci_low: float
    ci_high: float
    n_paths: int
    n_hits: int
    target: np.ndarray
    epsilon: float
    weights: np.ndarray


def weighted_distance(states: np.ndarray, target: np.ndarray,
                      weights: np.ndarray) -> np.ndarray:
    return np.max(np.abs(states - target[None, :]) * weights[None, :], axis=1)


def hit_probability(x0: FullState, noise: Noise, t: float, target,
                    epsilon: float, weights=None, n_paths: int = 10_000,
                    seed: int = 0, dt: float = 0.005,
                    model: ConductanceModel | None = None,
                    threads: int = 1) -> HitEstimate:
    """Fraction of paths ending within the weighted max-norm ball."""
    if n_paths <= 0:
        raise ValueError("n_paths must be positive")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    weights = DEFAULT_WEIGHTS if weights is None else np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    target = np.asarray(target, dtype=float)
    ends = simulate_ensemble(x0, noise, t, dt=dt, seed=seed, n_paths=n_paths,
                             model=model, threads=threads)
    hits = int(np.sum(weighted_distance(ends, target, weights) < epsilon))
    p, lo, hi = wilson_interval(hits, n_paths)
    return HitEstimate(p, lo, hi, n_paths, hits, target, epsilon, weights)


# -- target builders ------------------------------------------------------------

def target_equilibrium_shift(c: float, zeta: float, t: float) -> np.ndarray:
    """Equilibrium state for constant input c with the input shifted by c*t.

    Matches the accessibility statement for inputs with linear cumulative
    drift; the shift must stay inside the input law's state interval.
    """
    state = equilibrium_for_input(c)
    return np.array([*state, zeta + c * t])


def target_equilibrium_mean_reverting(c: float, zeta: float, t: float,
                                      noise: Noise) -> np.ndarray:
    """Same voltage block, with the input coordinate at the OU mean at t.

    For mean-reverting laws the linear shift zeta + c*t is astronomically
    unlikely at desk scale; the stationary mean is the observable analogue.
    """
    if not isinstance(noise, (OUNoise, CIRNoise)):
        raise ValueError("mean-reverting target needs an OU or CIR law")
    s_now = noise.signal(t)
    mean = s_now + (zeta - s_now) * math.exp(-noise.tau * t)
    state = equilibrium_for_input(c)
    return np.array([*state, mean])


def target_orbit_section(orbit: Orbit, zeta: float, signal: InputSignal,
                         duration: float) -> np.ndarray:
    """Orbit point at the upward v=0 crossing, input shifted by its integral."""
    sec = orbit.section_state
    return np.array([sec.v, sec.n, sec.m, sec.h, zeta + signal.integral(duration)])


def validate_shift_admissible(noise: Noise, zeta: float, c: float, t: float,
                              checks: int = 64) -> None:
    """Require zeta + c*s inside the state interval for all 0 <= s <= t."""
    lo, hi = noise.interval
    for s in np.linspace(0.0, t, checks):
        val = zeta + c * s
        if not (lo < val < hi):
            raise AdmissibilityError(
                f"shifted input {val:.6g} leaves state interval at s = {s:.6g}"
            )


# -- projected kernel density -----------------------------------------------------

def projected_density(states: np.ndarray, coords: tuple[int, int],
                      grid: tuple[np.ndarray, np.ndarray],
                      bandwidth: tuple[float, float]) -> np.ndarray:
    """Gaussian-kernel density of a 2-d projection, normalised on the grid.

    Returns the density table d[i, j] on (xs[i], ys[j]) scaled so that
    sum(d) * dx * dy = 1.
    """
    if states.shape[0] < 100:
        raise ValueError("need at least 100 paths for a density estimate")
    bx, by = bandwidth
    if bx <= 0 or by <= 0:
        raise ValueError("degenerate bandwidth")
    xs, ys = (np.asarray(g, dtype=float) for g in grid)
    px = states[:, coords[0]]
    py = states[:, coords[1]]
    kx = np.exp(-0.5 * ((xs[:, None] - px[None, :]) / bx) ** 2)
    ky = np.exp(-0.5 * ((ys[:, None] - py[None, :]) / by) ** 2)
    dens = kx @ ky.T / (states.shape[0] * 2.0 * math.pi * bx * by)
    dx = xs[1] - xs[0]
    dy = ys[1] - ys[0]
    mass = float(np.sum(dens) * dx * dy)
    if mass <= 0:
        raise ValueError("all mass fell outside the grid")
    return dens / mass
