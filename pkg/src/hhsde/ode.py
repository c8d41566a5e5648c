"""Deterministic integration, equilibria, stable orbits, orbit determinants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, NoSpikingError
from .hoermander import delta_hh
from .model import (
    DEFAULT_PARAMS,
    HHParams,
    HHState,
    alpha_h,
    alpha_m,
    alpha_n,
    beta_h,
    beta_m,
    beta_n,
    equilibrium_curve_point,
    equilibrium_input,
)
from .signals import Constant, InputSignal


@dataclass
class Trajectory:
    t0: float
    dt: float
    states: np.ndarray          # shape (n_steps + 1, 4): v, n, m, h
    max_clamp_excess: float
    input: InputSignal

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.states.shape[0])

    def final_state(self) -> HHState:
        return HHState(*self.states[-1])


def _rhs(t, v, n, m, h, signal, params):
    gk4 = params.g_k * n * n * n * n
    gna3 = params.g_na * m * m * m * h
    dv = signal(t) - (gk4 * (v - params.e_k) + gna3 * (v - params.e_na)
                      + params.g_l * (v - params.e_l))
    dn = alpha_n(v) * (1.0 - n) - beta_n(v) * n
    dm = alpha_m(v) * (1.0 - m) - beta_m(v) * m
    dh = alpha_h(v) * (1.0 - h) - beta_h(v) * h
    return dv, dn, dm, dh


def integrate_hh(x0: HHState, signal: InputSignal | float, t_end: float,
                 dt: float = 0.01, t0: float = 0.0,
                 params: HHParams = DEFAULT_PARAMS) -> Trajectory:
    """Classical fixed-step RK4 for the four-dimensional system.

    Gate values are clamped to [0, 1] after each step; the recorded excess
    stays at rounding level (< 1e-12) for dt <= 0.01.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not isinstance(signal, InputSignal):
        signal = Constant(float(signal))
    n_steps = int(round((t_end - t0) / dt))
    out = np.empty((n_steps + 1, 4))
    v, n, m, h = (float(c) for c in x0)
    out[0] = (v, n, m, h)
    worst = 0.0
    for i in range(n_steps):
        t = t0 + i * dt
        try:
            k1 = _rhs(t, v, n, m, h, signal, params)
            k2 = _rhs(t + 0.5 * dt, v + 0.5 * dt * k1[0], n + 0.5 * dt * k1[1],
                      m + 0.5 * dt * k1[2], h + 0.5 * dt * k1[3], signal, params)
            k3 = _rhs(t + 0.5 * dt, v + 0.5 * dt * k2[0], n + 0.5 * dt * k2[1],
                      m + 0.5 * dt * k2[2], h + 0.5 * dt * k2[3], signal, params)
            k4 = _rhs(t + dt, v + dt * k3[0], n + dt * k3[1],
                      m + dt * k3[2], h + dt * k3[3], signal, params)
        except OverflowError as exc:
            raise DivergenceError(f"divergence at t = {t:.6g} ms") from exc
        v += dt * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0
        n += dt * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0
        m += dt * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]) / 6.0
        h += dt * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]) / 6.0
        for x in (n, m, h):
            if x < 0.0:
                worst = max(worst, -x)
            elif x > 1.0:
                worst = max(worst, x - 1.0)
        n = min(max(n, 0.0), 1.0)
        m = min(max(m, 0.0), 1.0)
        h = min(max(h, 0.0), 1.0)
        if not (math.isfinite(v) and abs(v) < 1e4):
            raise DivergenceError(f"divergence at t = {t + dt:.6g} ms")
        out[i + 1] = (v, n, m, h)
    return Trajectory(t0, dt, out, worst, signal)


def equilibrium_for_input(c: float, params: HHParams = DEFAULT_PARAMS,
                          v_lo: float = -15.0, v_hi: float = 30.0,
                          tol: float = 1e-10) -> HHState:
    """Steady state whose balancing constant input equals c.

    Solves equilibrium_input(v) = c by bisection on the window where that
    map is monotone; the vector field with input c vanishes there.
    """
    f_lo = equilibrium_input(v_lo, params) - c
    f_hi = equilibrium_input(v_hi, params) - c
    if f_lo * f_hi > 0:
        raise ValueError(
            f"no equilibrium in monotone window: input {c} outside "
            f"({equilibrium_input(v_lo, params):.4g}, {equilibrium_input(v_hi, params):.4g})"
        )
    lo, hi = v_lo, v_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (equilibrium_input(mid, params) - c) * f_lo <= 0:
            hi = mid
        else:
            lo = mid
    return equilibrium_curve_point(0.5 * (lo + hi))


# -- orbit detection ----------------------------------------------------------

def _hermite(y0, f0, y1, f1, dt, s):
    """Cubic Hermite interpolation on one step, s in [0, 1]."""
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * dt * f0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * dt * f1)


@dataclass
class Orbit:
    period: float
    samples: np.ndarray          # (n_samples, 4) states at equidistant phases
    sample_times: np.ndarray
    section_state: HHState       # state at the final upward v = 0 crossing
    converged: bool
    transient_discarded: float
    crossing_times: list = field(default_factory=list)
    input: InputSignal | None = None
    diagnostics: str = ""


def detect_stable_orbit(signal: InputSignal | float, x0: HHState,
                        max_time: float = 2000.0, dt: float = 0.01,
                        transient: float = 300.0, n_samples: int = 256,
                        params: HHParams = DEFAULT_PARAMS,
                        rel_tol: float = 1e-3) -> Orbit:
    """Locate a stable spiking orbit via upward crossings of v = 0.

    The transient is discarded, crossings are detected with a +-0.5 mV
    hysteresis band and refined by cubic Hermite interpolation, and the
    orbit counts as converged when three successive inter-crossing
    intervals agree to rel_tol.  Phase samples cover the final cycle.
    """
    if not isinstance(signal, InputSignal):
        signal = Constant(float(signal))
    traj = integrate_hh(x0, signal, max_time, dt, params=params)
    states = traj.states
    times = traj.times()

    def rhs_at(i):
        return np.array(_rhs(times[i], *states[i], signal, params))

    crossings = []
    armed = states[0][0] < -0.5
    for i in range(states.shape[0] - 1):
        if times[i] < transient:
            armed = states[i + 1][0] < -0.5 if not armed else armed
            if states[i + 1][0] < -0.5:
                armed = True
            continue
        v0, v1 = states[i][0], states[i + 1][0]
        if armed and v0 < 0.0 <= v1:
            f0, f1 = rhs_at(i), rhs_at(i + 1)
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if _hermite(v0, f0[0], v1, f1[0], dt, mid) < 0.0:
                    lo = mid
                else:
                    hi = mid
            s = 0.5 * (lo + hi)
            t_cross = times[i] + s * dt
            state = _hermite(states[i], f0, states[i + 1], f1, dt, s)
            crossings.append((t_cross, state))
            armed = False
        elif v1 < -0.5:
            armed = True

    if not crossings:
        raise NoSpikingError(
            f"no spiking detected within {max_time} ms (transient {transient} ms)"
        )

    cross_times = [c[0] for c in crossings]
    intervals = np.diff(cross_times)
    converged = False
    period = float(intervals[-1]) if intervals.size else 0.0
    if intervals.size >= 3:
        last = intervals[-3:]
        spread = (last.max() - last.min()) / last.mean()
        converged = bool(spread < rel_tol)
        period = float(last.mean())
    if intervals.size == 0:
        return Orbit(0.0, np.empty((0, 4)), np.empty(0),
                     HHState(*crossings[-1][1]), False, transient,
                     cross_times, signal, "single crossing only")

    # sample the final full cycle at equidistant phases
    t_start, t_end_cycle = cross_times[-2], cross_times[-1]
    cycle_len = t_end_cycle - t_start
    sample_times = t_start + cycle_len * np.arange(n_samples) / n_samples
    samples = np.empty((n_samples, 4))
    for j, ts in enumerate(sample_times):
        i = min(int((ts - times[0]) / dt), states.shape[0] - 2)
        s = (ts - times[i]) / dt
        samples[j] = _hermite(states[i], rhs_at(i), states[i + 1], rhs_at(i + 1),
                              dt, s)

    diagnostics = "" if converged else (
        f"intervals not settled: last spreads "
        f"{np.round(intervals[-3:], 5).tolist() if intervals.size >= 3 else intervals.tolist()}"
    )
    return Orbit(period, samples, sample_times, HHState(*crossings[-1][1]),
                 converged, transient, cross_times, signal, diagnostics)


# -- determinant along the orbit ----------------------------------------------

@dataclass
class OrbitDeltaReport:
    rows: np.ndarray             # (n, 6): t, v, n, m, h, delta
    window_start: int            # sample index where the negative window opens
    window_end: int              # first sample index past the window (cyclic)
    window_fraction: float
    v_at_window_start: float
    v_at_window_end: float
    min_abs_delta_after_peak: float
    max_abs_delta: float


def delta_along_orbit(orbit: Orbit) -> OrbitDeltaReport:
    """Determinant at the orbit phase samples plus negative-window geometry.

    The reported window is the longest cyclically contiguous run with
    delta <= -0.1 * max|delta|; the post-peak dip records how close
    |delta| comes to zero within a quarter period after the spike top.
    """
    if not orbit.converged:
        raise ValueError("orbit did not converge; delta scan needs a settled cycle")
    n = orbit.samples.shape[0]
    deltas = np.array([delta_hh(*orbit.samples[j]) for j in range(n)])
    rows = np.column_stack([orbit.sample_times, orbit.samples, deltas])
    max_abs = float(np.max(np.abs(deltas)))
    negative = deltas <= -0.1 * max_abs

    # longest cyclic run of True
    best_start, best_len = 0, 0
    j = 0
    doubled = np.concatenate([negative, negative])
    while j < n:
        if doubled[j]:
            k = j
            while k < j + n and doubled[k]:
                k += 1
            if k - j > best_len:
                best_start, best_len = j, k - j
            j = k
        else:
            j += 1
    window_end = (best_start + best_len) % n

    peak = int(np.argmax(orbit.samples[:, 0]))
    quarter = max(1, n // 4)
    after = [(peak + 1 + j) % n for j in range(quarter)]
    min_after_peak = float(np.min(np.abs(deltas[after])))

    return OrbitDeltaReport(
        rows=rows,
        window_start=best_start,
        window_end=window_end,
        window_fraction=best_len / n,
        v_at_window_start=float(orbit.samples[best_start, 0]),
        v_at_window_end=float(orbit.samples[window_end, 0]),
        min_abs_delta_after_peak=min_after_peak,
        max_abs_delta=max_abs,
    )
