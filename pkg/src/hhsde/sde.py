"""Stochastic simulation of the membrane system driven by a random input.

The voltage and input coordinates advance by Euler-Maruyama; the gating
probabilities use the exact exponential step with the voltage frozen over
the step, which keeps them inside [0, 1] at every step size.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .conductance import ConductanceModel, build_hh_as_conductance_model
from .errors import AdmissibilityError, DivergenceError
from .model import FullState, gate_rate_arrays, membrane_drift_arrays
from .noise import CIRNoise, Noise
from .rng import NormalStream
from .signals import InputSignal

SCHEME = "em-expgate"
CIR_FLOOR_EPS = 1e-9


def model_noise_hash(model: ConductanceModel, noise: Noise) -> str:
    """Digest of the model-plus-noise configuration, for run manifests."""
    doc = json.dumps({"model": model.to_dict(), "noise": noise.to_dict()},
                     sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


@dataclass
class Path:
    dt: float
    t0: float
    states: np.ndarray      # shape (n_steps + 1, 5): v, n, m, h, xi
    seed: int
    scheme: str
    model_hash: str

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.states.shape[0])

    def final_state(self) -> FullState:
        return FullState.from_array(self.states[-1])


def _floor_xi(noise: Noise, xi: np.ndarray) -> np.ndarray:
    if isinstance(noise, CIRNoise):
        return np.maximum(xi, -noise.K + CIR_FLOOR_EPS)
    return xi


class _Stepper:
    """Vectorised one-step transition for a block of paths."""

    def __init__(self, model: ConductanceModel, noise: Noise, dt: float):
        if model.k != 3:
            raise ValueError("the SDE engine drives the three-gate membrane model")
        self.model = model
        self.noise = noise
        self.dt = dt
        self.sqrt_dt = math.sqrt(dt)
        gains = [t.gain for t in model.terms]
        from .model import HHParams
        self.params = HHParams(g_k=gains[0], g_na=gains[1], g_l=model.leak_gain,
                               e_k=model.terms[0].reversal,
                               e_na=model.terms[1].reversal,
                               e_l=model.leak_reversal)

    def step(self, t, v, n, m, h, xi, z):
        dt = self.dt
        dW = self.sqrt_dt * z
        drift = self.noise.drift(t, xi)
        sig = self.noise.sigma(xi)
        xi_new = _floor_xi(self.noise, xi + drift * dt + sig * dW)
        if not self.noise.contains(xi_new):
            raise AdmissibilityError("input left state interval")
        dxi = xi_new - xi
        rates = gate_rate_arrays(v)
        f = membrane_drift_arrays(v, n, m, h, self.params)
        v_new = v + dxi + f * dt
        a_n, n_inf = rates["n"]
        a_m, m_inf = rates["m"]
        a_h, h_inf = rates["h"]
        n_new = n_inf + (n - n_inf) * np.exp(-a_n * dt)
        m_new = m_inf + (m - m_inf) * np.exp(-a_m * dt)
        h_new = h_inf + (h - h_inf) * np.exp(-a_h * dt)
        if not np.all(np.isfinite(v_new)):
            raise DivergenceError(f"divergence at t = {t:.6g} ms")
        return v_new, n_new, m_new, h_new, xi_new


def simulate(x0: FullState, noise: Noise, t_end: float, dt: float = 0.005,
             seed: int = 0, t0: float = 0.0,
             model: ConductanceModel | None = None) -> Path:
    """One path of the coupled system, fully recorded."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    model = model or build_hh_as_conductance_model()
    stepper = _Stepper(model, noise, dt)
    n_steps = int(round((t_end - t0) / dt))
    states = np.empty((n_steps + 1, 5))
    states[0] = x0.as_array()
    stream = NormalStream(seed, 0)
    z = stream.draw(n_steps)
    v, n, m, h, xi = (np.array([c]) for c in states[0])
    for i in range(n_steps):
        v, n, m, h, xi = stepper.step(t0 + i * dt, v, n, m, h, xi,
                                      np.array([z[i]]))
        states[i + 1] = (v[0], n[0], m[0], h[0], xi[0])
    return Path(dt, t0, states, seed, SCHEME,
                model_noise_hash(model, noise))


def simulate_ensemble(x0: FullState, noise: Noise, t_end: float,
                      dt: float = 0.005, seed: int = 0, n_paths: int = 1,
                      t0: float = 0.0, model: ConductanceModel | None = None,
                      per_step=None, block_size: int = 1024,
                      threads: int = 1, chunk_steps: int = 4096) -> np.ndarray:
    """Final states of n_paths independent paths, shape (n_paths, 5).

    Path index i always uses the stream derived from (seed, i), so results
    are identical for any block size or thread count.  per_step, when
    given, is called as per_step(step_index, t_next, block_states,
    path_offset) after every step with block_states of shape (block, 5);
    distinct blocks never share path indices, so accumulating into
    caller-owned per-path arrays is thread-safe.
    """
    model = model or build_hh_as_conductance_model()
    stepper = _Stepper(model, noise, dt)
    n_steps = int(round((t_end - t0) / dt))
    out = np.empty((n_paths, 5))
    x0_arr = x0.as_array()

    def run_block(start: int, stop: int):
        nb = stop - start
        streams = [NormalStream(seed, i) for i in range(start, stop)]
        v = np.full(nb, x0_arr[0])
        n = np.full(nb, x0_arr[1])
        m = np.full(nb, x0_arr[2])
        h = np.full(nb, x0_arr[3])
        xi = np.full(nb, x0_arr[4])
        done = 0
        while done < n_steps:
            chunk = min(chunk_steps, n_steps - done)
            z = np.empty((nb, chunk))
            for j, s in enumerate(streams):
                z[j] = s.draw(chunk)
            for i in range(chunk):
                step_index = done + i
                v, n, m, h, xi = stepper.step(t0 + step_index * dt,
                                              v, n, m, h, xi, z[:, i])
                if per_step is not None:
                    block = np.column_stack([v, n, m, h, xi])
                    per_step(step_index, t0 + (step_index + 1) * dt, block, start)
            done += chunk
        out[start:stop] = np.column_stack([v, n, m, h, xi])

    blocks = [(b, min(b + block_size, n_paths))
              for b in range(0, n_paths, block_size)]
    if threads <= 1 or len(blocks) == 1:
        for b0, b1 in blocks:
            run_block(b0, b1)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda ab: run_block(*ab), blocks))
    return out


def ou_periodic_mean(signal: InputSignal, t: float, tau: float,
                     r_max: float = 40.0, panels: int = 10_000) -> float:
    """Stationary-regime mean of the input at time t.

    Composite-Simpson quadrature of integral_0^inf S(t - r/tau) e^-r dr,
    truncated at r_max (the discarded tail is below 1e-17).
    """
    if panels % 2:
        panels += 1
    r = np.linspace(0.0, r_max, panels + 1)
    f = signal(t - r / tau) * np.exp(-r)
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((r_max / panels / 3.0) * np.sum(w * f))


# -- binary path container ------------------------------------------------------

_MAGIC = b"HHSDEP1\x00"


def write_path_binary(path: Path, fileobj) -> None:
    """Little-endian container: header then row-major float64 states."""
    fileobj.write(_MAGIC)
    fileobj.write(struct.pack("<ddQQ", path.dt, path.t0,
                              path.states.shape[0] - 1, path.seed & (2**64 - 1)))
    fileobj.write(struct.pack("<16s16s", path.scheme.encode()[:16].ljust(16, b"\x00"),
                              path.model_hash.encode()[:16].ljust(16, b"\x00")))
    fileobj.write(path.states.astype("<f8").tobytes())


def read_path_binary(fileobj) -> Path:
    magic = fileobj.read(8)
    if magic != _MAGIC:
        raise ValueError("not a path container (bad magic)")
    dt, t0, n_steps, seed = struct.unpack("<ddQQ", fileobj.read(32))
    scheme, model_hash = struct.unpack("<16s16s", fileobj.read(32))
    data = np.frombuffer(fileobj.read(int(n_steps + 1) * 5 * 8), dtype="<f8")
    states = data.reshape(int(n_steps) + 1, 5).copy()
    return Path(dt, t0, states, int(seed), scheme.rstrip(b"\x00").decode(),
                model_hash.rstrip(b"\x00").decode())
