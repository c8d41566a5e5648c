"""First-variation flow, its inverse, and the Malliavin covariance matrix.

The flow Y (Jacobian of the solution in its initial condition) and the
state X evolve jointly under shared Brownian increments; Z = Y^-1 comes
from direct inversion, and the covariance is assembled as
Y_t (integral of Z sigma sigma* Z* ds) Y_t*.  An independent integration
of Z by its own equation cross-validates the inversion route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conductance import ConductanceModel, build_hh_as_conductance_model
from .model import (
    FullState,
    gate_rate_arrays,
    gate_rate_derivative_arrays,
    membrane_drift_arrays,
)
from .noise import Noise
from .rng import NormalStream
from .system import CoupledSystem

COND_LIMIT = 1e12


@dataclass
class FlowSample:
    t: float
    state: FullState
    Y: np.ndarray
    C: np.ndarray
    sigma_mal: np.ndarray
    lambda_min: float
    det: float
    cond_Y: float
    flagged: bool               # flow ill-conditioned or path left the box


def _drift_jacobian_batch(model: ConductanceModel, noise: Noise, t: float,
                          states: np.ndarray) -> np.ndarray:
    """Vectorised drift Jacobian for HH-structured models, shape (P, 5, 5)."""
    v, n, m, h, xi = states.T
    P = states.shape[0]
    gains = [term.gain for term in model.terms]
    g_k, g_na = gains[0], gains[1]
    e_k, e_na = model.terms[0].reversal, model.terms[1].reversal
    g_l = model.leak_gain
    jac = np.zeros((P, 5, 5))
    cond_total = g_k * n ** 4 + g_na * m ** 3 * h + g_l
    jac[:, 0, 0] = -cond_total
    jac[:, 0, 1] = -4.0 * g_k * n ** 3 * (v - e_k)
    jac[:, 0, 2] = -3.0 * g_na * m ** 2 * h * (v - e_na)
    jac[:, 0, 3] = -g_na * m ** 3 * (v - e_na)
    dxi = noise.drift_dxi(t, xi)
    jac[:, 0, 4] = dxi
    derivs = gate_rate_derivative_arrays(v)
    rates = gate_rate_arrays(v)
    for row, (gate, x) in enumerate(zip("nmh", (n, m, h)), start=1):
        da, db = derivs[gate]
        a, _ = rates[gate]
        jac[:, row, 0] = -da * x + db
        jac[:, row, row] = -a
    jac[:, 4, 4] = dxi
    return jac


def _sigma_terms(system: CoupledSystem, xi: np.ndarray):
    """sigma(xi) and sigma'(xi) broadcast over paths, plus the direction."""
    sig = system.noise.sigma(xi)
    sigp = system.noise.sigma_prime(xi)
    e = system.noise_direction()
    return np.atleast_1d(sig), np.atleast_1d(sigp), e


class _FlowEngine:
    """Joint Euler-Maruyama for (X, Y) with trapezoid accumulation of C."""

    def __init__(self, x0: FullState, noise: Noise, dt: float, seed: int,
                 n_paths: int, model: ConductanceModel | None = None,
                 box: tuple | None = None):
        self.model = model or build_hh_as_conductance_model()
        if self.model.k != 3:
            raise ValueError("the flow engine drives the three-gate membrane model")
        self.system = CoupledSystem(self.model, noise)
        self.noise = noise
        self.dt = dt
        self.box = box
        P = n_paths
        self.X = np.tile(x0.as_array(), (P, 1))
        self.Y = np.tile(np.eye(5), (P, 1, 1))
        self.C = np.zeros((P, 5, 5))
        self.exited = np.zeros(P, dtype=bool)
        self.streams = [NormalStream(seed, i) for i in range(P)]
        self.t = 0.0
        self._integrand = self._zsig_outer()

    def _zsig_outer(self) -> np.ndarray:
        Z = np.linalg.inv(self.Y)
        sig, _, e = _sigma_terms(self.system, self.X[:, 4])
        sigma_vec = sig[:, None] * e[None, :]
        u = np.einsum("pij,pj->pi", Z, sigma_vec)
        return np.einsum("pi,pj->pij", u, u)

    def step(self, z: np.ndarray) -> None:
        dt, X = self.dt, self.X
        dW = math.sqrt(dt) * z
        v, n, m, h, xi = X.T
        f = membrane_drift_arrays(v, n, m, h, self.system_params())
        rates = gate_rate_arrays(v)
        sig, sigp, e = _sigma_terms(self.system, xi)
        b_xi = self.noise.drift(self.t, xi)
        drift = np.column_stack([
            f + b_xi,
            rates["n"][0] * (rates["n"][1] - n),
            rates["m"][0] * (rates["m"][1] - m),
            rates["h"][0] * (rates["h"][1] - h),
            b_xi,
        ])
        jac = _drift_jacobian_batch(self.model, self.noise, self.t, X)
        # dY = db Y dt + dsigma Y dW; dsigma has only the last column
        dY = np.einsum("pij,pjk->pik", jac, self.Y) * dt
        dsig_col = sigp[:, None] * e[None, :]          # (P, 5) column 4 of dsigma
        y_row4 = self.Y[:, 4, :]                       # (P, 5)
        dY += np.einsum("pi,pk,p->pik", dsig_col, y_row4, dW)
        X_new = X + drift * dt + (sig * dW)[:, None] * e[None, :]
        live = ~self.exited
        self.X[live] = X_new[live]
        self.Y[live] += dY[live]
        g_new = self._zsig_outer()
        self.C[live] += 0.5 * dt * (self._integrand[live] + g_new[live])
        self._integrand = g_new
        self.t += dt
        if self.box is not None:
            lo, hi = self.box
            outside = np.any((self.X < lo) | (self.X > hi), axis=1)
            self.exited |= outside

    def system_params(self):
        from .model import HHParams
        gains = [t.gain for t in self.model.terms]
        return HHParams(g_k=gains[0], g_na=gains[1], g_l=self.model.leak_gain,
                        e_k=self.model.terms[0].reversal,
                        e_na=self.model.terms[1].reversal,
                        e_l=self.model.leak_reversal)

    def run(self, n_steps: int, draw_all: bool = True) -> None:
        z = np.empty((len(self.streams), n_steps))
        for j, s in enumerate(self.streams):
            z[j] = s.draw(n_steps)
        for i in range(n_steps):
            self.step(z[:, i])

    def samples(self) -> list[FlowSample]:
        out = []
        sigma_mal = np.einsum("pij,pjk,plk->pil", self.Y, self.C, self.Y)
        sigma_mal = 0.5 * (sigma_mal + np.transpose(sigma_mal, (0, 2, 1)))
        for p in range(self.X.shape[0]):
            eigs = np.linalg.eigvalsh(sigma_mal[p])
            cond = float(np.linalg.cond(self.Y[p]))
            out.append(FlowSample(
                t=self.t,
                state=FullState.from_array(self.X[p]),
                Y=self.Y[p].copy(),
                C=self.C[p].copy(),
                sigma_mal=sigma_mal[p],
                lambda_min=float(eigs[0]),
                det=float(np.linalg.det(sigma_mal[p])),
                cond_Y=cond,
                flagged=bool(self.exited[p] or cond > COND_LIMIT),
            ))
        return out


def simulate_with_flow(x0: FullState, noise: Noise, t_end: float,
                       dt: float = 1e-3, seed: int = 0,
                       record_every: int | None = None,
                       model: ConductanceModel | None = None,
                       box: tuple | None = None) -> list[FlowSample]:
    """One path of (X, Y, C) with covariance samples along the way."""
    engine = _FlowEngine(x0, noise, dt, seed, 1, model, box)
    n_steps = int(round(t_end / dt))
    stride = record_every or max(1, n_steps // 20)
    out = []
    z = engine.streams[0].draw(n_steps)
    for i in range(n_steps):
        engine.step(z[i:i + 1])
        if (i + 1) % stride == 0 or i == n_steps - 1:
            out.append(engine.samples()[0])
    return out


def flow_endpoint_ensemble(x0: FullState, noise: Noise, t_end: float,
                           dt: float = 1e-3, seed: int = 0, n_paths: int = 100,
                           model: ConductanceModel | None = None,
                           box: tuple | None = None) -> list[FlowSample]:
    """Covariance samples at t_end for an ensemble of paths."""
    engine = _FlowEngine(x0, noise, dt, seed, n_paths, model, box)
    engine.run(int(round(t_end / dt)))
    return engine.samples()


def inverse_flow_consistency(x0: FullState, noise: Noise, t_end: float,
                             dt: float = 1e-3, seed: int = 0,
                             model: ConductanceModel | None = None) -> float:
    """Max-norm residual of Z_t Y_t - I with Z integrated by its own SDE.

    Y follows the same joint scheme as the flow engine; Z evolves by the
    right-multiplicative inverse-flow equation (midpoint drift, midpoint
    Stratonovich noise) on the same Brownian increments.
    """
    engine = _FlowEngine(x0, noise, dt, seed, 1, model)
    system = engine.system
    Z = np.eye(5)
    residual = 0.0
    n_steps = int(round(t_end / dt))
    z_draw = engine.streams[0].draw(n_steps)
    for i in range(n_steps):
        t = engine.t
        X_old = engine.X.copy()
        engine.step(z_draw[i:i + 1])
        X_new = engine.X
        dW = math.sqrt(dt) * z_draw[i]
        X_mid = 0.5 * (X_old + X_new)
        t_mid = t + 0.5 * dt
        jac_mid = _drift_jacobian_batch(engine.model, noise, t_mid, X_mid)[0]
        sig, sigp, e = _sigma_terms(system, X_mid[:, 4])
        dsig = np.zeros((5, 5))
        dsig[:, 4] = sigp[0] * e
        # Stratonovich drift correction: the xi-column picks up
        # -(1/2) d(sigma sigma')/dxi, which vanishes for OU and CIR
        xi_mid = float(X_mid[0, 4])
        h_fd = 1e-5 * (1.0 + abs(xi_mid))
        ss = lambda u: noise.sigma(u) * noise.sigma_prime(u)
        dss = (ss(xi_mid + h_fd) - ss(xi_mid - h_fd)) / (2.0 * h_fd)
        A = jac_mid.copy()
        A[:, 4] -= 0.5 * dss * e
        # midpoint drift step: Z_{n+1} = Z_n - dt * Z_mid @ A - Z_mid @ dsig dW
        Z_half = Z - 0.5 * dt * (Z @ A) - 0.5 * (Z @ dsig) * dW
        Z = Z - dt * (Z_half @ A) - (Z_half @ dsig) * dW
        res = float(np.max(np.abs(Z @ engine.Y[0] - np.eye(5))))
        residual = max(residual, res)
    return residual


def degeneracy_scan(points, noise: Noise, t: float, n_paths: int = 100,
                    dt: float = 1e-3, seed: int = 0,
                    model: ConductanceModel | None = None) -> list[dict]:
    """Per point: determinant vs Monte Carlo medians of the covariance.

    Points are full states (v, n, m, h, xi); reports the gate determinant
    at the membrane block and medians over paths of lambda_min and det of
    the covariance at time t.
    """
    from .hoermander import delta_hh
    rows = []
    for idx, point in enumerate(points):
        point = np.asarray(point, dtype=float)
        samples = flow_endpoint_ensemble(
            FullState.from_array(point), noise, t, dt=dt,
            seed=seed + idx, n_paths=n_paths, model=model)
        lam = np.median([s.lambda_min for s in samples])
        det = np.median([s.det for s in samples])
        rows.append({
            "point": point,
            "delta": delta_hh(*point[:4]),
            "median_lambda_min": float(lam),
            "median_det": float(det),
            "flagged": int(sum(s.flagged for s in samples)),
        })
    return rows
