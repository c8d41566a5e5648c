"""Hypoellipticity diagnostics: determinants, Lie brackets, spanning form.

For the internal-variable systems handled here, a nonvanishing determinant
built from voltage derivatives of the drift components certifies the weak
Hormander condition.  Two routes are provided and cross-checked: the jet
computed determinants (exact to rounding) and a numeric Lie-bracket engine
with nested, Richardson-extrapolated central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conductance import ConductanceModel
from .jets import Jet4
from .model import gate_rate_jets, steady_state
from .system import CoupledSystem

# -- deterministic symmetric eigensolve --------------------------------------

def jacobi_eigenvalues(a: np.ndarray, tol: float = 1e-13, max_sweeps: int = 50) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps.

    Fixed sweep order, so the result is bit-stable across runs and
    platforms; plenty for the small Gram matrices handled here.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    scale = np.max(np.abs(a)) or 1.0
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[p, q] ** 2 for p in range(n) for q in range(p + 1, n)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= 1e-300:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / a[p, q]
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))


# -- determinant reports ------------------------------------------------------

@dataclass(frozen=True)
class DeterminantReport:
    point: tuple
    value: float
    matrix: np.ndarray
    condition_estimate: float


def _report(point, matrix) -> DeterminantReport:
    matrix = np.asarray(matrix, dtype=float)
    value = float(np.linalg.det(matrix))
    sv = np.linalg.svd(matrix, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    return DeterminantReport(tuple(point), value, matrix, cond)


def delta_matrix_hh(v: float, n: float, m: float, h: float) -> np.ndarray:
    """3x3 matrix of voltage derivatives (orders 2..4) of the gate drifts."""
    jets = gate_rate_jets(float(v))
    rows = []
    for gate, x in zip("nmh", (n, m, h)):
        a, b = jets[gate]
        rows.append([-a.derivative(k) * x + b.derivative(k) for k in (2, 3, 4)])
    return np.array(rows)


def determinant_delta_hh(v: float, n: float, m: float, h: float) -> DeterminantReport:
    """Reduced 3x3 determinant deciding the weak Hormander condition for HH."""
    return _report((v, n, m, h), delta_matrix_hh(v, n, m, h))


def delta_hh(v: float, n: float, m: float, h: float) -> float:
    return determinant_delta_hh(v, n, m, h).value


def delta_on_equilibrium_curve(v: float) -> float:
    n, m, h = steady_state(v)
    return delta_hh(v, n, m, h)


def determinant_D(model: ConductanceModel, x) -> DeterminantReport:
    """Full determinant of voltage-derivative columns of the internal drift.

    Column j (j = 1..m-1) holds the j-th voltage derivatives of
    (membrane drift, gate drifts); the value only depends on the first
    m-1 coordinates of x.  Jet order caps the channel count at 3.
    """
    x = np.asarray(x, dtype=float)
    size = model.k + 1
    if size > 4:
        raise ValueError("jet order 4 supports at most 3 gating variables")
    v, p = float(x[0]), x[1:1 + model.k]
    vjet = Jet4.variable(v)
    j1 = model.membrane_drift(vjet, p)
    rows = [[j1.derivative(k) for k in range(1, size + 1)]]
    for i in range(model.k):
        ji = model.gate_drift(i, vjet, p[i])
        rows.append([ji.derivative(k) for k in range(1, size + 1)])
    return _report(x, np.array(rows))


def conductance_gate_determinant(model: ConductanceModel, v: float, p) -> DeterminantReport:
    """k x k determinant of gate-drift derivatives, orders 2..k+1."""
    if model.k > 3:
        raise ValueError("jet order 4 supports at most 3 gating variables")
    vjet = Jet4.variable(float(v))
    rows = []
    for i in range(model.k):
        ji = model.gate_drift(i, vjet, p[i])
        rows.append([ji.derivative(k) for k in range(2, model.k + 2)])
    return _report((v, *p), np.array(rows))


def delta_scale(matrix: np.ndarray) -> float:
    """Product of row norms; |det| above 1e-6 of this counts as nonzero."""
    return float(np.prod(np.linalg.norm(matrix, axis=1)))


def delta_is_nonzero(report: DeterminantReport, rel: float = 1e-6) -> bool:
    return abs(report.value) > rel * delta_scale(report.matrix)


def scan_delta_zeros(v_lo: float = -15.0, v_hi: float = 30.0,
                     step: float = 0.01, tol: float = 1e-8):
    """Zeros of Delta along the equilibrium curve by scan plus bisection."""
    vs = np.arange(v_lo, v_hi + 0.5 * step, step)
    vals = np.array([delta_on_equilibrium_curve(float(v)) for v in vs])
    zeros = []
    for i in range(len(vs) - 1):
        if vals[i] == 0.0:
            zeros.append(float(vs[i]))
            continue
        if vals[i] * vals[i + 1] < 0.0:
            lo, hi = float(vs[i]), float(vs[i + 1])
            flo = vals[i]
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                fmid = delta_on_equilibrium_curve(mid)
                if flo * fmid <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fmid
            zeros.append(0.5 * (lo + hi))
    return zeros, vs, vals


# -- numeric Lie brackets -----------------------------------------------------

class VectorField:
    """Time-space vector field: spatial part fn(t, x), constant time part."""

    def __init__(self, fn, time_component: float = 0.0, label: str = ""):
        self.fn = fn
        self.time_component = time_component
        self.label = label

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.fn(t, x)


REL_STEP = 0.04


def _richardson6(central, s):
    """Order-6 extrapolation from central differences at s, s/2, s/4.

    Nested brackets divide inherited evaluation error by the step at each
    level, so a handful of accurate digits per level has to come from a
    wide stencil rather than a tiny step.
    """
    d1 = central(s)
    d2 = central(0.5 * s)
    d4 = central(0.25 * s)
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d4 - d2) / 3.0
    return (16.0 * r2 - r1) / 15.0


def _directional(fn, t, x, w, coord_scale):
    """Derivative of fn along the (unnormalised) direction w at (t, x)."""
    rel = float(np.max(np.abs(w) / coord_scale))
    if rel == 0.0:
        return np.zeros_like(x)
    s = REL_STEP / rel

    def central(step):
        return (fn(t, x + step * w) - fn(t, x - step * w)) / (2.0 * step)

    return _richardson6(central, s)


def _time_derivative(fn, t, x, t_scale):
    def central(step):
        return (fn(t + step, x) - fn(t - step, x)) / (2.0 * step)

    return _richardson6(central, REL_STEP * t_scale)


def lie_bracket(T: VectorField, V: VectorField, coord_scale=None,
                t_scale: float = 1.0) -> VectorField:
    """Numeric Lie bracket [T, V] including the time direction.

    [T, V]_i = sum_j (T_j dV_i/dx_j - V_j dT_i/dx_j)
             + T_0 dV_i/dt - V_0 dT_i/dt,
    with constant time components T_0, V_0 in {0, 1}.  coord_scale fixes
    the per-coordinate magnitudes used to size difference steps; freezing
    it at the evaluation point keeps nested stencils smooth.
    """

    def fn(t, x):
        scale = coord_scale if coord_scale is not None else 1.0 + np.abs(x)
        tv = T(t, x)
        vv = V(t, x)
        out = _directional(V.fn, t, x, tv, scale) - _directional(T.fn, t, x, vv, scale)
        if T.time_component:
            out = out + T.time_component * _time_derivative(V.fn, t, x, t_scale)
        if V.time_component:
            out = out - V.time_component * _time_derivative(T.fn, t, x, t_scale)
        return out

    return VectorField(fn, 0.0, label=f"[{T.label},{V.label}]")


def drift_field(system: CoupledSystem) -> VectorField:
    """A_0: time-space drift with the Stratonovich-corrected coefficients."""
    return VectorField(lambda t, x: system.strat_drift(t, x), 1.0, "A0")


def diffusion_field(system: CoupledSystem) -> VectorField:
    return VectorField(lambda t, x: system.sigma_vec(x), 0.0, "A1")


@dataclass(frozen=True)
class BracketSet:
    point: tuple
    fields: tuple          # labels
    vectors: np.ndarray    # one spatial vector per row
    gram: np.ndarray
    lambda_min: float


def _gram_report(t, x, labelled_vectors) -> BracketSet:
    vectors = np.array([v for _, v in labelled_vectors])
    gram = vectors.T @ vectors
    gram = 0.5 * (gram + gram.T)
    lam = jacobi_eigenvalues(gram)
    return BracketSet(
        point=(t, *np.asarray(x, dtype=float)),
        fields=tuple(lbl for lbl, _ in labelled_vectors),
        vectors=vectors,
        gram=gram,
        lambda_min=float(lam[0]),
    )


def numeric_brackets(system: CoupledSystem, t: float, x, order: int = 4,
                     box: tuple | None = None) -> BracketSet:
    """The chain A_1, L_1 = [A_1, A_0], L_{k+1} = [A_1, L_k] up to L_order."""
    if order > 6:
        raise ValueError("bracket order capped at 6")
    x = np.asarray(x, dtype=float)
    if box is not None:
        lo, hi = box
        margin = 1e-3 * (1.0 + float(np.max(np.abs(x))))
        if np.any(x - margin * 4 < lo) or np.any(x + margin * 4 > hi):
            raise ValueError("bracket stencil exits working box")
    scale = 1.0 + np.abs(x)
    t_scale = 1.0 + abs(t)
    a0 = drift_field(system)
    a1 = diffusion_field(system)
    fields = [("A1", a1(t, x))]
    current = a0
    for k in range(1, order + 1):
        current = lie_bracket(a1, current, coord_scale=scale, t_scale=t_scale)
        fields.append((f"L{k}", current(t, x)))
    return _gram_report(t, x, fields)


def _multi_indices(max_norm: int):
    """Multi-indices over {0, 1} with norm |alpha| + #zeros <= max_norm.

    Skips every alpha starting with 1: the innermost bracket [A_1, A_1]
    vanishes identically and so does everything built on it.
    """
    out = [()]
    frontier = [((0,), 2)]
    while frontier:
        alpha, norm = frontier.pop(0)
        if norm > max_norm:
            continue
        out.append(alpha)
        for j in (0, 1):
            frontier.append((alpha + (j,), norm + (2 if j == 0 else 1)))
    return out


def spanning_form(system: CoupledSystem, t: float, x, L: int = 5) -> tuple[float, BracketSet]:
    """Smallest-eigenvalue quadratic form over brackets of norm <= L-1.

    Returns min(lambda_min(Gram), 1) together with the bracket family;
    the infimum over unit directions of the quadratic form is exactly the
    smallest eigenvalue of the Gram matrix.
    """
    x = np.asarray(x, dtype=float)
    scale = 1.0 + np.abs(x)
    t_scale = 1.0 + abs(t)
    a0 = drift_field(system)
    a1 = diffusion_field(system)
    cache: dict[tuple, VectorField] = {(): a1}

    def field_for(alpha: tuple) -> VectorField:
        if alpha not in cache:
            inner = field_for(alpha[:-1])
            outer = a0 if alpha[-1] == 0 else a1
            cache[alpha] = lie_bracket(outer, inner, coord_scale=scale,
                                       t_scale=t_scale)
        return cache[alpha]

    labelled = []
    for alpha in _multi_indices(L - 1):
        fld = field_for(alpha)
        labelled.append((f"alpha={alpha}", fld(t, x)))
    report = _gram_report(t, x, labelled)
    return min(report.lambda_min, 1.0), report
