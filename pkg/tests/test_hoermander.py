"""Determinants and the numeric bracket engine against independent oracles."""

import math

import numpy as np
import pytest
import sympy as sp

from hhsde.hoermander import (
    VectorField,
    delta_hh,
    delta_is_nonzero,
    delta_matrix_hh,
    delta_on_equilibrium_curve,
    delta_scale,
    determinant_D,
    determinant_delta_hh,
    diffusion_field,
    drift_field,
    jacobi_eigenvalues,
    lie_bracket,
    numeric_brackets,
    scan_delta_zeros,
    spanning_form,
)
from hhsde.conductance import build_hh_as_conductance_model
from hhsde.model import conductance_sum, gate_rate_jets, steady_state
from hhsde.noise import GenericNoise, OUNoise
from hhsde.system import hh_system


# -- symbolic oracle for the determinant --------------------------------------

@pytest.fixture(scope="module")
def symbolic_rate_derivatives():
    v = sp.symbols("v")
    alpha = {
        "n": (sp.Rational(1, 10) - v / 100) / (sp.exp(1 - v / 10) - 1),
        "m": (sp.Rational(5, 2) - v / 10) / (sp.exp(sp.Rational(5, 2) - v / 10) - 1),
        "h": sp.Rational(7, 100) * sp.exp(-v / 20),
    }
    beta = {
        "n": sp.Rational(1, 8) * sp.exp(-v / 80),
        "m": 4 * sp.exp(-v / 18),
        "h": 1 / (sp.exp(3 - v / 10) + 1),
    }
    table = {}
    for g in "nmh":
        a = alpha[g] + beta[g]
        table[g] = {
            "a0": sp.lambdify(v, a, "numpy"),
            "b0": sp.lambdify(v, alpha[g], "numpy"),
            "ak": [sp.lambdify(v, sp.diff(a, v, k), "numpy") for k in (2, 3, 4)],
            "bk": [sp.lambdify(v, sp.diff(alpha[g], v, k), "numpy") for k in (2, 3, 4)],
        }
    return table


def symbolic_delta(table, v, n, m, h):
    rows = []
    for g, x in zip("nmh", (n, m, h)):
        f = table[g]
        rows.append([-f["ak"][j](v) * x + f["bk"][j](v) for j in range(3)])
    return float(np.linalg.det(np.array(rows)))


def test_delta_matches_symbolic_derivatives(symbolic_rate_derivatives):
    rng = np.random.default_rng(17)
    checked = 0
    while checked < 40:
        v = float(rng.uniform(-15, 30))
        if min(abs(v - 10.0), abs(v - 25.0)) < 0.5:
            continue
        n, m, h = (float(g) for g in rng.uniform(0, 1, size=3))
        mine = delta_hh(v, n, m, h)
        oracle = symbolic_delta(symbolic_rate_derivatives, v, n, m, h)
        assert mine == pytest.approx(oracle, rel=1e-9)
        checked += 1


def test_delta_affine_in_each_gate():
    v, m, h = 3.0, 0.2, 0.7
    for lam in (0.25, 0.5, 0.75):
        lo = delta_hh(v, 0.0, m, h)
        hi = delta_hh(v, 1.0, m, h)
        mid = delta_hh(v, lam, m, h)
        interp = (1 - lam) * lo + lam * hi
        scale = max(abs(lo), abs(hi), 1e-300)
        assert abs(mid - interp) < 1e-10 * scale


def test_delta_negative_at_rest():
    n, m, h = steady_state(0.0)
    assert delta_hh(0.0, n, m, h) < 0.0


def test_delta_negative_on_input_window():
    # the whole voltage window (-10, 10) backing the admissible constant
    # inputs carries a strictly negative determinant
    for v in np.linspace(-10, 10, 81):
        assert delta_on_equilibrium_curve(float(v)) < 0.0


def test_delta_zero_structure_on_scan_range():
    # Verified against 40-digit exact arithmetic: the determinant of the
    # printed rates changes sign exactly once on (-15, 30), at 11.04858.
    # (The two sign changes reported alongside the original numerical
    # study are not reproducible from these rate functions; see the
    # acceptance suite and the decisions ledger.)
    zeros, _, vals = scan_delta_zeros(-15.0, 30.0, 0.01)
    assert len(zeros) == 1
    assert zeros[0] == pytest.approx(11.048583273887, abs=1e-6)


def test_determinant_report_consistency():
    n, m, h = steady_state(2.0)
    rep = determinant_delta_hh(2.0, n, m, h)
    assert rep.value == pytest.approx(float(np.linalg.det(rep.matrix)), rel=1e-10)
    assert rep.condition_estimate >= 1.0


def test_full_determinant_factorizes_through_voltage_slope():
    # D = dF/dv * Delta for the current-balance model: identical zero sets,
    # opposite signs (the voltage slope is negative on the gate cube).
    model = build_hh_as_conductance_model()
    rng = np.random.default_rng(23)
    for _ in range(100):
        v = float(rng.uniform(-15, 30))
        n, m, h = (float(g) for g in rng.uniform(0.05, 0.95, size=3))
        x = np.array([v, n, m, h, rng.uniform(-5, 5)])
        D = determinant_D(model, x)
        delta = delta_hh(v, n, m, h)
        slope = -conductance_sum(n, m, h)
        assert D.value == pytest.approx(slope * delta, rel=1e-9, abs=1e-300)
        if abs(delta) > 1e-8 * delta_scale(delta_matrix_hh(v, n, m, h)):
            assert np.sign(D.value) == -np.sign(delta)


def test_full_determinant_ignores_last_coordinate():
    model = build_hh_as_conductance_model()
    x1 = np.array([1.0, 0.3, 0.1, 0.6, -2.0])
    x2 = np.array([1.0, 0.3, 0.1, 0.6, 7.5])
    assert determinant_D(model, x1).value == determinant_D(model, x2).value


# -- numeric bracket engine ----------------------------------------------------

class ToySystem:
    """3-d internal-variable system with quadratic gate input and OU tail.

    F = c1 x1 + c2 x2 (linear), a(x1) = a0 + a1 x1, b(x1) = p + q x1 + r x1^2,
    input drift kappa (mu + s t - x3), constant diffusion c_sigma.
    """

    c1, c2 = 0.7, -1.3
    a0, a1 = 2.0, 0.15
    p, q, r = 0.3, 0.08, 0.45
    kappa, mu, slope = 1.7, 0.4, 0.6
    c_sigma = 0.9

    def drift(self, t, x):
        bm = self.kappa * (self.mu + self.slope * t - x[2])
        return np.array([
            self.c1 * x[0] + self.c2 * x[1] + bm,
            -(self.a0 + self.a1 * x[0]) * x[1] + self.p + self.q * x[0] + self.r * x[0] ** 2,
            bm,
        ])

    strat_drift = drift  # constant diffusion: no correction

    def sigma_vec(self, x):
        return self.c_sigma * np.array([1.0, 0.0, 1.0])


@pytest.fixture(scope="module")
def toy_symbolic():
    t, x1, x2, x3 = sp.symbols("t x1 x2 x3")
    coords = (t, x1, x2, x3)
    c = ToySystem
    bm = c.kappa * (c.mu + c.slope * t - x3)
    a0_field = sp.Matrix([
        1,
        c.c1 * x1 + c.c2 * x2 + bm,
        -(c.a0 + c.a1 * x1) * x2 + c.p + c.q * x1 + c.r * x1 ** 2,
        bm,
    ])
    a1_field = sp.Matrix([0, c.c_sigma, 0, c.c_sigma])

    def bracket(T, V):
        out = sp.zeros(4, 1)
        for i in range(4):
            expr = 0
            for j in range(4):
                expr += T[j] * sp.diff(V[i], coords[j]) - V[j] * sp.diff(T[i], coords[j])
            out[i] = sp.simplify(expr)
        return out

    fields = {"A0": a0_field, "A1": a1_field}
    fields["L1"] = bracket(a1_field, a0_field)
    fields["L2"] = bracket(a1_field, fields["L1"])
    fields["L3"] = bracket(a1_field, fields["L2"])
    fields["(0,)"] = bracket(a0_field, a1_field)
    fields["(0,0)"] = bracket(a0_field, fields["(0,)"])
    fields["(0,1)"] = bracket(a1_field, fields["(0,)"])
    lam = {}
    for name, f in fields.items():
        lam[name] = sp.lambdify((t, x1, x2, x3), list(f[1:]), "numpy")
    return lam


def _toy_fields():
    toy = ToySystem()
    return drift_field(toy), diffusion_field(toy)


def test_toy_bracket_chain_matches_symbolic(toy_symbolic):
    a0, a1 = _toy_fields()
    pts = [(0.3, np.array([0.5, 0.25, -0.1])), (1.2, np.array([-0.4, 0.7, 0.9]))]
    scale = np.array([1.5, 1.5, 1.5])
    l1 = lie_bracket(a1, a0, coord_scale=scale)
    l2 = lie_bracket(a1, l1, coord_scale=scale)
    l3 = lie_bracket(a1, l2, coord_scale=scale)
    for t, x in pts:
        for fld, name in ((l1, "L1"), (l2, "L2"), (l3, "L3")):
            got = fld(t, x)
            want = np.array(toy_symbolic[name](t, *x), dtype=float)
            assert np.max(np.abs(got - want)) < 1e-8, name


def test_toy_second_bracket_closed_form():
    # with constant sigma, linear F and affine a the only surviving part of
    # the second bracket is the quadratic coefficient of b: (0, 2 r c^2, 0)
    a0, a1 = _toy_fields()
    l2 = lie_bracket(a1, lie_bracket(a1, a0))
    got = l2(0.7, np.array([0.2, 0.6, -0.3]))
    want = np.array([0.0, 2 * ToySystem.r * ToySystem.c_sigma ** 2, 0.0])
    assert np.max(np.abs(got - want)) < 1e-6


def test_toy_time_dependent_brackets_match_symbolic(toy_symbolic):
    a0, a1 = _toy_fields()
    b0 = lie_bracket(a0, a1)
    b00 = lie_bracket(a0, b0)
    b01 = lie_bracket(a1, b0)
    t, x = 0.8, np.array([0.1, 0.4, 0.2])
    for fld, name in ((b0, "(0,)"), (b00, "(0,0)"), (b01, "(0,1)")):
        got = fld(t, x)
        want = np.array(toy_symbolic[name](t, *x), dtype=float)
        assert np.max(np.abs(got - want)) < 1e-7, name


def test_bracket_of_field_with_itself_vanishes():
    _, a1 = _toy_fields()
    out = lie_bracket(a1, a1)(0.5, np.array([0.3, 0.3, 0.3]))
    assert np.max(np.abs(out)) < 1e-10


def _ou_closed_form(sigma, v, gates, order):
    """Exact chain for constant-sigma noise: L_k = sigma^k (d1 + dm)^k A0."""
    jets = gate_rate_jets(v)
    dvF = -conductance_sum(*gates)
    if order == 1:
        gate = [sigma * (-(jets[g][0].derivative(1)) * x + jets[g][1].derivative(1))
                for g, x in zip("nmh", gates)]
        return np.array([sigma * (dvF - 1.0), *gate, -sigma])
    gate = [sigma ** order * (-(jets[g][0].derivative(order)) * x + jets[g][1].derivative(order))
            for g, x in zip("nmh", gates)]
    return np.array([0.0, *gate, 0.0])


def test_hh_bracket_chain_matches_constant_sigma_closed_form():
    system = hh_system(OUNoise(tau=1.0, gamma=0.5, signal=0.0))
    gates = steady_state(0.0)
    x = np.array([0.0, *gates, 0.3])
    bs = numeric_brackets(system, 0.5, x, order=4)
    for i, name in enumerate(bs.fields):
        if name == "A1":
            continue
        k = int(name[1:])
        want = _ou_closed_form(0.5, 0.0, gates, k)
        tol = 1e-9 if k < 4 else 2e-9
        assert np.max(np.abs(bs.vectors[i] - want)) < tol, name


def test_rank_ordering_healthy_vs_engineered_degenerate():
    # pairwise: each sampled state against the state with one gate moved
    # onto the collinearity locus (the determinant is affine in h)
    system = hh_system(OUNoise(tau=1.0, gamma=2.0, signal=0.0))
    rng = np.random.default_rng(2026)
    pairs = 0
    while pairs < 10:
        v = float(rng.uniform(-10, 10))
        n, m, h = (float(g) for g in rng.uniform(0.1, 0.9, size=3))
        rep = determinant_delta_hh(v, n, m, h)
        if not delta_is_nonzero(rep):
            continue
        at0 = delta_hh(v, n, m, 0.0)
        at1 = delta_hh(v, n, m, 1.0)
        h_star = -at0 / (at1 - at0)
        if not 0.0 <= h_star <= 1.0:
            continue
        xi = float(rng.uniform(-1, 1))
        lam = numeric_brackets(system, 0.2, np.array([v, n, m, h, xi]), order=4).lambda_min
        lam_deg = numeric_brackets(system, 0.2, np.array([v, n, m, h_star, xi]),
                                   order=4).lambda_min
        assert lam > 0.0
        assert lam > 1e3 * lam_deg, (v, n, m, h, h_star)
        pairs += 1


def test_spanning_form_zero_when_diffusion_vanishes():
    flat = GenericNoise(drift=lambda t, xi: -xi, sigma=lambda xi: xi ** 2,
                        sigma_prime=lambda xi: 2.0 * xi)
    system = hh_system(flat)
    x = np.array([0.0, *steady_state(0.0), 0.0])  # sigma(0) = 0
    for L in (2, 3, 5):
        value, _ = spanning_form(system, 0.1, x, L=L)
        assert abs(value) < 1e-12


def test_spanning_form_nondecreasing_in_L():
    system = hh_system(OUNoise(tau=1.0, gamma=1.0, signal=0.0))
    x = np.array([0.0, *steady_state(0.0), 0.2])
    values = [spanning_form(system, 0.5, x, L=L)[0] for L in (2, 3, 4, 5, 6)]
    for lo, hi in zip(values, values[1:]):
        assert hi >= lo - 1e-15


def test_spanning_form_positive_where_determinant_nonzero():
    system = hh_system(OUNoise(tau=1.0, gamma=2.0, signal=0.0))
    gates = steady_state(0.0)
    assert delta_is_nonzero(determinant_delta_hh(0.0, *gates))
    x = np.array([0.0, *gates, 0.1])
    v5, _ = spanning_form(system, 0.5, x, L=5)
    v6, _ = spanning_form(system, 0.5, x, L=6)
    assert v5 > 0.0
    assert v6 >= v5


def test_gram_psd_invariant():
    system = hh_system(OUNoise(tau=1.0, gamma=1.0, signal=0.0))
    x = np.array([2.0, *steady_state(2.0), 0.0])
    bs = numeric_brackets(system, 0.3, x, order=4)
    assert np.allclose(bs.gram, bs.gram.T)
    assert bs.lambda_min >= -1e-10


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(8)
    for n in (2, 4, 6):
        for _ in range(10):
            a = rng.normal(size=(n, n))
            a = a + a.T
            mine = jacobi_eigenvalues(a)
            ref = np.linalg.eigvalsh(a)
            assert np.max(np.abs(mine - ref)) < 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_bracket_box_guard():
    system = hh_system(OUNoise(tau=1.0, gamma=1.0, signal=0.0))
    x = np.array([0.0, *steady_state(0.0), 0.0])
    with pytest.raises(ValueError, match="working box"):
        numeric_brackets(system, 0.1, x, order=2,
                         box=(np.full(5, -1e-9), np.full(5, 1e-9)))
