"""Rate values, steady states and the membrane drift anchors."""

import math

import numpy as np
import pytest

from hhsde.model import (
    DEFAULT_PARAMS,
    F,
    HHParams,
    HHState,
    conductance_sum,
    equilibrium_curve_point,
    equilibrium_input,
    gate_drift,
    gate_rate_arrays,
    hh_vector_field,
    rate,
    steady_state,
)


def test_beta_n_at_zero():
    assert rate("beta_n", 0.0).c0 == pytest.approx(0.125, abs=1e-15)


def test_alpha_n_at_zero():
    # direct evaluation of 0.1/(e - 1)
    assert rate("alpha_n", 0.0).c0 == pytest.approx(0.1 / (math.e - 1.0), rel=1e-14)


def test_alpha_n_limit_at_ten():
    # removable singularity: 0.1 * x/(e^x - 1) -> 0.1 as x -> 0
    assert rate("alpha_n", 10.0).c0 == pytest.approx(0.1, rel=1e-12)


def test_alpha_m_limit_at_twentyfive():
    # x/(e^x - 1) -> 1 as the argument 2.5 - 0.1 v vanishes
    assert rate("alpha_m", 25.0).c0 == pytest.approx(1.0, rel=1e-12)


def test_steady_state_at_zero():
    n, m, h = steady_state(0.0)
    # frozen from direct evaluation of the printed rate formulas
    assert n == pytest.approx(0.3176769140606974, rel=1e-12)
    assert m == pytest.approx(0.05293248525724958, rel=1e-12)
    assert h == pytest.approx(0.5961207535084603, rel=1e-12)


def test_steady_state_solves_balance_exactly():
    rng = np.random.default_rng(3)
    for v in rng.uniform(-20, 110, size=100):
        v = float(v)
        for gate, x in zip("nmh", steady_state(v)):
            a = rate(f"alpha_{gate}", v).c0 + rate(f"beta_{gate}", v).c0
            b = rate(f"alpha_{gate}", v).c0
            assert abs(a * x - b) <= 1e-14 * max(abs(b), 1.0)
            assert 0.0 < x < 1.0
            assert abs(gate_drift(gate, v, x)) < 1e-15


def test_m_inf_increasing_near_zero():
    h = 1e-4
    _, m_hi, _ = steady_state(h)
    _, m_lo, _ = steady_state(-h)
    assert (m_hi - m_lo) / (2 * h) > 0.0


def test_rest_point_input_anchor():
    # the constant input balancing the steady state at v = 0
    assert equilibrium_input(0.0) == pytest.approx(-0.0534, abs=1e-3)


def test_drift_vanishes_at_leak_reversal_with_closed_channels():
    assert F(HHState(DEFAULT_PARAMS.e_l, 0.0, 0.0, 0.0)) == pytest.approx(0.0, abs=1e-14)


def test_drift_affine_in_v():
    rng = np.random.default_rng(5)
    for _ in range(20):
        v = float(rng.uniform(-20, 110))
        n, m, h = rng.uniform(0, 1, size=3)
        slope = F(HHState(v + 1, n, m, h)) - F(HHState(v, n, m, h))
        assert slope == pytest.approx(-conductance_sum(n, m, h), rel=1e-10)
        assert slope < 0.0


def test_vector_field_zero_at_equilibrium_curve():
    for v in (-5.0, 0.0, 3.0):
        state = equilibrium_curve_point(v)
        c = equilibrium_input(v)
        for comp in hh_vector_field(state, c):
            assert abs(comp) < 1e-12


def test_gate_drift_has_no_cross_terms():
    # dn/dt depends only on (v, n)
    d1 = gate_drift("n", 0.0, 0.5)
    assert d1 == pytest.approx(0.5 * (rate("alpha_n", 0.0).c0 - rate("beta_n", 0.0).c0))


def test_array_rates_match_scalar():
    rng = np.random.default_rng(9)
    v = rng.uniform(-20, 110, size=200)
    arrays = gate_rate_arrays(v)
    for i, vi in enumerate(v):
        ninf, minf, hinf = steady_state(float(vi))
        for gate, xinf in zip("nmh", (ninf, minf, hinf)):
            a_arr, inf_arr = arrays[gate]
            a_scalar = rate(f"alpha_{gate}", float(vi)).c0 + rate(f"beta_{gate}", float(vi)).c0
            assert a_arr[i] == pytest.approx(a_scalar, rel=1e-13)
            assert inf_arr[i] == pytest.approx(xinf, rel=1e-13)


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        HHParams(g_k=-1.0)
