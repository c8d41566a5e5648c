"""Deterministic integration, equilibria and the c=15 orbit anchors."""

import math

import numpy as np
import pytest

from hhsde.errors import NoSpikingError
from hhsde.model import HHState, equilibrium_curve_point, equilibrium_input, hh_vector_field
from hhsde.ode import (
    Trajectory,
    delta_along_orbit,
    detect_stable_orbit,
    equilibrium_for_input,
    integrate_hh,
)
from hhsde.signals import Sinusoid

REST = equilibrium_curve_point(0.0)


@pytest.fixture(scope="module")
def orbit15():
    return detect_stable_orbit(15.0, REST, max_time=600.0)


def test_equilibrium_stays_put():
    c = 5.0
    x0 = equilibrium_for_input(c)
    traj = integrate_hh(x0, c, 100.0, 0.01)
    drift = np.max(np.abs(traj.states - traj.states[0]), axis=0)
    assert np.max(drift) < 1e-8


def test_equilibrium_drift_budget_long_run():
    c = 1.0
    x0 = equilibrium_for_input(c)
    traj = integrate_hh(x0, c, 200.0, 0.01)
    assert np.max(np.abs(traj.states - traj.states[0])) < 1e-6


def test_equilibrium_solves_vector_field():
    for c in (1.0, 5.0, 10.0):
        state = equilibrium_for_input(c)
        assert max(abs(d) for d in hh_vector_field(state, c)) < 1e-9


def test_equilibrium_input_window_anchors():
    assert abs(equilibrium_input(-10.0)) == pytest.approx(6.15, abs=0.02)
    assert abs(equilibrium_input(10.0)) == pytest.approx(26.61, abs=0.02)


def test_equilibrium_outside_window_rejected():
    with pytest.raises(ValueError, match="monotone window"):
        equilibrium_for_input(-20.0)


def test_gates_stay_in_unit_interval():
    traj = integrate_hh(REST, 15.0, 200.0, 0.01)
    assert np.all(traj.states[:, 1:] >= 0.0)
    assert np.all(traj.states[:, 1:] <= 1.0)
    assert traj.max_clamp_excess <= 1e-12


def test_rk4_convergence_order():
    ends = []
    for dt in (0.02, 0.01, 0.005):
        traj = integrate_hh(REST, 15.0, 50.0, dt)
        ends.append(traj.states[-1])
    e1 = np.max(np.abs(ends[0] - ends[1]))
    e2 = np.max(np.abs(ends[1] - ends[2]))
    order = math.log2(e1 / e2)
    assert 3.5 <= order <= 4.5


def test_orbit_period_matches_constant_input_anchor(orbit15):
    assert orbit15.converged
    assert orbit15.period == pytest.approx(12.56, abs=0.15)
    assert abs(orbit15.section_state.v) < 1e-9


def test_orbit_closure(orbit15):
    cycle = orbit15.crossing_times[-1] - orbit15.crossing_times[-2]
    start = HHState(*orbit15.samples[0])
    # step chosen so the grid lands exactly on one full cycle
    dt = cycle / round(cycle / 0.01)
    traj = integrate_hh(start, orbit15.input, orbit15.sample_times[0] + cycle,
                        dt, t0=orbit15.sample_times[0])
    assert np.max(np.abs(traj.states[-1] - orbit15.samples[0])) < 1e-4


def test_no_spiking_below_rheobase():
    with pytest.raises(NoSpikingError):
        detect_stable_orbit(0.0, equilibrium_for_input(0.0), max_time=500.0)


def test_sinusoid_locks_to_input_period():
    orbit = detect_stable_orbit(Sinusoid(10.0, 12.5), REST, max_time=700.0)
    assert orbit.converged
    ratio = orbit.period / 12.5
    assert abs(ratio - round(ratio)) < 0.01
    assert round(ratio) >= 1


def test_delta_window_on_orbit(orbit15):
    rep = delta_along_orbit(orbit15)
    assert 0.25 <= rep.window_fraction <= 0.45
    assert rep.v_at_window_start == pytest.approx(-2.0, abs=1.0)
    # v rising at the window start (the slow crawl toward threshold)
    nxt = (rep.window_start + 1) % rep.rows.shape[0]
    assert rep.rows[nxt, 1] > rep.rows[rep.window_start, 1]
    assert rep.min_abs_delta_after_peak <= 0.1 * rep.max_abs_delta


def test_delta_scan_requires_converged_orbit():
    orbit = detect_stable_orbit(15.0, REST, max_time=330.0)
    if orbit.converged:
        pytest.skip("short run unexpectedly settled")
    with pytest.raises(ValueError, match="converge"):
        delta_along_orbit(orbit)


def test_divergence_reported():
    from hhsde.errors import DivergenceError
    with pytest.raises(DivergenceError, match="divergence at"):
        integrate_hh(HHState(0.0, 0.5, 0.5, 0.5), 1e9, 10.0, 0.01)
