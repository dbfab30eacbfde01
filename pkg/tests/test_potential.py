import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acmass.errors import NonTermination, QuadratureFailure
from acmass.potential import (
    check_assumptions,
    compute_sigma,
    from_coefficients,
    make_quartic,
    profile_slope,
    solve_profile,
)


def test_quartic_values(pot):
    assert pot.W(0.5) == pytest.approx(0.0625)
    assert pot.dW(0.5) == pytest.approx(0.0, abs=1e-15)
    assert pot.d2W(0.0) == pytest.approx(2.0)
    assert pot.d2W(1.0) == pytest.approx(2.0)
    u = np.linspace(-2, 3, 11)
    assert np.allclose(pot.dW(u), 2 * u * (u - 1) * (2 * u - 1))
    assert np.allclose(pot.d2W(u), 12 * u**2 - 12 * u + 2)


def test_quartic_wells_and_sign(pot):
    assert pot.W(0.0) == 0.0 and pot.W(1.0) == 0.0
    assert np.all(pot.W(np.linspace(-3, 4, 7001)) >= 0)


def test_sigma_quartic(pot):
    assert compute_sigma(pot) == pytest.approx(1.0 / 3.0, abs=1e-8)


def test_sigma_of_scaled_quartic(pot):
    assert compute_sigma(pot.scaled(4.0)) == pytest.approx(2.0 / 3.0, abs=1e-8)


@pytest.mark.parametrize("c", [2.0, 3.0])
def test_sigma_scaling(pot, c):
    assert compute_sigma(pot.scaled(c * c)) == pytest.approx(c * compute_sigma(pot), abs=1e-6)


def test_sigma_unreachable_tolerance(pot):
    with pytest.raises(QuadratureFailure):
        compute_sigma(pot, quad_tol=0.0)


@pytest.mark.parametrize("eps", [0.1, 0.05, 0.025])
def test_initial_slope(pot, eps):
    prof = solve_profile(pot, eps)
    slope = (prof.q[1] - prof.q[0]) / (prof.t[1] - prof.t[0])
    assert slope == pytest.approx(eps**-0.25, rel=0.01)


def test_eta_decreasing(pot):
    etas = [solve_profile(pot, eps).eta for eps in (0.1, 0.05, 0.025)]
    assert etas[0] > etas[1] > etas[2]


def test_profile_table_invariants(pot):
    prof = solve_profile(pot, 0.05)
    assert prof.q[0] == 0.0 and prof.q[-1] == 1.0
    assert np.all(np.diff(prof.q) > 0)
    assert prof.t[-1] == pytest.approx(prof.eta)
    assert prof(-1.0) == 0.0
    assert prof(prof.eta + 1.0) == 1.0


@pytest.mark.parametrize("eps", [0.1, 0.02])
def test_profile_residual(pot, eps):
    step_tol = 1e-6
    prof = solve_profile(pot, eps, step_tol=step_tol)
    t, q = prof.t, prof.q
    dq = (q[2:] - q[:-2]) / (t[2:] - t[:-2])
    res = np.abs(dq - profile_slope(pot, eps, q[1:-1]))
    assert res.max() <= 10 * step_tol


def test_layer_mass_thins(pot):
    masses = [solve_profile(pot, eps).layer_mass() for eps in (0.16, 0.08, 0.04, 0.02, 0.01)]
    assert all(b < a for a, b in zip(masses, masses[1:]))


def test_profile_guard_signals_bad_potential():
    # W < 0 away from the wells stalls the profile below 1
    bad = from_coefficients([0.0, 0.0, -1.0])
    with pytest.raises(NonTermination):
        solve_profile(bad, 0.05)


def test_assumptions_quartic(pot):
    rep = check_assumptions(pot)
    assert rep["A1"] and rep["A2"] and rep["A3"]
    assert (rep["R"], rep["alpha"]) == (2.0, 1.0)
    assert rep["p"] == 4


def test_assumptions_degenerate_wells():
    w = make_quartic().poly ** 2  # u^4 (u - 1)^4
    rep = check_assumptions(from_coefficients(w.coef))
    assert not rep["A1"]


def test_assumptions_zero_potential():
    rep = check_assumptions(from_coefficients([0.0]))
    assert not rep["A1"] and not rep["A2"]


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.25, 4.0))
def test_sigma_scales_with_square_root(pot, c):
    assert compute_sigma(pot.scaled(c)) == pytest.approx(math.sqrt(c) / 3.0, abs=1e-7)
