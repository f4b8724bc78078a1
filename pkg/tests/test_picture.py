import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlab.lattice import GridSpec, WaveFunction, inner_product
from nlab.picture import (apply_N, apply_N_star, free_oscillator_evolve, free_schrodinger_evolve,
                          parity, stationary_phase_check, t_of_tau, tau_of_t, tm)

from conftest import gaussian


def test_time_maps():
    assert tm(0.0) == 1.0
    assert tm(np.sqrt(3.0)) == pytest.approx(2.0)
    assert tau_of_t(1.0) == pytest.approx(np.pi / 4)
    assert t_of_tau(tau_of_t(3.7)) == pytest.approx(3.7)


def test_niederer_identity_at_zero():
    g = GridSpec(1, 10.0, 128)
    psi = gaussian(g, 0.2, 0.6, 1.0)
    assert np.array_equal(apply_N(0.0, psi).psi, psi.psi)


def test_niederer_unitary_and_inverse():
    g = GridSpec(1, 30.0, 1024)
    psi = gaussian(g, 0.3, 0.7, 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = apply_N(2.0, psi)
        back = apply_N_star(2.0, out)
    assert out.norm() == pytest.approx(1.0, abs=1e-10)
    assert (back - psi).norm() < 1e-9


def test_niederer_warns_on_expansion():
    g = GridSpec(1, 5.0, 128)
    with pytest.warns(RuntimeWarning):
        apply_N(10.0, gaussian(g, 0.0, 0.8))


@settings(max_examples=10, deadline=None)
@given(st.floats(-3.0, 3.0))
def test_intertwining_free_pictures(t):
    # U0(t, 0) = N(t) u0(arctan t, 0)
    g = GridSpec(1, 40.0, 1024)
    psi = gaussian(g, 0.2, 0.5, 0.5)
    lhs = free_schrodinger_evolve(psi, t, 0.0)
    rhs = apply_N(t, free_oscillator_evolve(psi, tau_of_t(t), 0.0))
    assert (lhs - rhs).norm() < 1e-8


def test_shear_matches_eigen_oracle():
    g = GridSpec(1, 10.0, 128)
    psi = gaussian(g, 0.5, 0.6, -0.5)
    a = free_oscillator_evolve(psi, 1.1, -0.3, method="shear")
    b = free_oscillator_evolve(psi, 1.1, -0.3, method="eigen")
    assert (a - b).norm() < 1e-10
    with pytest.raises(ValueError):
        free_oscillator_evolve(psi, 1.0, 0.0, method="bogus")


def test_hermite_eigenfunctions_phase():
    g = GridSpec(1, 10.0, 128)
    x = g.axis
    h1 = WaveFunction(g, x * np.exp(-x**2 / 2)).normalized()
    out = free_oscillator_evolve(h1, 0.7, 0.0)
    assert (out - h1 * np.exp(-1.5j * 0.7)).norm() < 1e-12


def test_parity_involution():
    g = GridSpec(2, 6.0, 32)
    psi = gaussian(g, [0.3, -0.2], 0.7, [0.4, 0.1])
    assert np.array_equal(parity(parity(psi)).psi, psi.psi)
    assert inner_product(parity(psi), parity(psi)).real == pytest.approx(1.0)


def test_stationary_phase_decreases():
    g = GridSpec(1, 20.0, 1024)
    ph = lambda Y: np.exp(-(Y[0] - 0.5) ** 2 / 2) * np.pi**-0.25
    r = [stationary_phase_check(ph, t, g).rel_discrepancy for t in (25.0, 50.0, 100.0)]
    assert r[0] > r[1] > r[2]
    with pytest.raises(ValueError):
        stationary_phase_check(ph, 0.0, g)
