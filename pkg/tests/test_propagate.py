import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from nlab.errors import AccuracyError, EscapeError, StabilityError
from nlab.fields import CoulombField, GaussianSourceField
from nlab.gauge import FunctionalOscPotentials, FunctionalSchrPotentials, SchrFromOsc, build_a_gauge
from nlab.lattice import GridSpec, WaveFunction, inner_product
from nlab.picture import free_oscillator_evolve
from nlab.propagate import (PropagatorConfig, apply_h, cross_picture_check, evolve_osc, evolve_schr,
                            expmv_lanczos, step_nodes)

from conftest import gaussian


def test_config_validation():
    with pytest.raises(ValueError):
        PropagatorConfig(stepper="rk4")
    with pytest.raises(ValueError):
        PropagatorConfig(dtau=0.0)
    assert PropagatorConfig(dtau=0.02).refined().dtau == 0.01


@settings(max_examples=20, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.sampled_from(["uniform", "cos"]))
def test_step_nodes_cover_interval(a, b, law):
    cfg = PropagatorConfig(dtau=0.1, step_law=law, breakpoints=(0.25,))
    n = step_nodes(a, b, cfg)
    assert n[0] == a and n[-1] == b
    if a != b:
        assert np.all(np.sign(np.diff(n)) == np.sign(b - a))
        if min(a, b) < 0.25 < max(a, b):
            assert np.any(np.isclose(n, 0.25, atol=0, rtol=0))


def test_lanczos_against_expm():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(40, 40)) + 1j * rng.normal(size=(40, 40))
    H = (M + M.conj().T) / 2
    v = rng.normal(size=40) + 0j
    out = expmv_lanczos(lambda x: H @ x, v, 0.3, m_max=40)
    assert np.allclose(out, sla.expm(-0.3j * H) @ v, atol=1e-10)
    with pytest.raises(AccuracyError):
        expmv_lanczos(lambda x: H @ x, v, 50.0, m_max=4, max_depth=1)


def test_apply_h_hermitian():
    g = GridSpec(1, 10.0, 128)
    ag = build_a_gauge(CoulombField(1.0, 0.5, 1))
    a, b = gaussian(g, 0.3, 0.7, 1.0), gaussian(g, -0.5, 0.6)
    lhs = inner_product(a, apply_h(ag, 0.4, b))
    rhs = np.conj(inner_product(b, apply_h(ag, 0.4, a)))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_free_evolution_exact():
    g = GridSpec(1, 20.0, 256)
    psi = gaussian(g, 0.5, 0.7, 1.0)
    z = FunctionalOscPotentials.zero(1)
    out = evolve_osc(z, psi, 1.2, -0.3)
    assert (out - free_oscillator_evolve(psi, 1.2, -0.3)).norm() < 1e-12


def test_position_potential_only():
    # v = x, a = 0: a linear potential, compare split and krylov steppers
    g = GridSpec(1, 20.0, 256)
    psi = gaussian(g, 0.0, 0.7)
    pot = FunctionalOscPotentials(1, v=lambda tau, X: 0.2 * X[0])
    a = evolve_osc(pot, psi, 0.8, 0.0, PropagatorConfig(dtau=0.005, step_law="uniform"))
    b = evolve_osc(pot, psi, 0.8, 0.0, PropagatorConfig(dtau=0.005, step_law="uniform", stepper="krylov"))
    assert (a - b).norm() < 1e-4
    assert a.norm() == pytest.approx(1.0, abs=1e-12)


def test_time_reversal():
    g = GridSpec(1, 20.0, 256)
    psi = gaussian(g, 0.2, 0.6, 0.5)
    ag = build_a_gauge(GaussianSourceField(1.0, 1.0, 1))
    cfg = PropagatorConfig(dtau=0.05)
    fwd = evolve_osc(ag, psi, 1.0, 0.0, cfg)
    back = evolve_osc(ag, fwd, 0.0, 1.0, cfg)
    assert (back - psi).norm() < 1e-6


def test_interval_guard():
    g = GridSpec(1, 10.0, 64)
    with pytest.raises(ValueError):
        evolve_osc(FunctionalOscPotentials.zero(1), gaussian(g, 0.0, 0.7), np.pi / 2, 0.0)


def test_escape_detected():
    g = GridSpec(1, 8.0, 128)
    with pytest.raises(EscapeError):
        evolve_schr(FunctionalSchrPotentials(1, V=lambda t, X: 0 * X[0]), gaussian(g, 0.0, 0.5, 3.0),
                    5.0, 0.0)


def test_stability_guard():
    g = GridSpec(1, 10.0, 64)
    pot = FunctionalOscPotentials(1, v=lambda tau, X: 1e3 * X[0] ** 2)
    cfg = PropagatorConfig(dtau=0.1, step_law="uniform", stepper="krylov", krylov_dim=4,
                           krylov_tol=1e3, unitarity_tol=1e-14)
    with pytest.raises((StabilityError, AccuracyError)):
        evolve_osc(pot, gaussian(g, 0.0, 0.7), 1.0, 0.0, cfg)


def test_cross_picture_free_and_coulomb():
    g = GridSpec(1, 40.0, 1024)
    psi = gaussian(g, 0.5, 1 / np.sqrt(2), 1.0)
    assert cross_picture_check(FunctionalOscPotentials.zero(1), psi, 1.0, 0.0) < 1e-10
    d = cross_picture_check(build_a_gauge(CoulombField(1.0, 0.5, 1)), psi, 1.0, 0.0)
    assert d < 1e-4
