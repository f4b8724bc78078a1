import numpy as np
import pytest

from nlab.errors import AccuracyError
from nlab.fields import CoulombField, GaussianSourceField, SumField, UniformElectricField, eval_e
from nlab.gauge import (FunctionalOscPotentials, FunctionalSchrPotentials, GaugeFunction,
                        OscFromSchr, SchrFromOsc, build_a_gauge, check_xA, fd_derivative,
                        gauge_transform, osc_to_schr, schr_to_osc)
from nlab.lattice import GridSpec, SpatialProfile


def _samples(d, n=200, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.4, 1.4, n), rng.uniform(-3, 3, (d, n))


def test_a_gauge_closed_form_coulomb():
    ag = build_a_gauge(CoulombField(1.0, 0.5, 3))
    X = np.random.default_rng(0).uniform(-4, 4, (3, 50))
    X = X[:, np.linalg.norm(X, axis=0) > 3]
    for tau in (-1.2, 0.3, 1.4):
        r = np.linalg.norm(X, axis=0)
        exact = -X / r**3 * np.log(1 / np.cos(tau) + np.tan(tau))
        assert np.allclose(ag.a(tau, X), exact, rtol=1e-8, atol=1e-14)
    assert ag.vanishing_v
    assert np.all(ag.v(0.2, X) == 0)


def test_a_gauge_nonseparable_model():
    m = SumField([GaussianSourceField(1.0, 1.0, 1), UniformElectricField([0.2])])
    ag = build_a_gauge(m)
    X = np.linspace(-3, 3, 7)[None]
    da = fd_derivative(lambda s: ag.a(s, X), 0.8, 1e-3)
    assert np.allclose(-da, eval_e(m, 0.8, X), atol=1e-8)


def test_a_gauge_initial_profile():
    a0 = SpatialProfile(lambda X: 0.3 * np.ones_like(X), vector=True)
    ag = build_a_gauge(GaussianSourceField(1.0, 1.0, 1), a0)
    X = np.linspace(-2, 2, 5)[None]
    assert np.allclose(ag.a(0.0, X), 0.3)
    with pytest.raises(ValueError):
        build_a_gauge(GaussianSourceField(1.0, 1.0, 1),
                      SpatialProfile(lambda X: np.full(X.shape, np.nan), vector=True))


def test_a_gauge_slice_cache_and_interval():
    g = GridSpec(1, 10.0, 64)
    ag = build_a_gauge(CoulombField(1.0, 0.5, 1))
    s1 = ag.a_slice(g, 0.4)
    assert np.array_equal(s1, ag.a_slice(g, 0.4))
    with pytest.raises(ValueError):
        ag.a(np.pi / 2, g.coords)


def test_xA_identity_a_gauge():
    ag = build_a_gauge(CoulombField(1.0, 0.5, 3))
    T, X = _samples(3)
    assert check_xA(SchrFromOsc(ag), np.tan(T), X) < 1e-10


def test_xA_detects_general_gauge():
    sp = SchrFromOsc(build_a_gauge(CoulombField(1.0, 0.5, 1)))
    G = GaugeFunction(1, Lam=lambda t, X: X[0] * t)
    T, X = _samples(1, 50)
    assert check_xA(gauge_transform(sp, G), np.tan(T), X) > 1e-3


def test_picture_maps_round_trip():
    schr = FunctionalSchrPotentials(1, V=lambda t, X: np.sin(t) * X[0] ** 2,
                                    A=lambda t, X: np.cos(t) * X)
    back = SchrFromOsc(OscFromSchr(schr))
    X = np.linspace(-2, 2, 9)[None]
    for t in (-2.0, 0.0, 0.7):
        assert np.allclose(back.V(t, X), schr.V(t, X), atol=1e-12)
        assert np.allclose(back.A(t, X), schr.A(t, X), atol=1e-12)
    sl = schr_to_osc(schr, 0.5)
    assert sl.picture == "oscillator"
    with pytest.raises(ValueError):
        schr_to_osc(schr, 2.0)
    assert osc_to_schr(OscFromSchr(schr), 1.0).time == 1.0


def test_gauge_function_chain_rule():
    G = GaugeFunction(1, Lam=lambda t, X: 0.3 * X[0] * np.sin(t) + 0.05 * X[0] ** 2 * np.cos(t),
                      grad_Lam=lambda t, X: np.array([0.3 * np.sin(t) + 0.1 * X[0] * np.cos(t)]),
                      dt_Lam=lambda t, X: 0.3 * X[0] * np.cos(t) - 0.05 * X[0] ** 2 * np.sin(t))
    F = GaugeFunction(1, Lam=lambda t, X: 0.3 * X[0] * np.sin(t) + 0.05 * X[0] ** 2 * np.cos(t))
    X = np.linspace(-2, 2, 5)[None]
    assert np.allclose(G.dtau_lam(0.6, X), F.dtau_lam(0.6, X), atol=1e-8)
    assert np.allclose(G.grad_lam(0.6, X), F.grad_lam(0.6, X), atol=1e-8)
    with pytest.raises(ValueError):
        GaugeFunction(1)


def test_gauge_transform_dimension_check():
    with pytest.raises(ValueError):
        gauge_transform(FunctionalOscPotentials.zero(2), GaugeFunction(1, Lam=lambda t, X: X[0]))
    with pytest.raises(TypeError):
        gauge_transform(object(), GaugeFunction(1, Lam=lambda t, X: X[0]))
