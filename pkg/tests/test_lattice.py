import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlab.lattice import (GridSpec, SpatialProfile, WaveFunction, apply_fourier_multiplier,
                          apply_position_op, boundary_mass, characteristic_function,
                          continuum_fourier, divergence, gradient, inner_product,
                          momentum_component, resample_scaled)

from conftest import gaussian


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(4, 10.0, 64)
    with pytest.raises(ValueError):
        GridSpec(1, 10.0, 100)
    with pytest.raises(ValueError):
        GridSpec(1, -1.0, 64)
    g = GridSpec(2, 5.0, 32)
    assert g.shape == (32, 32)
    assert g.coords.shape == (2, 32, 32)
    assert g.dx == pytest.approx(10 / 32)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        WaveFunction(GridSpec(1, 5.0, 32), np.zeros(16))


def test_inner_product_and_norm():
    g = GridSpec(1, 10.0, 256)
    a, b = gaussian(g, 0.0, 0.7), gaussian(g, 0.5, 0.7, 1.0)
    assert a.norm() == pytest.approx(1.0)
    assert inner_product(a, b) == pytest.approx(np.conj(inner_product(b, a)))
    assert inner_product(a, a).real == pytest.approx(1.0)
    with pytest.raises(ValueError):
        inner_product(a, gaussian(GridSpec(1, 10.0, 128), 0.0, 0.7))


def test_momentum_of_plane_wave_packet():
    g = GridSpec(1, 20.0, 512)
    psi = gaussian(g, 0.0, 1.0, 1.5)
    p = momentum_component(g, psi.psi, 0)
    mean = inner_product(psi, WaveFunction(g, p)).real
    assert mean == pytest.approx(1.5, abs=1e-10)


def test_gradient_divergence():
    g = GridSpec(2, 10.0, 128)
    f = np.exp(-g.r2)
    gr = gradient(g, f)
    assert np.allclose(gr, -2 * g.coords * f, atol=1e-10)
    assert np.allclose(divergence(g, gr), (4 * g.r2 - 4) * f, atol=1e-9)


def test_position_and_fourier_multipliers():
    g = GridSpec(1, 10.0, 128)
    psi = gaussian(g, 0.0, 0.7)
    out = apply_position_op(psi, SpatialProfile(lambda X: X[0]))
    assert np.allclose(out.psi, g.axis * psi.psi)
    with pytest.raises(FloatingPointError):
        apply_position_op(psi, SpatialProfile(lambda X: np.full(X.shape[1:], np.inf)))
    same = apply_fourier_multiplier(psi, lambda K: np.ones_like(K[0]))
    assert np.allclose(same.psi, psi.psi)


def test_characteristic_function_gaussian():
    g = GridSpec(1, 20.0, 512)
    w = 0.8
    psi = gaussian(g, 0.3, w)
    q = 0.9
    exact = np.exp(1j * q * 0.3 - q**2 * w**2 / 2)
    assert characteristic_function(psi, q) == pytest.approx(exact, abs=1e-12)
    with pytest.raises(ValueError):
        characteristic_function(psi, [1.0, 2.0])


def test_boundary_mass():
    g = GridSpec(1, 10.0, 128)
    assert boundary_mass(gaussian(g, 0.0, 0.5)) < 1e-30
    assert boundary_mass(gaussian(g, 9.8, 0.5)) > 0.1


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(-1.0, 1.0))
def test_resample_scaled_gaussian(scale, center):
    g = GridSpec(1, 16.0, 256)
    f = np.exp(-(g.axis - center) ** 2)
    out = resample_scaled(g, f, scale)
    assert np.allclose(out, np.exp(-(scale * g.axis - center) ** 2), atol=1e-10)


def test_continuum_fourier_gaussian():
    g = GridSpec(1, 12.0, 256)
    psi = gaussian(g, 0.0, 1 / np.sqrt(2))  # exp(-x^2/2) / pi^{1/4}
    out = continuum_fourier(psi)
    assert np.allclose(out.psi, psi.psi, atol=1e-12)
