import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlab.errors import AccuracyError
from nlab.fields import (METRIC, ConstantMagneticField, CoulombField, GaussianSourceField,
                         RadiationAsymptote, SampleSpec, SumField, UniformElectricField, ZeroField,
                         check_bounds, eval_C, eval_div_e, eval_e, fields_from_tensor,
                         radiation_field, radiation_potential, w_asymptote)


def _coulomb(X):
    r = np.linalg.norm(X, axis=0)
    return X / r**3


def test_zero_field():
    m = ZeroField(2)
    X = np.ones((2, 5))
    assert np.all(eval_e(m, 0.3, X) == 0)
    assert np.all(m.E(1.0, X) == 0)


def test_uniform_field_scaling():
    m = UniformElectricField([0.5, 0.0, -1.0])
    X = np.random.default_rng(0).normal(size=(3, 4))
    tau = 0.7
    assert np.allclose(eval_e(m, tau, X), m.E0[:, None] / np.cos(tau) ** 3)
    assert m.decay_class != "coulomb-like"


def test_magnetic_rejected_in_one_dimension():
    with pytest.raises(ValueError):
        ConstantMagneticField([1.0], dim=1)


@pytest.mark.parametrize("route", ["direct", "C"])
def test_e_routes_agree(route):
    m = SumField([CoulombField(1.0, 0.5, 3), UniformElectricField([0.1, 0.2, 0.3])])
    X = np.random.default_rng(1).uniform(-2, 2, (3, 20))
    assert np.allclose(eval_e(m, 0.4, X, route=route), eval_e(m, 0.4, X), rtol=1e-12, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(3.5, 6.0), st.floats(0, 2 * np.pi), st.floats(-1, 1))
def test_coulomb_closed_form_off_core(tau, r, phi, mu):
    m = CoulombField(q=1.3, r0=0.5, dim=3)
    x = r * np.array([np.sqrt(1 - mu**2) * np.cos(phi), np.sqrt(1 - mu**2) * np.sin(phi), mu])
    e = eval_e(m, tau, x[:, None])[:, 0]
    assert np.allclose(e, 1.3 * x / r**3 / np.cos(tau), rtol=1e-10)


def test_coulomb_core_options():
    X = np.array([[0.0, 0.05, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    for core in ("gaussian", "compact", "plummer"):
        g = CoulombField(1.0, 0.5, 3, core=core).profile(X)
        assert np.all(np.isfinite(g))
        assert np.allclose(g[:, 0], 0.0)
    with pytest.raises(ValueError):
        CoulombField(core="bogus")


def test_div_e_analytic_vs_fd():
    m = CoulombField(1.0, 0.5, 3)
    X = np.random.default_rng(2).uniform(-2, 2, (3, 30))
    a = eval_div_e(m, 0.6, X)
    h = 1e-4
    fd = sum((eval_e(m, 0.6, X + h * np.eye(3)[j][:, None])[j]
              - eval_e(m, 0.6, X - h * np.eye(3)[j][:, None])[j]) / (2 * h) for j in range(3))
    assert np.allclose(a, fd, atol=1e-6)


def test_gaussian_source_bound_stable():
    m = GaussianSourceField(1.0, 1.0, 3)
    a = check_bounds(m, SampleSpec(3, "tau", 16, 64, seed=0))
    b = check_bounds(m, SampleSpec(3, "tau", 32, 128, seed=0))
    assert abs(b.sup_e_weighted / a.sup_e_weighted - 1) < 0.1
    assert not any(a.flags.values())


def test_uniform_field_flagged():
    rep = check_bounds(UniformElectricField([1.0, 0, 0]), SampleSpec(3, "tau", 16, 32, seed=0))
    assert rep.flags["e"]


def test_bound_report_io(tmp_path):
    rep = check_bounds(GaussianSourceField(1.0, 1.0, 1), SampleSpec(1, "spacetime", 4, 8, seed=0))
    rep.write_csv(tmp_path / "b.csv")
    rep.write_json(tmp_path / "b.json")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0].startswith("t,x_norm")
    assert len(lines) == rep.n_samples + 1
    with pytest.raises(ValueError):
        check_bounds(GaussianSourceField(1.0, 1.0, 1), SampleSpec(3, "tau", 4, 8))


def test_radiation_dipole_at_origin():
    p = np.array([0.3, -0.2, 1.0])
    A = radiation_potential(RadiationAsymptote.dipole_pulse(p), np.zeros(4))
    assert np.allclose(A[1:], 4 / (3 * np.pi) * p, atol=1e-12)
    assert abs(A[0]) < 1e-14


def test_radiation_section_invariance():
    asym = RadiationAsymptote.dipole_pulse()
    x4 = np.array([0.5, 0.2, -0.1, 0.4])
    assert np.allclose(radiation_potential(asym, x4), radiation_potential(asym, x4, section_scale=2.5),
                       atol=1e-10)


def test_radiation_zero_and_tensor():
    F = radiation_field(RadiationAsymptote.zero(), np.array([0.1, 0.2, 0.3, 0.4]))
    assert np.all(F == 0)
    F = np.zeros((4, 4))
    F[1, 0], F[0, 1] = 2.0, -2.0
    E, B = fields_from_tensor(F)
    assert np.allclose(E, [2, 0, 0]) and np.allclose(B, 0)


def test_radiation_quadrature_fails_loudly():
    with pytest.raises(AccuracyError):
        radiation_potential(RadiationAsymptote.dipole_pulse(), np.array([30.0, 0.0, 0.0, 29.0]),
                            order=4, max_order=8, tol=1e-14)


def test_lorentz_orthogonality():
    rng = np.random.default_rng(3)
    lh = rng.normal(size=(3, 20))
    lh /= np.linalg.norm(lh, axis=0)
    s = rng.normal(size=20) * 3
    W = w_asymptote(RadiationAsymptote.dipole_pulse([0.0, 1.0, 0.5]), s, lh)
    l4 = np.concatenate([np.ones((1, 20)), lh])
    assert np.max(np.abs(np.einsum("a,an,an->n", np.diag(METRIC), l4, W))) < 1e-8


def test_eval_C_matches_definition():
    m = ConstantMagneticField([0.0, 0.0, 1.0], dim=3)
    X = np.random.default_rng(4).normal(size=(3, 5))
    t = 0.8
    C = eval_C(m, t, X)
    assert np.allclose(C, t * m.E(t, X) + np.cross(X.T, m.B(t, X).T).T)
