import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlab.fields import CoulombField
from nlab.gauge import FunctionalOscPotentials, build_a_gauge
from nlab.lattice import GridSpec, SpatialProfile, characteristic_function
from nlab.picture import free_oscillator_evolve
from nlab.scatter import (asymptotic_position_char, asymptotic_velocity_distribution,
                          check_admissible, default_schedule, intertwining_check, isometry_defect,
                          richardson, scattering_report, shell_band_mass, shell_mass, wave_operator,
                          wave_operator_adjoint)

from conftest import gaussian


def test_default_schedule():
    s = default_schedule(5)
    assert s[0] == pytest.approx(np.pi / 4 + np.pi / 8)
    assert np.all(np.diff(np.pi / 2 - s) < 0)
    assert np.all(default_schedule(5, sign=-1) == -s)
    assert default_schedule(5, density=2).size == 2 * s.size - 1
    with pytest.raises(ValueError):
        default_schedule(5, sign=0)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_richardson_exact_on_polynomials(c0, c1, c2, c3):
    d = np.pi / 4 * 2.0 ** -np.arange(1, 8)
    vals = c0 + c1 * d + c2 * d**2 + c3 * d**3
    lim, _ = richardson(d, list(vals), 1.0, 4)
    assert lim == pytest.approx(c0, abs=1e-9)


def test_richardson_log_basis():
    d = np.pi / 4 * 2.0 ** -np.arange(1, 10)
    vals = 1.5 + 0.3 * d + 0.7 * d * np.log(d) - 0.2 * d**2
    lim, _ = richardson(d, list(vals), 0.83, 4)
    assert lim == pytest.approx(1.5, abs=1e-12)


def test_admissibility_and_shell_mass():
    g = GridSpec(1, 20.0, 512)
    with pytest.raises(ValueError):
        check_admissible(gaussian(g, 1.0, 0.2))
    check_admissible(gaussian(g, 0.0, 0.1))
    assert shell_band_mass(gaussian(g, 1.0, 0.05), width=0.3) > 0.99
    assert shell_band_mass(gaussian(g, 1.0, 0.05), width=0.0) == 0.0


def test_free_wave_operator_exact():
    g = GridSpec(1, 20.0, 512)
    z = FunctionalOscPotentials.zero(1)
    psi = gaussian(g, 0.2, 0.2, 0.5)
    for sign in (1, -1):
        w, tr = wave_operator(z, psi, sign)
        assert (w - free_oscillator_evolve(psi, 0.0, sign * np.pi / 2)).norm() < 1e-6
        assert tr.converged
    ws, _ = wave_operator_adjoint(z, psi)
    assert (ws - free_oscillator_evolve(psi, np.pi / 2, 0.0)).norm() < 1e-6
    with pytest.raises(ValueError):
        wave_operator(z, psi, 1, schedule=default_schedule(6, sign=-1))


def test_free_asymptotic_observables():
    g = GridSpec(1, 20.0, 512)
    z = FunctionalOscPotentials.zero(1)
    psi = gaussian(g, -0.3, 0.2, 1.0)
    exact = free_oscillator_evolve(psi, np.pi / 2, 0.0)
    tr = asymptotic_position_char(z, psi, 0.8)
    assert abs(tr.limit - characteristic_function(exact, 0.8)) < 1e-6
    dens, dtr = asymptotic_velocity_distribution(z, psi)
    assert np.sum(np.abs(dens - exact.density())) * g.dx < 1e-4
    assert shell_mass(z, psi, 0.1) == pytest.approx(shell_band_mass(exact, width=0.1), abs=1e-6)
    with pytest.raises(ValueError):
        shell_mass(z, psi, g.dx / 2)


def test_isometry_defect_identity():
    g = GridSpec(1, 10.0, 128)
    st_ = [gaussian(g, 0.0, 0.5), gaussian(g, 1.0, 0.5, 1.0)]
    assert isometry_defect(st_, st_) == 0.0
    with pytest.raises(ValueError):
        isometry_defect(st_, st_[:1])


def test_intertwining_requires_off_shell_f():
    g = GridSpec(1, 20.0, 512)
    with pytest.raises(ValueError):
        intertwining_check(FunctionalOscPotentials.zero(1), gaussian(g, 0.0, 0.1),
                           SpatialProfile(lambda X: np.ones(X.shape[1:])))


def test_trace_and_report_io(tmp_path):
    g = GridSpec(1, 20.0, 512)
    ag = build_a_gauge(CoulombField(1.0, 0.5, 1))
    traces = {}
    rep = scattering_report(ag, [gaussian(g, -0.3, 0.1, 1.0)], schedule=default_schedule(9),
                            traces_out=traces)
    rep.write_json(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["states"][0]["fingerprint"]["sha256_16"]
    tr = traces["state0"]
    tr.write_csv(tmp_path / "t.csv")
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "n,tau,increment,value_re,value_im" and len(rows) == tr.taus.size + 1
    assert json.dumps(tr.summary())
