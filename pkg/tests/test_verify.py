import json

import numpy as np
import pytest

from nlab.fields import CoulombField
from nlab.gauge import FunctionalOscPotentials, build_a_gauge
from nlab.lattice import GridSpec, WaveFunction
from nlab.verify import (SmoothFunction, TestStateFamily, domain_inequality_pix,
                         domain_inequality_xppx, fxti_check, heisenberg_energy_check,
                         heisenberg_position_check, momentum_bound_check, pix_constant, ratio_ok,
                         weak_commutator_check, write_summary, xppx_constant)

from conftest import gaussian


def _ground(g):
    return WaveFunction.from_function(g, lambda X: np.exp(-0.5 * np.sum(X**2, axis=0)), normalize=True)


def test_constants():
    assert (pix_constant(3), xppx_constant(3)) == (6.0, 3.0)
    assert (pix_constant(1), xppx_constant(1)) == (2.0, 3.0)
    assert ratio_ok(4.0) and not ratio_ok(2.0)


@pytest.mark.parametrize("dim,points", [(1, 256), (2, 64)])
def test_ground_state_margins(dim, points):
    # pix margin (d^2 + 2d)/2; |(x.p + p.x) phi0|^2 = 2d, so the xppx margin is 4d
    g = GridSpec(dim, 8.0, points)
    phi = _ground(g)
    assert domain_inequality_pix([phi], None, 0.0, g)["worst_margin"] == pytest.approx((dim**2 + 2 * dim) / 2)
    assert domain_inequality_xppx([phi], None, 0.0, g)["worst_margin"] == pytest.approx(4 * dim)


def test_family_deterministic_and_boundary_guard():
    g = GridSpec(1, 10.0, 256)
    a = TestStateFamily(count=3, seed=5).states(g)
    b = TestStateFamily(count=3, seed=5).states(g)
    assert all(np.array_equal(x.psi, y.psi) for x, y in zip(a, b))
    with pytest.raises(ValueError):
        TestStateFamily(count=3, seed=5, center_max=4.0, width_range=(1.5, 2.0)).states(GridSpec(1, 4.0, 64))


def test_margins_with_error_bar():
    g = GridSpec(1, 10.0, 256)
    ag = build_a_gauge(CoulombField(1.0, 0.5, 1))
    r = domain_inequality_pix(TestStateFamily(count=5), ag, 0.5, g, GridSpec(1, 10.0, 512))
    assert r["worst_margin"] > 0 and r["discretization_error"] < 1e-6
    assert len(r["margins"]) == 5


def test_heisenberg_free_position():
    g = GridSpec(1, 20.0, 512)
    r = heisenberg_position_check(FunctionalOscPotentials.zero(1), gaussian(g, 1.0, 1 / np.sqrt(2)), 0.7)
    assert r["ratio_ok"] and r["richardson_defect"] < 1e-9


def test_energy_free_is_conserved():
    g = GridSpec(1, 20.0, 512)
    r = heisenberg_energy_check(FunctionalOscPotentials.zero(1), gaussian(g, 1.0, 0.6, 0.5), 0.3)
    assert r["defect"] < 1e-9 and r["target_norm"] == 0.0
    with pytest.raises(TypeError):
        heisenberg_energy_check(FunctionalOscPotentials(1, v=lambda t, X: X[0]), gaussian(g, 0, 0.6), 0.3)


def test_fxti_constant_function_vanishes():
    g = GridSpec(1, 20.0, 512)
    r = fxti_check(FunctionalOscPotentials.zero(1), gaussian(g, 0.5, 0.7), SmoothFunction.constant(2.0), 0.4)
    assert r["defect"] < 1e-12 and r["target_norm"] == 0.0


def test_momentum_bound_free():
    g = GridSpec(1, 20.0, 512)
    r = momentum_bound_check(FunctionalOscPotentials.zero(1), gaussian(g, 0.5, 0.7, 1.0),
                             np.linspace(0.1, 1.4, 6))
    assert r["min_slack"] >= 0


def test_weak_commutator():
    g = GridSpec(1, 20.0, 512)
    ag = build_a_gauge(CoulombField(1.0, 0.5, 1))
    assert weak_commutator_check(ag, 0.7, gaussian(g, 1.0, 0.7), gaussian(g, 0.5, 0.6, 1.0)) < 1e-8


def test_write_summary(tmp_path):
    write_summary(tmp_path / "s.json", {"a": np.float64(1.5)})
    assert json.loads((tmp_path / "s.json").read_text()) == {"a": 1.5}
