"""Invariant suites: domain inequalities, Heisenberg-picture derivative
identities, the a-priori momentum bound and weak commutators.

Derivative identities are checked by central differences in ``tau``.  Since
``u(0, tau)`` is unitary, the outer evolution drops out of every defect
norm, e.g.

    || [x~(tau+d) - x~(tau-d)] psi / 2d - pi~(tau) psi ||
      = || [u(tau,tau+d) x u(tau+d,tau) - u(tau,tau-d) x u(tau-d,tau)] phi / 2d - pi(tau) phi ||

with ``phi = u(tau, 0) psi``; only the short inner evolutions are needed,
run with fine uniform substeps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft
from scipy import integrate

from .fields import eval_e
from .gauge import AGauge, OscPotentials
from .lattice import GridSpec, SpatialProfile, WaveFunction, boundary_mass, inner_product
from .propagate import PropagatorConfig, apply_h, evolve_osc

__all__ = [
    "TestStateFamily",
    "SmoothFunction",
    "pix_constant",
    "xppx_constant",
    "domain_inequality_pix",
    "domain_inequality_xppx",
    "heisenberg_position_check",
    "heisenberg_energy_check",
    "fxti_check",
    "momentum_bound_check",
    "weak_commutator_check",
    "ratio_ok",
    "write_summary",
]

RATIO_BAND = (3.4, 4.6)


def ratio_ok(ratio: float) -> bool:
    return RATIO_BAND[0] <= ratio <= RATIO_BAND[1]


@dataclass(frozen=True)
class TestStateFamily:
    """Random smooth states: Gaussian envelope x polynomial x plane-wave phase.

    Centres lie in ``|c| <= center_max``, widths in ``width_range`` (amplitude
    ``exp(-|x-c|^2 / (4 w^2))``), wave vectors in ``|k| <= k_max``; the
    polynomial has random complex coefficients up to degree ``degree``.
    """

    __test__ = False  # not a pytest class

    count: int = 50
    seed: int = 0
    center_max: float = 1.0
    width_range: tuple = (0.45, 0.9)
    k_max: float = 1.5
    degree: int = 2
    boundary_tol: float = 1e-10

    def _params(self, dim: int):
        rng = np.random.default_rng(self.seed)
        out = []
        for _ in range(self.count):
            c = rng.uniform(-1, 1, dim) * self.center_max / np.sqrt(dim)
            w = rng.uniform(*self.width_range)
            k = rng.uniform(-1, 1, dim) * self.k_max / np.sqrt(dim)
            coef = rng.normal(size=(self.degree + 1, dim)) + 1j * rng.normal(size=(self.degree + 1, dim))
            out.append((c, w, k, coef))
        return out

    def states(self, grid: GridSpec) -> list[WaveFunction]:
        states = []
        for c, w, k, coef in self._params(grid.dim):
            X = grid.coords
            Y = X - c.reshape((-1,) + (1,) * grid.dim)
            poly = 1.0 + sum(coef[n, j] * Y[j] ** n for n in range(1, self.degree + 1)
                             for j in range(grid.dim)) / (1 + self.degree)
            psi = poly * np.exp(-np.sum(Y**2, axis=0) / (4 * w**2)
                                + 1j * np.tensordot(k, X, axes=1))
            wf = WaveFunction(grid, psi).normalized()
            if boundary_mass(wf) > self.boundary_tol:
                raise ValueError("test state reaches the lattice boundary; enlarge the box")
            states.append(wf)
        return states


# --------------------------------------------------------------------------
# domain inequalities


def pix_constant(dim: int) -> float:
    """Constant in ``|pi^2 f|^2 + |x^2 f|^2 <= |(pi^2 + x^2) f|^2 + C |f|^2``: ``2d``."""
    return 2.0 * dim


def xppx_constant(dim: int) -> float:
    """Constant in ``|(x.pi + pi.x) f|^2 <= 2(|pi^2 f|^2 + |x^2 f|^2) + C |f|^2``: ``4d - d^2``."""
    return 4.0 * dim - dim**2


def _pi_parts(potentials: OscPotentials | None, tau: float, psi: WaveFunction):
    grid = psi.grid
    a = None if potentials is None or potentials.vanishing_a else potentials.a_slice(grid, tau)
    spec = sfft.fftn(psi.psi)
    out = []
    for j in range(grid.dim):
        comp = sfft.ifftn(grid.momenta[j] * spec)
        if a is not None:
            comp = comp - a[j] * psi.psi
        out.append(comp)
    return out, a


def _pi_apply(grid, arr, a, j):
    out = sfft.ifftn(grid.momenta[j] * sfft.fftn(arr))
    return out - a[j] * arr if a is not None else out


def _norm2(grid, arr) -> float:
    return float(np.sum(np.abs(arr) ** 2) * grid.cell_volume)


def _pix_terms(potentials, tau, psi):
    grid = psi.grid
    parts, a = _pi_parts(potentials, tau, psi)
    pi2 = sum(_pi_apply(grid, parts[j], a, j) for j in range(grid.dim))
    x2 = grid.r2 * psi.psi
    xp = sum(grid.coords[j] * parts[j] + _pi_apply(grid, grid.coords[j] * psi.psi, a, j)
             for j in range(grid.dim))
    return _norm2(grid, pi2), _norm2(grid, x2), _norm2(grid, pi2 + x2), _norm2(grid, xp), psi.norm() ** 2


def _margins(potentials, tau, states, which):
    out = []
    for psi in states:
        p2, x2, h2, xp, n2 = _pix_terms(potentials, tau, psi)
        d = psi.grid.dim
        if which == "pix":
            out.append(h2 + pix_constant(d) * n2 - p2 - x2)
        else:
            out.append(2 * (p2 + x2) + xppx_constant(d) * n2 - xp)
    return np.array(out)


def _inequality(family, potentials, tau, grid, which, other):
    states = family.states(grid) if isinstance(family, TestStateFamily) else list(family)
    m = _margins(potentials, tau, states, which)
    err = None
    if other is not None and isinstance(family, TestStateFamily):
        err = float(np.max(np.abs(m - _margins(potentials, tau, family.states(other), which))))
    k = int(np.argmin(m))
    return {"worst_margin": float(m[k]), "worst_index": k, "margins": m.tolist(),
            "discretization_error": err,
            "constant": pix_constant(grid.dim) if which == "pix" else xppx_constant(grid.dim)}


def domain_inequality_pix(family, potentials: OscPotentials | None, tau: float, grid: GridSpec,
                          other: GridSpec | None = None) -> dict:
    """Margins ``|(pi^2+x^2) f|^2 + 2d |f|^2 - |pi^2 f|^2 - |x^2 f|^2``.

    ``family`` is a :class:`TestStateFamily` or a list of states on ``grid``.
    With ``other`` (a family is required) the margins are recomputed on a
    second lattice and the largest change is reported as the discretization
    error bar; a coarser ``other`` gives a conservative bar.
    """
    return _inequality(family, potentials, tau, grid, "pix", other)


def domain_inequality_xppx(family, potentials: OscPotentials | None, tau: float, grid: GridSpec,
                           other: GridSpec | None = None) -> dict:
    """Margins ``2(|pi^2 f|^2 + |x^2 f|^2) + (4d - d^2)|f|^2 - |(x.pi + pi.x) f|^2``."""
    return _inequality(family, potentials, tau, grid, "xppx", other)


# --------------------------------------------------------------------------
# derivative identities


def _inner_cfg(delta: float, substeps: int) -> PropagatorConfig:
    return PropagatorConfig(step_law="uniform", dtau=delta / substeps, delta=1e-9)


def _conjugated_difference(potentials, phi, tau, delta, op: Callable, substeps):
    """``[u(tau,tau+d) O(tau+d) u(tau+d,tau) - u(tau,tau-d) O(tau-d) u(tau-d,tau)] phi / 2d``.

    ``op(tau, psi) -> psi`` may return a list of states (vector operators).
    """
    cfg = _inner_cfg(delta, substeps)
    outs = []
    for s in (+1, -1):
        t1 = tau + s * delta
        moved = evolve_osc(potentials, phi, t1, tau, cfg)
        res = op(t1, moved)
        res = res if isinstance(res, list) else [res]
        outs.append([evolve_osc(potentials, r, tau, t1, cfg) for r in res])
    return [WaveFunction(phi.grid, (p.psi - m.psi) / (2 * delta)) for p, m in zip(*outs)]


def _vec_norm(states: Sequence[WaveFunction]) -> float:
    return float(np.sqrt(sum(s.norm() ** 2 for s in states)))


def _order_test(residual_fn, delta):
    """Defects at ``delta`` and ``delta/2``, their ratio, and the defect of the
    Richardson combination ``(4 r(delta/2) - r(delta)) / 3``."""
    r1 = residual_fn(delta)
    r2 = residual_fn(delta / 2)
    d1, d2 = _vec_norm(r1), _vec_norm(r2)
    rich = _vec_norm([(b * 4.0 - a) * (1.0 / 3.0) for a, b in zip(r1, r2)])
    ratio = d1 / d2 if d2 > 0 else np.inf
    return {"delta": delta, "defect": d1, "defect_half": d2, "ratio": ratio,
            "ratio_ok": ratio_ok(ratio), "richardson_defect": rich}


def _position_op(tau, psi):
    return [WaveFunction(psi.grid, psi.grid.coords[j] * psi.psi) for j in range(psi.grid.dim)]


def _pi_op(potentials):
    def op(tau, psi):
        parts, _ = _pi_parts(potentials, tau, psi)
        return [WaveFunction(psi.grid, p) for p in parts]
    return op


def heisenberg_position_check(potentials: OscPotentials, psi: WaveFunction, tau: float,
                              delta: float = 1e-2, substeps: int = 16,
                              cfg: PropagatorConfig = PropagatorConfig()) -> dict:
    """``d x~/d tau = pi~`` by central differences, with the halving ratio test.

    At ``tau = 0`` the undifferentiated identities ``x~(0) = x`` and
    ``pi~(0) = p - a(0)`` hold trivially; ``tau0_defect`` reports them.
    """
    phi = evolve_osc(potentials, psi, tau, 0.0, cfg) if tau != 0 else psi
    target = _pi_op(potentials)(tau, phi)

    def defect(d):
        fd = _conjugated_difference(potentials, phi, tau, d, _position_op, substeps)
        return [f - t for f, t in zip(fd, target)]

    out = _order_test(defect, delta)
    return out


def _field_momentum(potentials: AGauge, tau, psi):
    """``½ (e.pi + pi.e) psi`` at ``tau``."""
    grid = psi.grid
    e = eval_e(potentials.model, tau, grid.coords)
    parts, a = _pi_parts(potentials, tau, psi)
    out = np.zeros(grid.shape, dtype=complex)
    for j in range(grid.dim):
        out += 0.5 * (e[j] * parts[j] + _pi_apply(grid, e[j] * psi.psi, a, j))
    return WaveFunction(grid, out)


def heisenberg_energy_check(potentials: OscPotentials, psi: WaveFunction, tau: float,
                            delta: float = 1e-2, substeps: int = 16,
                            cfg: PropagatorConfig = PropagatorConfig()) -> dict:
    """``d h~/d tau = ½ (e~.pi~ + pi~.e~)`` by central differences.

    Requires a-gauge potentials (``v = 0``) or vanishing potentials.
    """
    phi = evolve_osc(potentials, psi, tau, 0.0, cfg) if tau != 0 else psi
    if isinstance(potentials, AGauge):
        target = _field_momentum(potentials, tau, phi)
    elif potentials.vanishing_a and potentials.vanishing_v:
        target = WaveFunction(psi.grid, np.zeros(psi.grid.shape, dtype=complex))
    else:
        raise TypeError("energy identity needs a-gauge or vanishing potentials")

    def op(t, st):
        return apply_h(potentials, t, st)

    def defect(d):
        fd = _conjugated_difference(potentials, phi, tau, d, op, substeps)[0]
        return [fd - target]

    out = _order_test(defect, delta)
    out["target_norm"] = target.norm()
    return out


@dataclass(frozen=True)
class SmoothFunction:
    """``f`` with its gradient and laplacian, all callables of ``X`` (shape ``(d, ...)``)."""

    f: Callable
    grad: Callable
    lap: Callable

    @classmethod
    def plane_wave(cls, q) -> "SmoothFunction":
        q = np.asarray(q, dtype=float)
        qq = float(q @ q)

        def f(X):
            return np.exp(1j * np.tensordot(q, X, axes=1))

        return cls(f, lambda X: 1j * q.reshape((-1,) + (1,) * (X.ndim - 1)) * f(X),
                   lambda X: -qq * f(X))

    @classmethod
    def gaussian_bump(cls, center, width: float) -> "SmoothFunction":
        c = np.asarray(center, dtype=float)

        def f(X):
            Y = X - c.reshape((-1,) + (1,) * (X.ndim - 1))
            return np.exp(-np.sum(Y**2, axis=0) / (2 * width**2))

        def grad(X):
            Y = X - c.reshape((-1,) + (1,) * (X.ndim - 1))
            return -Y / width**2 * f(X)

        def lap(X):
            Y = X - c.reshape((-1,) + (1,) * (X.ndim - 1))
            r2 = np.sum(Y**2, axis=0)
            return (r2 / width**4 - c.size / width**2) * f(X)

        return cls(f, grad, lap)

    @classmethod
    def constant(cls, value: float) -> "SmoothFunction":
        return cls(lambda X: np.full(X.shape[1:], value, dtype=complex),
                   lambda X: np.zeros(X.shape, dtype=complex),
                   lambda X: np.zeros(X.shape[1:], dtype=complex))


def fxti_check(potentials: OscPotentials, psi: WaveFunction, f: SmoothFunction, tau: float,
               delta: float = 1e-2, substeps: int = 16,
               cfg: PropagatorConfig = PropagatorConfig()) -> dict:
    """``d f(x~)/d tau = (grad f)(x~).pi~ - (i/2)(lap f)(x~)`` by central differences."""
    grid = psi.grid
    phi = evolve_osc(potentials, psi, tau, 0.0, cfg) if tau != 0 else psi
    parts, _ = _pi_parts(potentials, tau, phi)
    g = f.grad(grid.coords)
    target = sum(g[j] * parts[j] for j in range(grid.dim)) - 0.5j * f.lap(grid.coords) * phi.psi
    target = WaveFunction(grid, target)
    fv = f.f(grid.coords)

    def op(t, st):
        return WaveFunction(grid, fv * st.psi)

    def defect(d):
        fd = _conjugated_difference(potentials, phi, tau, d, op, substeps)[0]
        return [fd - target]

    out = _order_test(defect, delta)
    out["target_norm"] = target.norm()
    return out


# --------------------------------------------------------------------------
# a-priori bound and weak commutators


def _sup_e(potentials: AGauge, grid: GridSpec, sigma: float) -> float:
    return float(np.max(np.linalg.norm(eval_e(potentials.model, sigma, grid.coords), axis=0)))


def momentum_bound_check(potentials: OscPotentials, psi: WaveFunction, schedule,
                         cfg: PropagatorConfig = PropagatorConfig()) -> dict:
    """``|pi~(tau) psi| <= sqrt2 |h(0)^{1/2} psi| + int_0^tau |e(s)|_inf ds |psi|``.

    The sup norm of ``e`` is taken over the lattice.  Returns the slack
    ``bound - lhs`` at each schedule point and its minimum.
    """
    grid = psi.grid
    schedule = np.asarray(schedule, dtype=float)
    h_half = np.sqrt(max(inner_product(psi, apply_h(potentials, 0.0, psi)).real, 0.0))
    nrm = psi.norm()
    if isinstance(potentials, AGauge):
        fact = potentials.model.osc_factorization()
        if fact is not None:
            gsup = float(np.max(np.linalg.norm(np.asarray(fact[1](grid.coords)), axis=0)))
            field_int = lambda tau: gsup * abs(integrate.quad(fact[0], 0.0, tau)[0])
        else:
            field_int = lambda tau: abs(integrate.quad(lambda s: _sup_e(potentials, grid, s), 0.0, tau,
                                                       limit=200)[0])
    elif potentials.vanishing_a and potentials.vanishing_v:
        field_int = lambda tau: 0.0
    else:
        raise TypeError("momentum bound needs a-gauge or vanishing potentials")
    c = replace(cfg, breakpoints=tuple(sorted(set(cfg.breakpoints) | set(map(float, schedule)))))
    cur, t0 = psi, 0.0
    lhs, bound = [], []
    for tau in schedule:
        cur = evolve_osc(potentials, cur, float(tau), t0, c)
        t0 = float(tau)
        parts, _ = _pi_parts(potentials, tau, cur)
        lhs.append(_vec_norm([WaveFunction(grid, p) for p in parts]))
        bound.append(np.sqrt(2.0) * h_half + field_int(float(tau)) * nrm)
    slack = np.array(bound) - np.array(lhs)
    return {"taus": schedule.tolist(), "lhs": lhs, "bound": [float(b) for b in bound],
            "slack": slack.tolist(), "min_slack": float(np.min(slack))}


def weak_commutator_check(potentials: OscPotentials, tau: float, phi: WaveFunction,
                          psi: WaveFunction) -> float:
    """``max_j |<x_j phi, h psi> - <h phi, x_j psi> - <phi, i pi_j psi>|``."""
    grid = psi.grid
    hpsi = apply_h(potentials, tau, psi)
    hphi = apply_h(potentials, tau, phi)
    parts, _ = _pi_parts(potentials, tau, psi)
    worst = 0.0
    for j in range(grid.dim):
        xphi = WaveFunction(grid, grid.coords[j] * phi.psi)
        xpsi = WaveFunction(grid, grid.coords[j] * psi.psi)
        lhs = inner_product(xphi, hpsi) - inner_product(hphi, xpsi)
        rhs = inner_product(phi, WaveFunction(grid, 1j * parts[j]))
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


def write_summary(path, results: dict) -> None:
    """Verification summary as JSON."""
    with open(path, "w") as fh:
        json.dump(results, fh, indent=2, sort_keys=True, default=float)
