"""Time stepping in the oscillator and Schrödinger pictures.

The default ``split`` stepper is a Strang splitting around the exactly
solvable part: in the oscillator picture each step is

    u0(D/2) exp(-i D r(tau_mid)) u0(D/2),   r = h - h0 = -(a.p + p.a)/2 + a^2/2 + v,

with ``u0`` the exact three-shear oscillator flow; in the Schrödinger
picture ``p^2/2`` plays the role of ``h0``.  The middle factor is a
position multiplier when the vector potential vanishes and a Lanczos
exponential otherwise.  The ``krylov`` stepper applies a Lanczos
exponential of the full hamiltonian at the step midpoint.

Step nodes for the ``cos`` law are ``tau_k = arctan(sinh(k D0))``, so the
local step is ``D0 cos tau`` and the Schrödinger nodes ``t_k = tan tau_k``
coincide with the oscillator ones.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .errors import AccuracyError, EscapeError, StabilityError
from .gauge import OscPotentials, SchrFromOsc, SchrPotentials
from .lattice import GridSpec, WaveFunction, boundary_mass
from .picture import apply_N, apply_N_star, oscillator_shear

__all__ = [
    "PropagatorConfig",
    "apply_h",
    "apply_H",
    "expmv_lanczos",
    "step_nodes",
    "evolve_osc",
    "evolve_schr",
    "cross_picture_check",
]


@dataclass(frozen=True)
class PropagatorConfig:
    """Stepping parameters.

    ``dtau`` is the base step ``D0`` (in ``tau`` for the uniform law, in
    ``asinh(tan tau)`` for the cos law).  ``delta`` keeps evolution inside
    ``|tau| <= pi/2 - delta``.  ``breakpoints`` are extra ``tau`` values
    always used as step nodes.
    """

    stepper: str = "split"
    dtau: float = 0.02
    step_law: str = "cos"
    krylov_dim: int = 30
    krylov_tol: float = 1e-12
    unitarity_tol: float = 1e-9
    delta: float = 1e-7
    escape_tol: float = 1e-8
    breakpoints: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.stepper not in ("split", "krylov"):
            raise ValueError(f"unknown stepper {self.stepper!r}")
        if self.step_law not in ("uniform", "cos"):
            raise ValueError(f"unknown step law {self.step_law!r}")
        if not self.dtau > 0:
            raise ValueError("dtau must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.krylov_dim < 4:
            raise ValueError("krylov_dim must be at least 4")

    def refined(self, factor: int = 2) -> "PropagatorConfig":
        return replace(self, dtau=self.dtau / factor)


# --------------------------------------------------------------------------
# hamiltonians


def _p(grid: GridSpec, arr: np.ndarray, j: int) -> np.ndarray:
    return sfft.ifftn(grid.momenta[j] * sfft.fftn(arr))


def _pi_squared(grid: GridSpec, arr: np.ndarray, a: np.ndarray | None) -> np.ndarray:
    if a is None:
        return sfft.ifftn(grid.k2 * sfft.fftn(arr))
    out = np.zeros_like(arr)
    for j in range(grid.dim):
        w = _p(grid, arr, j) - a[j] * arr
        out += _p(grid, w, j) - a[j] * w
    return out


def apply_h(potentials: OscPotentials, tau: float, psi: WaveFunction) -> WaveFunction:
    """``(½(p - a(tau))² + ½x² + v(tau)) psi``."""
    grid = psi.grid
    a = None if potentials.vanishing_a else potentials.a_slice(grid, tau)
    out = 0.5 * _pi_squared(grid, psi.psi, a) + 0.5 * grid.r2 * psi.psi
    if not potentials.vanishing_v:
        out = out + potentials.v_slice(grid, tau) * psi.psi
    return WaveFunction(grid, out)


def apply_H(potentials: SchrPotentials, t: float, psi: WaveFunction) -> WaveFunction:
    """``(½(p - A(t))² + V(t)) psi``."""
    grid = psi.grid
    A = None if potentials.vanishing_A else potentials.A_slice(grid, t)
    out = 0.5 * _pi_squared(grid, psi.psi, A)
    if not potentials.vanishing_V:
        out = out + potentials.V_slice(grid, t) * psi.psi
    return WaveFunction(grid, out)


def _perturbation(grid: GridSpec, a: np.ndarray | None, v: np.ndarray | None) -> Callable:
    """``r = -(a.p + p.a)/2 + a²/2 + v`` as a function on arrays."""
    scal = np.zeros(grid.shape)
    if a is not None:
        scal = scal + 0.5 * np.sum(a**2, axis=0)
    if v is not None:
        scal = scal + v

    def apply(arr):
        out = scal * arr
        if a is not None:
            for j in range(grid.dim):
                out -= 0.5 * (a[j] * _p(grid, arr, j) + _p(grid, a[j] * arr, j))
        return out

    return apply


# --------------------------------------------------------------------------
# Lanczos exponential


def _lanczos_once(apply: Callable, v: np.ndarray, dt: float, m_max: int, tol: float):
    beta0 = np.linalg.norm(v)
    if beta0 == 0:
        return np.zeros_like(v), True
    Q = [v / beta0]
    alpha, beta = [], []
    est = np.inf
    y = None
    for m in range(1, m_max + 1):
        w = apply(Q[-1])
        alpha.append(np.vdot(Q[-1], w).real)
        w = w - alpha[-1] * Q[-1] - (beta[-1] * Q[-2] if beta else 0.0)
        for q in Q:  # full reorthogonalization
            w = w - np.vdot(q, w) * q
        b = np.linalg.norm(w)
        T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
        y = sla.expm(-1j * dt * T)[:, 0]
        est = beta0 * b * abs(y[-1]) * max(1.0, abs(dt))
        if b < 1e-14 * beta0 or est < tol:
            break
        beta.append(b)
        Q.append(w / b)
    out = sum(c * q for c, q in zip(y, Q[: len(y)]))
    return beta0 * out, est < tol or b < 1e-14 * beta0


def expmv_lanczos(apply: Callable, v: np.ndarray, dt: float, m_max: int = 30,
                  tol: float = 1e-12, max_depth: int = 12) -> np.ndarray:
    """``exp(-i dt A) v`` for Hermitian ``A``; substeps when the a-posteriori
    Lanczos error estimate exceeds ``tol`` at dimension ``m_max``."""

    def go(vec, h, depth):
        out, ok = _lanczos_once(apply, vec, h, m_max, tol)
        if ok:
            return out
        if depth >= max_depth:
            raise AccuracyError(f"Lanczos exponential did not converge (dt={h:.3g})")
        return go(go(vec, h / 2, depth + 1), h / 2, depth + 1)

    return go(np.asarray(v, dtype=complex), float(dt), 0)


# --------------------------------------------------------------------------
# step nodes


def step_nodes(start: float, stop: float, cfg: PropagatorConfig) -> np.ndarray:
    """Oscillator-picture step nodes from ``start`` to ``stop`` (inclusive)."""
    if start == stop:
        return np.array([start])
    lo, hi = min(start, stop), max(start, stop)
    if cfg.step_law == "uniform":
        k = np.arange(np.ceil(lo / cfg.dtau), np.floor(hi / cfg.dtau) + 1)
        inner = k * cfg.dtau
    else:
        ulo, uhi = np.arcsinh(np.tan(lo)), np.arcsinh(np.tan(hi))
        k = np.arange(np.ceil(ulo / cfg.dtau), np.floor(uhi / cfg.dtau) + 1)
        inner = np.arctan(np.sinh(k * cfg.dtau))
    bp = np.asarray(cfg.breakpoints, dtype=float)
    nodes = np.concatenate([[lo, hi], inner, bp[(bp > lo) & (bp < hi)]])
    nodes = np.unique(nodes)
    # drop slivers that would create near-zero steps
    keep = np.concatenate([[True], np.diff(nodes) > 1e-13])
    nodes = nodes[keep]
    if nodes.size == 1:
        nodes = np.array([lo, hi])
    nodes[-1] = hi
    return nodes if start < stop else nodes[::-1]


def _check_interval(tau, sigma, cfg):
    lim = np.pi / 2 - cfg.delta
    for x in (tau, sigma):
        if not abs(x) <= lim + 1e-15:
            raise ValueError(f"tau={x} outside |tau| <= pi/2 - delta = {lim}")


class _NormGuard:
    def __init__(self, cfg: PropagatorConfig, norm0: float):
        self.cfg, self.norm0, self.drift = cfg, norm0, 0.0

    def __call__(self, arr: np.ndarray, where: float) -> np.ndarray:
        nrm = np.linalg.norm(arr)
        ref = self.norm0
        if ref == 0:
            return arr
        self.drift += abs(nrm / ref - 1.0)
        if not np.isfinite(nrm) or abs(nrm / ref - 1.0) > self.cfg.unitarity_tol:
            raise StabilityError(f"norm drift {abs(nrm / ref - 1.0):.3g} in one step", where)
        return arr * (ref / nrm)


def evolve_osc(potentials: OscPotentials, psi: WaveFunction, tau: float, sigma: float,
               cfg: PropagatorConfig = PropagatorConfig()) -> WaveFunction:
    """Approximate ``u(tau, sigma) psi``."""
    _check_interval(tau, sigma, cfg)
    grid = psi.grid
    if tau == sigma:
        return psi.copy()
    if potentials.vanishing_a and potentials.vanishing_v:
        return WaveFunction(grid, oscillator_shear(grid, psi.psi, tau - sigma))
    nodes = step_nodes(sigma, tau, cfg)
    arr = np.asarray(psi.psi, dtype=complex)
    guard = _NormGuard(cfg, np.linalg.norm(arr))
    for ta, tb in zip(nodes[:-1], nodes[1:]):
        dt = tb - ta
        mid = 0.5 * (ta + tb)
        a = None if potentials.vanishing_a else potentials.a_slice(grid, mid)
        v = None if potentials.vanishing_v else potentials.v_slice(grid, mid)
        if cfg.stepper == "split":
            arr = oscillator_shear(grid, arr, 0.5 * dt)
            if a is None:
                arr = np.exp(-1j * dt * v) * arr
            else:
                arr = expmv_lanczos(_perturbation(grid, a, v), arr, dt, cfg.krylov_dim, cfg.krylov_tol)
            arr = oscillator_shear(grid, arr, 0.5 * dt)
        else:
            r = _perturbation(grid, a, v)
            full = lambda x, r=r: 0.5 * sfft.ifftn(grid.k2 * sfft.fftn(x)) + 0.5 * grid.r2 * x + r(x)
            arr = expmv_lanczos(full, arr, dt, cfg.krylov_dim, cfg.krylov_tol)
        arr = guard(arr, tb)
    return WaveFunction(grid, arr)


def evolve_schr(potentials: SchrPotentials, psi: WaveFunction, t: float, s: float,
                cfg: PropagatorConfig = PropagatorConfig()) -> WaveFunction:
    """Approximate ``U(t, s) psi`` with nodes ``tan`` of the oscillator nodes.

    Raises :class:`EscapeError` when the state reaches the box faces.
    """
    grid = psi.grid
    if t == s:
        return psi.copy()
    _check_interval(np.arctan(t), np.arctan(s), cfg)
    nodes = np.tan(step_nodes(float(np.arctan(s)), float(np.arctan(t)), cfg))
    nodes[0], nodes[-1] = s, t
    arr = np.asarray(psi.psi, dtype=complex)
    norm0 = np.linalg.norm(arr)
    guard = _NormGuard(cfg, norm0)
    mass0 = psi.norm() ** 2
    for ta, tb in zip(nodes[:-1], nodes[1:]):
        dt = tb - ta
        mid = 0.5 * (ta + tb)
        A = None if potentials.vanishing_A else potentials.A_slice(grid, mid)
        V = None if potentials.vanishing_V else potentials.V_slice(grid, mid)
        half = np.exp(-0.25j * dt * grid.k2)
        if cfg.stepper == "split" or (A is None and V is None):
            arr = sfft.ifftn(half * sfft.fftn(arr))
            if A is None and V is not None:
                arr = np.exp(-1j * dt * V) * arr
            elif A is not None:
                arr = expmv_lanczos(_perturbation(grid, A, V), arr, dt, cfg.krylov_dim, cfg.krylov_tol)
            arr = sfft.ifftn(half * sfft.fftn(arr))
        else:
            r = _perturbation(grid, A, V)
            full = lambda x, r=r: 0.5 * sfft.ifftn(grid.k2 * sfft.fftn(x)) + r(x)
            arr = expmv_lanczos(full, arr, dt, cfg.krylov_dim, cfg.krylov_tol)
        arr = guard(arr, tb)
        edge = boundary_mass(WaveFunction(grid, arr))
        if mass0 > 0 and edge > cfg.escape_tol * mass0:
            raise EscapeError(f"boundary mass {edge:.3g} exceeds {cfg.escape_tol:g}; enlarge the box", tb)
    return WaveFunction(grid, arr)


def cross_picture_check(osc: OscPotentials, psi: WaveFunction, t: float, s: float,
                        cfg: PropagatorConfig = PropagatorConfig()) -> float:
    """``|| N(t) u(arctan t, arctan s) N(s)* psi - U(t, s) psi ||``."""
    if t == s:
        return 0.0
    lhs = apply_N(t, evolve_osc(osc, apply_N_star(s, psi), float(np.arctan(t)),
                                float(np.arctan(s)), cfg))
    rhs = evolve_schr(SchrFromOsc(osc), psi, t, s, cfg)
    return (lhs - rhs).norm()
