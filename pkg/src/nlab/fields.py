"""Electromagnetic field models and their oscillator-picture counterparts.

Fields are evaluated at a time ``t`` (scalar) and points ``X`` of shape
``(d, ...)``.  For ``d = 2`` the magnetic field is the scalar z-component and
``x × B = (x2 B, -x1 B)``; for ``d = 1`` there is no magnetic field.

Besides ``E`` and ``B`` the module provides ``C = t E + x × B``, the
oscillator-picture electric field ``e(tau, x)`` and its divergence, the
free radiation-field representation on the future null directions, and an
empirical check of the decay bounds.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from .errors import AccuracyError
from .picture import tm

__all__ = [
    "FieldModel",
    "ZeroField",
    "UniformElectricField",
    "ConstantMagneticField",
    "HomogeneousField",
    "CoulombField",
    "GaussianSourceField",
    "RadiationAsymptote",
    "RadiationField",
    "SumField",
    "cross",
    "eval_C",
    "eval_e",
    "eval_div_e",
    "radiation_potential",
    "radiation_field",
    "radiation_C",
    "fields_from_tensor",
    "w_asymptote",
    "w_asymptote_dot",
    "SampleSpec",
    "BoundReport",
    "check_bounds",
]

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])


def cross(X: np.ndarray, B, dim: int) -> np.ndarray:
    """``x × B`` with the low-dimensional conventions of this module."""
    if B is None or dim == 1:
        return np.zeros_like(np.asarray(X, dtype=float))
    if dim == 2:
        return np.array([X[1] * B, -X[0] * B])
    return np.cross(X, B, axis=0)


class FieldModel:
    """Base class: subclasses provide ``E`` and optionally ``B`` and analytic
    divergence data.  ``gamma`` is the declared exponent of the divergence
    bound, ``decay_class`` a free-form label."""

    dim: int = 3
    gamma: float = 1.0
    decay_class: str = "unspecified"

    def E(self, t: float, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def B(self, t: float, X: np.ndarray):
        return None

    def div_E(self, t: float, X: np.ndarray):
        return None

    def curl_B(self, t: float, X: np.ndarray):
        """``∇ × B``; for ``d = 2`` the in-plane curl ``(∂2 B, -∂1 B)``.
        ``None`` means not available analytically.  Models without a magnetic
        field return zeros."""
        return None

    def osc_factorization(self):
        """``(s, g)`` such that ``e(tau, x) = s(tau) g(x)``, or ``None``."""
        return None

    @property
    def has_magnetic(self) -> bool:
        return False

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "dim": self.dim, "gamma": self.gamma,
                "decay_class": self.decay_class}


class ZeroField(FieldModel):
    decay_class = "zero"

    def __init__(self, dim: int = 3):
        self.dim = dim

    def E(self, t, X):
        return np.zeros_like(np.asarray(X, dtype=float))

    def div_E(self, t, X):
        return np.zeros(np.shape(X)[1:])

    def curl_B(self, t, X):
        return np.zeros_like(np.asarray(X, dtype=float))

    def osc_factorization(self):
        return (lambda tau: 0.0), (lambda X: np.zeros_like(np.asarray(X, dtype=float)))


class UniformElectricField(FieldModel):
    """Constant electric field; not in the scattering decay class."""

    decay_class = "static-uniform"

    def __init__(self, E0: Sequence[float]):
        self.E0 = np.asarray(E0, dtype=float)
        self.dim = self.E0.size

    def _const(self, X):
        X = np.asarray(X, dtype=float)
        return np.broadcast_to(self.E0.reshape((self.dim,) + (1,) * (X.ndim - 1)), X.shape).copy()

    def E(self, t, X):
        return self._const(X)

    def div_E(self, t, X):
        return np.zeros(np.shape(X)[1:])

    def curl_B(self, t, X):
        return np.zeros_like(np.asarray(X, dtype=float))

    def osc_factorization(self):
        return (lambda tau: 1.0 / np.cos(tau) ** 3), self._const


class ConstantMagneticField(FieldModel):
    """Constant magnetic field (scalar for ``d = 2``, vector for ``d = 3``)."""

    decay_class = "static-uniform"

    def __init__(self, B0, dim: int = 3):
        self.dim = dim
        if dim == 1:
            raise ValueError("no magnetic field in one dimension")
        self.B0 = np.asarray(B0, dtype=float)
        if dim == 3 and self.B0.shape != (3,):
            raise ValueError("B0 must be a 3-vector for dim=3")

    @property
    def has_magnetic(self):
        return True

    def E(self, t, X):
        return np.zeros_like(np.asarray(X, dtype=float))

    def B(self, t, X):
        X = np.asarray(X, dtype=float)
        if self.dim == 2:
            return np.full(X.shape[1:], float(self.B0))
        return np.broadcast_to(self.B0.reshape((3,) + (1,) * (X.ndim - 1)), X.shape).copy()

    def div_E(self, t, X):
        return np.zeros(np.shape(X)[1:])

    def curl_B(self, t, X):
        return np.zeros_like(np.asarray(X, dtype=float))

    def osc_factorization(self):
        return (lambda tau: np.tan(tau) / np.cos(tau) ** 2), (lambda X: cross(X, self.B(0.0, X), self.dim))


class HomogeneousField(FieldModel):
    """``E(t, x) = <t>^{-2} g(x / <t>)``, ``B = 0``.

    Degree ``-2`` homogeneity in spacetime away from the core; the
    oscillator-picture field is ``e(tau, x) = sec(tau) g(x)`` exactly.
    """

    decay_class = "homogeneous"

    def profile(self, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def div_profile(self, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def E(self, t, X):
        s = tm(t)
        return self.profile(np.asarray(X, dtype=float) / s) / s**2

    def div_E(self, t, X):
        s = tm(t)
        return self.div_profile(np.asarray(X, dtype=float) / s) / s**3

    def curl_B(self, t, X):
        return np.zeros_like(np.asarray(X, dtype=float))

    def osc_factorization(self):
        return (lambda tau: 1.0 / np.cos(tau)), self.profile


def _bump(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = np.exp(-1.0 / z[pos])
    return out


def _smooth_step(u):
    """C-infinity step: 0 for ``u <= 1/2``, 1 for ``u >= 1``; returns (S, dS/du)."""
    z = np.clip(2.0 * np.asarray(u, dtype=float) - 1.0, 0.0, 1.0)
    f0, f1 = _bump(z), _bump(1.0 - z)
    den = f0 + f1
    S = f0 / den
    with np.errstate(divide="ignore", invalid="ignore"):
        d0 = np.where(z > 0, f0 / np.where(z > 0, z, 1.0) ** 2, 0.0)
        d1 = np.where(z < 1, f1 / np.where(z < 1, 1.0 - z, 1.0) ** 2, 0.0)
    dS = 2.0 * (d0 * f1 + f0 * d1) / den**2
    return S, dS


def _screened(r, r0):
    """``[erf(u) - 2 u exp(-u^2)/sqrt(pi)] / r^3`` with ``u = r / r0``; series near 0."""
    r = np.asarray(r, dtype=float)
    u = r / r0
    small = u < 0.1
    us = np.where(small, u, 0.0)
    series = (2.0 / np.sqrt(np.pi)) * (2.0 / 3 - 2.0 * us**2 / 5 + us**4 / 7 - us**6 / 27) / r0**3
    ub = np.where(small, 1.0, u)
    direct = (erf(ub) - 2.0 / np.sqrt(np.pi) * ub * np.exp(-ub**2)) / (ub * r0) ** 3
    return np.where(small, series, direct)


class CoulombField(HomogeneousField):
    """Mollified Coulomb field ``q x / |x|^3`` with a core of radius ``r0 <t>``.

    ``core="gaussian"`` is the field of a Gaussian charge cloud,
    ``q x / |x|^3 [erf(u) - 2 u exp(-u^2) / sqrt(pi)]`` with ``u = |x| / (r0 <t>)``;
    it is analytic and equals the Coulomb field up to a relative error below
    ``1e-14`` for ``u >= 6``.  ``core="compact"`` is exactly Coulomb for
    ``|x| >= r0 <t>`` (smooth charge shell between ``r0/2`` and ``r0`` at
    ``t = 0``) but its slowly decaying spectrum makes it a poor choice for
    propagation.  ``core="plummer"`` uses ``q x / (|x|^2 + r0^2 <t>^2)^{3/2}``.
    With ``comoving=False`` the core stays at radius ``r0`` (a static
    charge), which leaves the decay class.
    """

    def __init__(self, q: float = 1.0, r0: float = 1.0, dim: int = 3,
                 core: str = "gaussian", comoving: bool = True):
        if core not in ("gaussian", "compact", "plummer"):
            raise ValueError(f"unknown core {core!r}")
        if r0 <= 0:
            raise ValueError("r0 must be positive")
        self.q, self.r0, self.dim, self.core, self.comoving = float(q), float(r0), dim, core, comoving
        self.decay_class = "homogeneous" if comoving else "static-charge"

    def profile(self, Y):
        Y = np.asarray(Y, dtype=float)
        r2 = np.sum(Y**2, axis=0)
        if self.core == "plummer":
            return self.q * Y / (r2 + self.r0**2) ** 1.5
        if self.core == "gaussian":
            return self.q * Y * _screened(np.sqrt(r2), self.r0)
        r = np.sqrt(r2)
        S, _ = _smooth_step(r / self.r0)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(S > 0, S / np.where(r > 0, r, 1.0) ** 3, 0.0)
        return self.q * Y * f

    def div_profile(self, Y):
        Y = np.asarray(Y, dtype=float)
        d = self.dim
        r2 = np.sum(Y**2, axis=0)
        if self.core == "plummer":
            return self.q * (d * self.r0**2 + (d - 3) * r2) / (r2 + self.r0**2) ** 2.5
        if self.core == "gaussian":
            dens = 4.0 / np.sqrt(np.pi) * np.exp(-r2 / self.r0**2) / self.r0**3
            return self.q * ((d - 3) * _screened(np.sqrt(r2), self.r0) + dens)
        r = np.sqrt(r2)
        S, dS = _smooth_step(r / self.r0)
        safe = np.where(r > 0, r, 1.0)
        val = (d - 3) * S / safe**3 + dS / (self.r0 * safe**2)
        return self.q * np.where(S + dS > 0, val, 0.0)

    def E(self, t, X):
        if self.comoving:
            return super().E(t, X)
        return self.profile(X)

    def div_E(self, t, X):
        if self.comoving:
            return super().div_E(t, X)
        return self.div_profile(X)

    def osc_factorization(self):
        return super().osc_factorization() if self.comoving else None

    def describe(self):
        return {**super().describe(), "q": self.q, "r0": self.r0, "core": self.core,
                "comoving": self.comoving}


class GaussianSourceField(HomogeneousField):
    """``g(y) = q y exp(-|y|^2 / (2 w^2)) / w^3``: field of an expanding
    charge cloud with Gaussian profile."""

    def __init__(self, q: float = 1.0, width: float = 1.0, dim: int = 3):
        self.q, self.width, self.dim = float(q), float(width), dim

    def profile(self, Y):
        Y = np.asarray(Y, dtype=float)
        w = self.width
        return self.q * Y * np.exp(-0.5 * np.sum(Y**2, axis=0) / w**2) / w**3

    def div_profile(self, Y):
        Y = np.asarray(Y, dtype=float)
        w = self.width
        r2 = np.sum(Y**2, axis=0)
        return self.q * np.exp(-0.5 * r2 / w**2) * (self.dim - r2 / w**2) / w**3

    def describe(self):
        return {**super().describe(), "q": self.q, "width": self.width}


class SumField(FieldModel):
    def __init__(self, parts: Sequence[FieldModel]):
        if not parts:
            raise ValueError("empty field sum")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise ValueError("summands have different dimensions")
        self.parts = list(parts)
        self.dim = dims.pop()
        self.gamma = min(p.gamma for p in parts)
        self.decay_class = "+".join(p.decay_class for p in parts)

    @property
    def has_magnetic(self):
        return any(p.has_magnetic for p in self.parts)

    def E(self, t, X):
        return sum(p.E(t, X) for p in self.parts)

    def B(self, t, X):
        vals = [p.B(t, X) for p in self.parts]
        vals = [v for v in vals if v is not None]
        return sum(vals) if vals else None

    def div_E(self, t, X):
        vals = [p.div_E(t, X) for p in self.parts]
        return None if any(v is None for v in vals) else sum(vals)

    def curl_B(self, t, X):
        vals = [p.curl_B(t, X) for p in self.parts]
        return None if any(v is None for v in vals) else sum(vals)

    def describe(self):
        return {**super().describe(), "parts": [p.describe() for p in self.parts]}


# --------------------------------------------------------------------------
# combinations C, e and div e


def eval_C(model: FieldModel, t: float, X: np.ndarray) -> np.ndarray:
    """``C(t, x) = t E(t, x) + x × B(t, x)``."""
    X = np.asarray(X, dtype=float)
    return t * model.E(t, X) + cross(X, model.B(t, X), model.dim)


def _check_tau(tau):
    if not abs(tau) < np.pi / 2:
        raise ValueError(f"tau={tau} outside (-pi/2, pi/2)")


def eval_e(model: FieldModel, tau: float, X: np.ndarray, route: str = "direct") -> np.ndarray:
    """Oscillator-picture electric field.

    ``route="direct"``: ``<t>^3 E(t, <t>x) + t <t>^2 x × B(t, <t>x)``;
    ``route="C"``: ``t <t> C(t, <t>x) + <t> E(t, <t>x)``; both at ``t = tan tau``.
    """
    _check_tau(tau)
    X = np.asarray(X, dtype=float)
    t = np.tan(tau)
    s = tm(t)
    Y = s * X
    if route == "direct":
        return s**3 * model.E(t, Y) + t * s**2 * cross(X, model.B(t, Y), model.dim)
    if route == "C":
        return t * s * eval_C(model, t, Y) + s * model.E(t, Y)
    raise ValueError(f"unknown route {route!r}")


_FD4 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_FD4_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])


def eval_div_e(model: FieldModel, tau: float, X: np.ndarray, h: float | None = None,
               analytic: bool = True) -> np.ndarray:
    """``∂·e(tau, x)``; analytic when the model supplies ``div_E`` (and ``curl_B``
    if it has a magnetic field), otherwise fourth-order central differences."""
    _check_tau(tau)
    X = np.asarray(X, dtype=float)
    t = np.tan(tau)
    s = tm(t)
    if analytic:
        dE = model.div_E(t, s * X)
        cB = model.curl_B(t, s * X)
        if dE is not None and cB is not None:
            return s**4 * dE - t * s**3 * np.sum(X * cB, axis=0)
    if h is None:
        h = 1e-3 * max(1.0, float(np.max(np.abs(X)) if X.size else 1.0))
    if h < 1e-12:
        raise FloatingPointError(f"finite-difference step {h} underflows")
    out = np.zeros(X.shape[1:])
    for j in range(model.dim):
        for c, o in zip(_FD4, _FD4_OFFSETS):
            Xs = X.copy()
            Xs[j] = Xs[j] + o * h
            out += c * eval_e(model, tau, Xs)[j]
    return out / h


# --------------------------------------------------------------------------
# radiation fields on the future null directions (d = 3)


@dataclass
class RadiationAsymptote:
    """Null asymptote ``V(s, l)`` on the section ``l = (1, lhat)``.

    ``V``, ``Vdot``, ``Vddot`` take ``s`` of shape ``(...)`` and ``lhat`` of
    shape ``(3, ...)`` and return contravariant 4-vectors of shape ``(4, ...)``.
    """

    V: Callable[[np.ndarray, np.ndarray], np.ndarray]
    Vdot: Callable[[np.ndarray, np.ndarray], np.ndarray]
    Vddot: Callable[[np.ndarray, np.ndarray], np.ndarray]
    eps: float = 1.0
    c: float = 1.0
    label: str = "custom"

    @classmethod
    def dipole_pulse(cls, p: Sequence[float] = (0.0, 0.0, 1.0)) -> "RadiationAsymptote":
        """``V(s, l) = (0, p - (p.lhat) lhat) h(s)`` with ``h(s) = 1/2 - arctan(s)/pi``."""
        p = np.asarray(p, dtype=float)

        def transverse(lhat):
            lhat = np.asarray(lhat, dtype=float)
            pl = np.tensordot(p, lhat, axes=1)
            vec = p.reshape((3,) + (1,) * (lhat.ndim - 1)) - pl * lhat
            return np.concatenate([np.zeros((1,) + vec.shape[1:]), vec])

        def V(s, lhat):
            return transverse(lhat) * (0.5 - np.arctan(s) / np.pi)

        def Vdot(s, lhat):
            return transverse(lhat) * (-1.0 / (np.pi * (1.0 + np.asarray(s) ** 2)))

        def Vddot(s, lhat):
            s = np.asarray(s)
            return transverse(lhat) * (2.0 * s / (np.pi * (1.0 + s**2) ** 2))

        return cls(V, Vdot, Vddot, eps=1.0, c=float(np.linalg.norm(p)) / np.pi,
                   label=f"dipole-pulse p={p.tolist()}")

    @classmethod
    def zero(cls) -> "RadiationAsymptote":
        z = lambda s, lhat: np.zeros((4,) + np.broadcast_shapes(np.shape(s), np.shape(lhat)[1:]))
        return cls(z, z, z, label="zero")


def _extend(fn, degree: int):
    """Homogeneous extension off the section: ``f(s, l) = (l0)^degree f(s / l0, lhat)``."""

    def ext(s, l4):
        l0 = l4[0]
        lvec = l4[1:]
        lhat = lvec / np.linalg.norm(lvec, axis=0)
        return l0**degree * fn(s / l0, lhat)

    return ext


@lru_cache(maxsize=16)
def _sphere_rule(n: int):
    mu, wmu = np.polynomial.legendre.leggauss(n)
    nphi = 2 * n
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    MU, PHI = np.meshgrid(mu, phi, indexing="ij")
    st = np.sqrt(1.0 - MU**2)
    nodes = np.array([st * np.cos(PHI), st * np.sin(PHI), MU]).reshape(3, -1)
    weights = (wmu[:, None] * np.full(nphi, 2.0 * np.pi / nphi)[None, :]).ravel()
    return nodes, weights


def _rotation_to(axis: np.ndarray) -> np.ndarray:
    """Rotation matrix taking the z axis to ``axis`` (unit)."""
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(z, axis)
    c = float(np.dot(z, axis))
    if np.linalg.norm(v) < 1e-14:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def _sphere_integrate(integrand, x4, order: int, tol: float, max_order: int):
    """Integrate ``integrand(s, l4) -> array(..., M)`` over null directions on
    a section, doubling the product rule until two orders agree."""
    x4 = np.asarray(x4, dtype=float)
    xv = x4[1:]
    r = np.linalg.norm(xv)
    rot = _rotation_to(xv / r) if r > 0 else np.eye(3)

    def rule(n):
        nodes, w = _sphere_rule(n)
        lhat = rot @ nodes
        l4 = np.concatenate([np.ones((1, lhat.shape[1])), lhat])
        s = x4[0] - xv @ lhat
        return np.tensordot(integrand(s, l4), w, axes=([-1], [0]))

    n = order
    prev = rule(n)
    while True:
        n *= 2
        cur = rule(n)
        err = float(np.max(np.abs(cur - prev)))
        if err <= tol * max(1.0, float(np.max(np.abs(cur)))):
            return cur
        if n >= max_order:
            raise AccuracyError(f"sphere quadrature not converged at order {n} (change {err:.3g})")
        prev = cur


def radiation_potential(asym: RadiationAsymptote, x4, order: int = 32, tol: float = 1e-10,
                        max_order: int = 1024, section_scale: float = 1.0) -> np.ndarray:
    """``A^a(x) = -(1/2π) ∫ Vdot^a(x·l, l) d²l`` (contravariant components).

    ``section_scale`` evaluates on the section ``l0 = κ`` using the
    homogeneous extension of ``Vdot``; the result is independent of ``κ``.
    """
    kappa = float(section_scale)
    vdot = _extend(asym.Vdot, -2)

    def integrand(s, l4):
        return kappa**2 * vdot(kappa * s, kappa * l4)

    return -_sphere_integrate(integrand, x4, order, tol, max_order) / (2.0 * np.pi)


def radiation_field(asym: RadiationAsymptote, x4, order: int = 32, tol: float = 1e-10,
                    max_order: int = 1024) -> np.ndarray:
    """``F^{ab}(x) = -(1/2π) ∫ [l^a Vddot^b - l^b Vddot^a](x·l, l) d²l`` (upper indices)."""

    def integrand(s, l4):
        vdd = asym.Vddot(s, l4[1:])
        outer = l4[:, None, :] * vdd[None, :, :]
        return outer - np.swapaxes(outer, 0, 1)

    return -_sphere_integrate(integrand, x4, order, tol, max_order) / (2.0 * np.pi)


def fields_from_tensor(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``E^i = F^{i0}``, ``B^i = -½ ε^{ijk} F^{jk}``."""
    E = F[1:, 0].copy()
    S = F[1:, 1:]
    B = -np.array([S[1, 2] - S[2, 1], S[2, 0] - S[0, 2], S[0, 1] - S[1, 0]]) / 2.0
    return E, B


def _lorentz_L(fn_ext, s, l4, h: float = 1e-3) -> np.ndarray:
    """``(L^{ab} F_b)`` for a contravariant 4-vector function with homogeneous
    extension ``fn_ext(s, l4)``; ``L^{ab} = l^a ∂^b - l^b ∂^a`` in the cone
    variable, evaluated by fourth-order central differences along the
    (cone-tangent) generator directions."""
    s = np.asarray(s, dtype=float)
    l4 = np.asarray(l4, dtype=float)
    eta = np.diag(METRIC)
    out = np.zeros((4,) + l4.shape[1:])
    for a in range(4):
        for b in range(4):
            if a == b:
                continue
            # X^c = l^a eta^{bc} - l^b eta^{ac}
            X = np.zeros_like(l4)
            X[b] += l4[a] * eta[b]
            X[a] -= l4[b] * eta[a]
            deriv = np.zeros(l4.shape[1:])
            for c, o in zip(_FD4, _FD4_OFFSETS):
                deriv = deriv + c * fn_ext(s, l4 + o * h * X)[b]
            out[a] += eta[b] * deriv / h
    return out


def w_asymptote(asym: RadiationAsymptote, s, lhat, h: float = 1e-3) -> np.ndarray:
    """``W^a(s, l) = V^a - s Vdot^a - L^{ab} V_b`` on the section ``l = (1, lhat)``."""
    s = np.asarray(s, dtype=float)
    lhat = np.asarray(lhat, dtype=float)
    l4 = np.concatenate([np.ones((1,) + lhat.shape[1:]), lhat])
    return asym.V(s, lhat) - s * asym.Vdot(s, lhat) - _lorentz_L(_extend(asym.V, -1), s, l4, h)


def w_asymptote_dot(asym: RadiationAsymptote, s, lhat, h: float = 1e-3) -> np.ndarray:
    """``∂_s W = -s Vddot - L^{ab} Vdot_b``."""
    s = np.asarray(s, dtype=float)
    lhat = np.asarray(lhat, dtype=float)
    l4 = np.concatenate([np.ones((1,) + lhat.shape[1:]), lhat])
    return -s * asym.Vddot(s, lhat) - _lorentz_L(_extend(asym.Vdot, -2), s, l4, h)


def radiation_C(asym: RadiationAsymptote, x4, order: int = 32, tol: float = 1e-9,
                max_order: int = 1024) -> np.ndarray:
    """``C^a(x) = -(1/2π) ∫ Wdot^a(x·l, l) d²l``."""

    def integrand(s, l4):
        return w_asymptote_dot(asym, s, l4[1:])

    return -_sphere_integrate(integrand, x4, order, tol, max_order) / (2.0 * np.pi)


class RadiationField(FieldModel):
    """Free outgoing radiation field built from a null asymptote (``d = 3``)."""

    dim = 3
    decay_class = "radiation"

    def __init__(self, asym: RadiationAsymptote, order: int = 32, tol: float = 1e-9,
                 max_order: int = 1024, gamma: float = 1.0):
        self.asym, self.order, self.tol, self.max_order = asym, order, tol, max_order
        self.gamma = gamma

    @property
    def has_magnetic(self):
        return True

    def _eval(self, t, X):
        X = np.asarray(X, dtype=float)
        flat = X.reshape(3, -1)
        E = np.empty_like(flat)
        B = np.empty_like(flat)
        for i in range(flat.shape[1]):
            F = radiation_field(self.asym, np.concatenate([[t], flat[:, i]]), self.order,
                                self.tol, self.max_order)
            E[:, i], B[:, i] = fields_from_tensor(F)
        return E.reshape(X.shape), B.reshape(X.shape)

    def E(self, t, X):
        return self._eval(t, X)[0]

    def B(self, t, X):
        return self._eval(t, X)[1]

    def describe(self):
        return {**super().describe(), "asymptote": self.asym.label}


# --------------------------------------------------------------------------
# decay-bound diagnostics


@dataclass
class SampleSpec:
    """Sample of spacetime points.

    ``kind="tau"``: oscillator-picture points with ``|tau| <= tau_max`` (nodes
    uniform in ``asinh(tan tau)``) and ``|x| <= x_max``; Schrödinger points
    are the images ``t = tan tau``, ``x_S = <t> x``.
    ``kind="spacetime"``: Schrödinger points with ``|t| + |x_S| <= radius``;
    oscillator images ``tau = arctan t``, ``x = x_S / <t>``.
    """

    dim: int = 3
    kind: str = "tau"
    n_time: int = 16
    n_space: int = 64
    tau_max: float = 1.5
    x_max: float = 3.0
    radius: float = 20.0
    seed: int = 0

    def points(self):
        if self.n_time < 1 or self.n_space < 1:
            raise ValueError("empty sample")
        rng = np.random.default_rng(self.seed)
        d = self.dim

        def ball(n, rmax):
            direc = rng.normal(size=(d, n))
            direc /= np.linalg.norm(direc, axis=0)
            return direc * rng.uniform(0.0, rmax, size=n)

        if self.kind == "tau":
            umax = np.arcsinh(np.tan(self.tau_max))
            tau = np.arctan(np.sinh(np.linspace(-umax, umax, self.n_time)))
            taus = np.repeat(tau, self.n_space)
            xs = np.concatenate([ball(self.n_space, self.x_max) for _ in tau], axis=1)
            t = np.tan(taus)
            return taus, xs, t, tm(t) * xs
        if self.kind == "spacetime":
            R = self.radius
            t = np.repeat(np.linspace(-R, R, self.n_time), self.n_space)
            xS = np.concatenate([ball(self.n_space, R - abs(tt)) for tt in np.linspace(-R, R, self.n_time)],
                                axis=1)
            return np.arctan(t), xS / tm(t), t, xS
        raise ValueError(f"unknown sample kind {self.kind!r}")


@dataclass
class BoundReport:
    model: dict
    gamma: float
    n_samples: int
    sup_E: float
    sup_C_weighted: float
    sup_e_weighted: float
    sup_div_e_weighted: float
    sup_div_e_strong: float
    growth: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    rows: list = field(default_factory=list, repr=False)

    COLUMNS = ("t", "x_norm", "tau", "y_norm", "E", "C_weighted", "e_weighted",
               "div_e_weighted", "div_e_strong")

    def summary(self) -> dict:
        out = asdict(self)
        out.pop("rows")
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in self.rows:
                w.writerow([repr(float(v)) for v in row])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def check_bounds(model: FieldModel, region: SampleSpec, growth_tol: float = 1.5) -> BoundReport:
    """Fit the decay-bound constants of ``model`` on a finite sample.

    Reports ``sup|E|``, ``sup|C|(1+|t|+|x|)``, ``sup|e| cos tau``,
    ``sup|∂·e| (cos tau)^{2-γ} (cos tau + ||sin tau| - |x||)^γ`` and the
    stronger ``sup|∂·e| (cos tau)^{2-γ}``.  A quantity is flagged when its
    sup over the outer half of the sample exceeds ``growth_tol`` times the
    sup over the inner half.
    """
    if region.n_time < 1 or region.n_space < 1:
        raise ValueError("empty sample")
    if region.dim != model.dim:
        raise ValueError("sample dimension differs from model dimension")
    taus, ys, ts, xs = region.points()
    g = model.gamma
    n = taus.size
    cols = {k: np.zeros(n) for k in ("E", "C", "e", "div", "strong")}
    for tau in np.unique(taus):
        sel = taus == tau
        t = float(np.tan(tau))
        X, Y = xs[:, sel], ys[:, sel]
        cols["E"][sel] = np.linalg.norm(model.E(t, X), axis=0)
        cols["C"][sel] = np.linalg.norm(eval_C(model, t, X), axis=0) * (1 + abs(t) + np.linalg.norm(X, axis=0))
        c = np.cos(tau)
        cols["e"][sel] = np.linalg.norm(eval_e(model, tau, Y), axis=0) * c
        de = np.abs(eval_div_e(model, tau, Y))
        shell = c + np.abs(abs(np.sin(tau)) - np.linalg.norm(Y, axis=0))
        cols["div"][sel] = de * c ** (2 - g) * shell**g
        cols["strong"][sel] = de * c ** (2 - g)
    if region.kind == "tau":
        reach = 1.0 / np.cos(taus)
    else:
        reach = np.abs(ts) + np.linalg.norm(xs, axis=0)
    inner = reach <= np.median(reach)
    growth, flags = {}, {}
    for key in cols:
        lo = float(np.max(cols[key][inner])) if inner.any() else 0.0
        hi = float(np.max(cols[key][~inner])) if (~inner).any() else 0.0
        ratio = hi / lo if lo > 0 else (np.inf if hi > 0 else 1.0)
        growth[key] = ratio
        flags[key] = bool(ratio > growth_tol)
    rows = np.column_stack([ts, np.linalg.norm(xs, axis=0), taus, np.linalg.norm(ys, axis=0),
                            cols["E"], cols["C"], cols["e"], cols["div"], cols["strong"]]).tolist()
    return BoundReport(model=model.describe(), gamma=g, n_samples=int(n),
                       sup_E=float(cols["E"].max()), sup_C_weighted=float(cols["C"].max()),
                       sup_e_weighted=float(cols["e"].max()), sup_div_e_weighted=float(cols["div"].max()),
                       sup_div_e_strong=float(cols["strong"].max()), growth=growth, flags=flags, rows=rows)
