"""Potentials in both pictures, the a-gauge construction and gauge changes.

Oscillator-picture potentials ``(v, a)`` live on ``|tau| < pi/2``; the
Schrödinger-picture pair ``(V, A)`` is related by

    A(t, x) = <t>^{-1} a(tau, x/<t>),
    V(t, x) = <t>^{-2} [v(tau, x/<t>) + <t>^{-1} t x.a(tau, x/<t>)],

with ``tau = arctan t``.  The inverse reads ``a(tau, y) = <t> A(t, <t> y)``
and ``v(tau, y) = <t>^2 V(t, <t> y) - t <t> y.A(t, <t> y)``.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Optional
import warnings

import numpy as np
from scipy import integrate

from .errors import AccuracyError
from .fields import FieldModel, eval_div_e, eval_e
from .lattice import GridSpec, SpatialProfile
from .picture import tm

__all__ = [
    "OscPotentials",
    "FunctionalOscPotentials",
    "AGauge",
    "SchrPotentials",
    "FunctionalSchrPotentials",
    "SchrFromOsc",
    "OscFromSchr",
    "PotentialSlice",
    "GaugeFunction",
    "build_a_gauge",
    "osc_to_schr",
    "schr_to_osc",
    "gauge_transform",
    "check_xA",
    "fd_derivative",
]

_FD4 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_FD4_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])


def fd_derivative(fn: Callable[[float], np.ndarray], x0: float, h: float = 1e-3) -> np.ndarray:
    """Fourth-order central difference of a scalar-argument function."""
    return sum(c * np.asarray(fn(x0 + o * h)) for c, o in zip(_FD4, _FD4_OFFSETS)) / h


def _fd_gradient(fn, X: np.ndarray, h: float = 1e-4) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    out = []
    for j in range(X.shape[0]):
        def shifted(e, j=j):
            Xs = X.copy()
            Xs[j] = Xs[j] + e
            return fn(Xs)
        out.append(fd_derivative(shifted, 0.0, h))
    return np.array(out)


# --------------------------------------------------------------------------
# oscillator picture


class OscPotentials:
    """Oscillator-picture pair ``(v, a)``; ``tau_max`` bounds the validity interval."""

    dim: int
    tau_max: float = np.pi / 2

    def v(self, tau: float, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def a(self, tau: float, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def div_a(self, tau: float, X: np.ndarray) -> np.ndarray:
        return sum(_fd_gradient(lambda Y, j=j: self.a(tau, Y)[j], X)[j] for j in range(self.dim))

    def _check(self, tau):
        if not abs(tau) < self.tau_max:
            raise ValueError(f"tau={tau} outside the validity interval |tau| < {self.tau_max}")

    # lattice slices; subclasses may cache
    def a_slice(self, grid: GridSpec, tau: float) -> np.ndarray:
        return np.asarray(self.a(tau, grid.coords), dtype=float)

    def v_slice(self, grid: GridSpec, tau: float) -> np.ndarray:
        return np.asarray(self.v(tau, grid.coords), dtype=float)

    @property
    def vanishing_v(self) -> bool:
        return False

    @property
    def vanishing_a(self) -> bool:
        return False

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "dim": self.dim}


class FunctionalOscPotentials(OscPotentials):
    """Potentials given by plain callables; ``None`` means identically zero."""

    def __init__(self, dim: int, v: Optional[Callable] = None, a: Optional[Callable] = None,
                 div_a: Optional[Callable] = None, tau_max: float = np.pi / 2):
        self.dim, self._v, self._a, self._div_a, self.tau_max = dim, v, a, div_a, tau_max

    def v(self, tau, X):
        self._check(tau)
        X = np.asarray(X, dtype=float)
        return np.zeros(X.shape[1:]) if self._v is None else np.asarray(self._v(tau, X), dtype=float)

    def a(self, tau, X):
        self._check(tau)
        X = np.asarray(X, dtype=float)
        return np.zeros_like(X) if self._a is None else np.asarray(self._a(tau, X), dtype=float)

    def div_a(self, tau, X):
        if self._a is None:
            return np.zeros(np.shape(X)[1:])
        if self._div_a is not None:
            return self._div_a(tau, X)
        return super().div_a(tau, X)

    @property
    def vanishing_v(self):
        return self._v is None

    @property
    def vanishing_a(self):
        return self._a is None

    @classmethod
    def zero(cls, dim: int) -> "FunctionalOscPotentials":
        return cls(dim)


class _SliceCache:
    """LRU store of lattice slices keyed by ``(grid, tau)`` with a byte cap."""

    def __init__(self, max_bytes: int = 256 * 2**20):
        self.max_bytes = max_bytes
        self._store: OrderedDict = OrderedDict()
        self._bytes = 0

    def get(self, key):
        val = self._store.get(key)
        if val is not None:
            self._store.move_to_end(key)
        return val

    def put(self, key, arr):
        if key in self._store:
            return
        arr.setflags(write=False)
        self._store[key] = arr
        self._bytes += arr.nbytes
        while self._bytes > self.max_bytes and len(self._store) > 1:
            _, old = self._store.popitem(last=False)
            self._bytes -= old.nbytes

    def nearest(self, grid, tau):
        keys = [k for k in self._store if k[0] == grid]
        if not keys:
            return None
        return min(keys, key=lambda k: abs(k[1] - tau))


class AGauge(OscPotentials):
    """``v = 0``, ``a(tau, x) = a0(x) - int_0^tau e(rho, x) d rho``.

    Built by :func:`build_a_gauge`.  When the model factorizes as
    ``e = s(tau) g(x)`` the time integral is a scalar adaptive quadrature;
    otherwise a vector-valued adaptive quadrature runs over the evaluation
    points (incrementally from the nearest cached lattice slice).
    """

    def __init__(self, model: FieldModel, a0: SpatialProfile | None = None,
                 a0_div: Callable | None = None, tol: float = 1e-10,
                 tau_max: float = np.pi / 2, cache_bytes: int = 256 * 2**20):
        self.model = model
        self.dim = model.dim
        self.a0 = a0
        self.a0_div = a0_div
        self.tol = tol
        self.tau_max = tau_max
        self._fact = model.osc_factorization()
        self._cache = _SliceCache(cache_bytes)
        self._scalar_memo: dict = {}

    @property
    def vanishing_v(self):
        return True

    # time integrals -------------------------------------------------------

    def _quad_scalar(self, s_fn, lo, hi):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(s_fn, lo, hi, epsabs=self.tol, epsrel=1e-13, limit=200)
            except integrate.IntegrationWarning as exc:
                raise AccuracyError(f"a-gauge quadrature failed at tau={hi}: {exc}") from exc
        if not np.isfinite(val) or err > 10 * self.tol * max(1.0, abs(val)):
            raise AccuracyError(f"a-gauge quadrature failed at tau={hi} (error {err:.3g})")
        return val

    def sec_integral(self, tau: float) -> float:
        """``int_0^tau s(rho) d rho`` for separable models."""
        key = float(tau)
        if key not in self._scalar_memo:
            self._scalar_memo[key] = self._quad_scalar(self._fact[0], 0.0, key) if key != 0 else 0.0
        return self._scalar_memo[key]

    def _quad_points(self, X, lo, hi):
        shape = X.shape

        def integrand(rho):
            return eval_e(self.model, rho, X).ravel()

        val, err = integrate.quad_vec(integrand, lo, hi, epsabs=self.tol, epsrel=1e-12, limit=400)
        if not np.all(np.isfinite(val)) or err > 10 * self.tol * max(1.0, float(np.max(np.abs(val)))):
            raise AccuracyError(f"a-gauge quadrature failed at tau={hi} (error {err:.3g})")
        return val.reshape(shape)

    def _a0(self, X):
        if self.a0 is None:
            return np.zeros_like(X)
        return np.broadcast_to(np.asarray(self.a0(X), dtype=float), X.shape).copy()

    # evaluators -------------------------------------------------------------

    def v(self, tau, X):
        self._check(tau)
        return np.zeros(np.shape(X)[1:])

    def a(self, tau, X):
        self._check(tau)
        X = np.asarray(X, dtype=float)
        base = self._a0(X)
        if tau == 0:
            return base
        if self._fact is not None:
            return base - self.sec_integral(tau) * np.asarray(self._fact[1](X), dtype=float)
        return base - self._quad_points(X, 0.0, float(tau))

    def div_a(self, tau, X):
        self._check(tau)
        X = np.asarray(X, dtype=float)
        if self.a0 is None:
            base = np.zeros(X.shape[1:])
        elif self.a0_div is not None:
            base = np.asarray(self.a0_div(X), dtype=float)
        else:
            base = sum(_fd_gradient(lambda Y, j=j: self._a0(Y)[j], X)[j] for j in range(self.dim))
        if tau == 0:
            return base
        flat = X.reshape(self.dim, -1)
        val, err = integrate.quad_vec(lambda r: eval_div_e(self.model, r, flat), 0.0, float(tau),
                                      epsabs=self.tol, epsrel=1e-12, limit=400)
        return base - val.reshape(X.shape[1:])

    def a_slice(self, grid: GridSpec, tau: float) -> np.ndarray:
        self._check(tau)
        key = (grid, float(tau))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        X = grid.coords
        if self._fact is not None or tau == 0:
            arr = self.a(tau, X)
        else:
            near = self._cache.nearest(grid, tau)
            if near is not None and abs(near[1] - tau) < abs(tau):
                arr = self._cache.get(near) - self._quad_points(X, near[1], float(tau))
            else:
                arr = self.a(tau, X)
        self._cache.put(key, arr)
        return arr

    def v_slice(self, grid, tau):
        self._check(tau)
        return np.zeros(grid.shape)

    def describe(self):
        return {"kind": "a-gauge", "dim": self.dim, "model": self.model.describe(),
                "a0": None if self.a0 is None else dict(self.a0.meta)}


def build_a_gauge(model: FieldModel, a0: SpatialProfile | None = None, **kwargs) -> AGauge:
    """a-gauge potentials of ``model`` with ``a(0, .) = a0`` (default zero)."""
    if a0 is not None:
        vals = np.asarray(a0(np.zeros((model.dim, 1))), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("a0 is not finite")
    return AGauge(model, a0, **kwargs)


# --------------------------------------------------------------------------
# Schrödinger picture


class SchrPotentials:
    dim: int

    def V(self, t: float, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def A(self, t: float, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def A_slice(self, grid: GridSpec, t: float) -> np.ndarray:
        return np.asarray(self.A(t, grid.coords), dtype=float)

    def V_slice(self, grid: GridSpec, t: float) -> np.ndarray:
        return np.asarray(self.V(t, grid.coords), dtype=float)

    @property
    def vanishing_A(self) -> bool:
        return False

    @property
    def vanishing_V(self) -> bool:
        return False


class FunctionalSchrPotentials(SchrPotentials):
    def __init__(self, dim: int, V: Optional[Callable] = None, A: Optional[Callable] = None):
        self.dim, self._V, self._A = dim, V, A

    def V(self, t, X):
        X = np.asarray(X, dtype=float)
        return np.zeros(X.shape[1:]) if self._V is None else np.asarray(self._V(t, X), dtype=float)

    def A(self, t, X):
        X = np.asarray(X, dtype=float)
        return np.zeros_like(X) if self._A is None else np.asarray(self._A(t, X), dtype=float)

    @property
    def vanishing_A(self):
        return self._A is None

    @property
    def vanishing_V(self):
        return self._V is None


class SchrFromOsc(SchrPotentials):
    """Schrödinger-picture potentials induced by oscillator-picture ones."""

    def __init__(self, osc: OscPotentials):
        self.osc = osc
        self.dim = osc.dim

    def A(self, t, X):
        s = float(tm(t))
        return self.osc.a(float(np.arctan(t)), np.asarray(X, dtype=float) / s) / s

    def V(self, t, X):
        X = np.asarray(X, dtype=float)
        s = float(tm(t))
        tau = float(np.arctan(t))
        Y = X / s
        out = self.osc.v(tau, Y)
        if t != 0:
            out = out + (t / s) * np.sum(X * self.osc.a(tau, Y), axis=0)
        return out / s**2

    def A_slice(self, grid, t):
        if self.osc.vanishing_a:
            return np.zeros((grid.dim,) + grid.shape)
        return self.A(t, grid.coords)

    @property
    def vanishing_A(self):
        return self.osc.vanishing_a

    @property
    def vanishing_V(self):
        return self.osc.vanishing_a and self.osc.vanishing_v


class OscFromSchr(OscPotentials):
    """Oscillator-picture potentials induced by Schrödinger-picture ones."""

    def __init__(self, schr: SchrPotentials, tau_max: float = np.pi / 2):
        self.schr = schr
        self.dim = schr.dim
        self.tau_max = tau_max

    def a(self, tau, X):
        self._check(tau)
        t = float(np.tan(tau))
        s = float(tm(t))
        return s * self.schr.A(t, s * np.asarray(X, dtype=float))

    def v(self, tau, X):
        self._check(tau)
        X = np.asarray(X, dtype=float)
        t = float(np.tan(tau))
        s = float(tm(t))
        out = s**2 * self.schr.V(t, s * X)
        if t != 0:
            out = out - t * s * np.sum(X * self.schr.A(t, s * X), axis=0)
        return out

    @property
    def vanishing_a(self):
        return self.schr.vanishing_A

    @property
    def vanishing_v(self):
        return self.schr.vanishing_A and self.schr.vanishing_V


@dataclass(frozen=True)
class PotentialSlice:
    """Potentials of one picture frozen at a single time."""

    picture: str
    time: float
    scalar: Callable[[np.ndarray], np.ndarray]
    vector: Callable[[np.ndarray], np.ndarray]


def osc_to_schr(potentials: OscPotentials, t: float) -> PotentialSlice:
    """``(V(t, .), A(t, .))`` from oscillator-picture potentials."""
    sp = SchrFromOsc(potentials)
    return PotentialSlice("schrodinger", float(t), lambda X: sp.V(t, X), lambda X: sp.A(t, X))


def schr_to_osc(potentials: SchrPotentials, tau: float) -> PotentialSlice:
    """``(v(tau, .), a(tau, .))`` from Schrödinger-picture potentials."""
    if not abs(tau) < np.pi / 2:
        raise ValueError(f"tau={tau} outside (-pi/2, pi/2)")
    op = OscFromSchr(potentials)
    return PotentialSlice("oscillator", float(tau), lambda X: op.v(tau, X), lambda X: op.a(tau, X))


# --------------------------------------------------------------------------
# gauge functions


class GaugeFunction:
    """Gauge function ``Lambda(t, x)``, equivalently ``lambda(tau, x) = Lambda(tan tau, <t> x)``.

    Derivatives may be supplied analytically; otherwise fourth-order
    central differences are used.  When only ``Lambda`` is given the
    oscillator-picture derivatives follow from the chain rule
    ``grad lambda = <t> grad Lambda`` and
    ``d_tau lambda = <t>^2 d_t Lambda + t <t> x.grad Lambda``.
    """

    def __init__(self, dim: int, Lam: Callable | None = None, grad_Lam: Callable | None = None,
                 dt_Lam: Callable | None = None, lam: Callable | None = None,
                 grad_lam: Callable | None = None, dtau_lam: Callable | None = None,
                 fd_step: float = 1e-4):
        if Lam is None and lam is None:
            raise ValueError("need Lambda or lambda")
        self.dim = dim
        self._Lam, self._gLam, self._tLam = Lam, grad_Lam, dt_Lam
        self._lam, self._glam, self._tlam = lam, grad_lam, dtau_lam
        self.h = fd_step

    # Schrödinger side
    def Lam(self, t, X):
        X = np.asarray(X, dtype=float)
        if self._Lam is not None:
            return np.asarray(self._Lam(t, X), dtype=float) * np.ones(X.shape[1:])
        s = float(tm(t))
        return self.lam(float(np.arctan(t)), X / s)

    def grad_Lam(self, t, X):
        if self._gLam is not None:
            return np.broadcast_to(np.asarray(self._gLam(t, X), dtype=float), np.shape(X)).copy()
        return _fd_gradient(lambda Y: self.Lam(t, Y), X, self.h)

    def dt_Lam(self, t, X):
        if self._tLam is not None:
            return np.asarray(self._tLam(t, X), dtype=float) * np.ones(np.shape(X)[1:])
        return fd_derivative(lambda tt: self.Lam(tt, X), t, self.h)

    # oscillator side
    def lam(self, tau, X):
        X = np.asarray(X, dtype=float)
        if self._lam is not None:
            return np.asarray(self._lam(tau, X), dtype=float) * np.ones(X.shape[1:])
        t = float(np.tan(tau))
        return self.Lam(t, float(tm(t)) * X)

    def grad_lam(self, tau, X):
        X = np.asarray(X, dtype=float)
        if self._glam is not None:
            return np.broadcast_to(np.asarray(self._glam(tau, X), dtype=float), X.shape).copy()
        if self._lam is None and self._gLam is not None:
            t = float(np.tan(tau))
            s = float(tm(t))
            return s * self.grad_Lam(t, s * X)
        return _fd_gradient(lambda Y: self.lam(tau, Y), X, self.h)

    def dtau_lam(self, tau, X):
        X = np.asarray(X, dtype=float)
        if self._tlam is not None:
            return np.asarray(self._tlam(tau, X), dtype=float) * np.ones(X.shape[1:])
        if self._lam is None and self._gLam is not None and self._tLam is not None:
            t = float(np.tan(tau))
            s = float(tm(t))
            return s**2 * self.dt_Lam(t, s * X) + t * s * np.sum(X * self.grad_Lam(t, s * X), axis=0)
        return fd_derivative(lambda r: self.lam(r, X), tau, self.h)

    def lam_slice(self, grid: GridSpec, tau: float) -> np.ndarray:
        return self.lam(tau, grid.coords)

    def Lam_slice(self, grid: GridSpec, t: float) -> np.ndarray:
        return self.Lam(t, grid.coords)


class _GaugedOsc(OscPotentials):
    def __init__(self, base: OscPotentials, g: GaugeFunction):
        self.base, self.g = base, g
        self.dim, self.tau_max = base.dim, base.tau_max

    def a(self, tau, X):
        return self.base.a(tau, X) - self.g.grad_lam(tau, X)

    def v(self, tau, X):
        return self.base.v(tau, X) + self.g.dtau_lam(tau, X)


class _GaugedSchr(SchrPotentials):
    def __init__(self, base: SchrPotentials, g: GaugeFunction):
        self.base, self.g = base, g
        self.dim = base.dim

    def A(self, t, X):
        return self.base.A(t, X) - self.g.grad_Lam(t, X)

    def V(self, t, X):
        return self.base.V(t, X) + self.g.dt_Lam(t, X)


def gauge_transform(potentials, gauge: GaugeFunction):
    """``A - grad Lambda, V + d_t Lambda`` (or ``a - grad lambda, v + d_tau lambda``)."""
    if not isinstance(potentials, (OscPotentials, SchrPotentials)):
        raise TypeError(f"cannot gauge-transform {type(potentials).__name__}")
    if gauge.dim != potentials.dim:
        raise ValueError("gauge function and potentials differ in dimension")
    if isinstance(potentials, OscPotentials):
        return _GaugedOsc(potentials, gauge)
    return _GaugedSchr(potentials, gauge)


# --------------------------------------------------------------------------
# the x-hat identity


def check_xA(potentials: SchrPotentials, T: np.ndarray, X: np.ndarray, h: float = 1e-3) -> float:
    """``max |(t + 1/t) V(t, x) - x.A(t, x)|`` over sample points.

    ``T`` has shape ``(n,)`` and ``X`` shape ``(d, n)``.  At ``t = 0`` the
    regular limit is used: for potentials induced from the oscillator picture
    the combination equals ``v(tau, x/<t>)/t`` exactly, whose limit is
    ``d_tau v(0, x)``; otherwise a symmetric limit ``t -> 0`` is taken.
    """
    T = np.asarray(T, dtype=float)
    X = np.asarray(X, dtype=float)
    if T.size == 0:
        return 0.0
    worst = 0.0
    for i, t in enumerate(T):
        x = X[:, i:i + 1]
        if t != 0:
            d = (t + 1.0 / t) * potentials.V(t, x) - np.sum(x * potentials.A(t, x), axis=0)
        elif isinstance(potentials, SchrFromOsc):
            if potentials.osc.vanishing_v:
                d = np.zeros(1)
            else:
                d = fd_derivative(lambda r: potentials.osc.v(r, x), 0.0, h)
        else:
            f = lambda tt: (tt + 1.0 / tt) * potentials.V(tt, x) - np.sum(x * potentials.A(tt, x), axis=0)
            d = 0.5 * (f(h) + f(-h))
        worst = max(worst, float(np.max(np.abs(d))))
    return worst
