"""Uniform periodic lattice, lattice states and the spectral operator toolkit.

Coordinates are stored component-first: a vector field on a ``d``-dimensional
lattice is an array of shape ``(d, N, ..., N)``.  Scalar fields have shape
``(N, ..., N)``.  All norms and inner products use the Riemann-sum measure
``dx**d``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "WaveFunction",
    "SpatialProfile",
    "inner_product",
    "norm",
    "apply_position_op",
    "apply_fourier_multiplier",
    "characteristic_function",
    "gradient",
    "divergence",
    "momentum_component",
    "resample_scaled",
    "continuum_fourier",
    "boundary_mass",
]


@dataclass(frozen=True)
class GridSpec:
    """Periodic lattice ``[-L, L)^d`` with ``N`` points per axis."""

    dim: int
    extent: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = int(self.points)
        if n < 8 or n & (n - 1):
            raise ValueError(f"points must be a power of two >= 8, got {self.points}")
        if not np.isfinite(self.extent) or self.extent <= 0:
            raise ValueError(f"extent must be positive and finite, got {self.extent}")

    @property
    def dx(self) -> float:
        return 2.0 * self.extent / self.points

    @property
    def dk(self) -> float:
        return np.pi / self.extent

    @property
    def k_nyquist(self) -> float:
        return np.pi / self.dx

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.extent + self.dx * np.arange(self.points)

    @cached_property
    def k_axis(self) -> np.ndarray:
        return 2.0 * np.pi * sfft.fftfreq(self.points, d=self.dx)

    @cached_property
    def coords(self) -> np.ndarray:
        """Lattice coordinates, shape ``(d, N, ..., N)``."""
        return np.array(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def momenta(self) -> np.ndarray:
        """Momentum lattice in FFT layout, shape ``(d, N, ..., N)``."""
        return np.array(np.meshgrid(*([self.k_axis] * self.dim), indexing="ij"))

    @cached_property
    def r2(self) -> np.ndarray:
        return np.sum(self.coords**2, axis=0)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.momenta**2, axis=0)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.dim, self.extent, self.points * factor)


@dataclass
class WaveFunction:
    """Complex amplitudes on a :class:`GridSpec`."""

    grid: GridSpec
    psi: np.ndarray

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.psi.shape != self.grid.shape:
            raise ValueError(
                f"amplitude shape {self.psi.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray],
                      normalize: bool = False) -> "WaveFunction":
        wf = cls(grid, fn(grid.coords))
        return wf.normalized() if normalize else wf

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2) * self.grid.cell_volume))

    def normalized(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.psi / self.norm())

    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.psi.copy())

    def _check(self, other: "WaveFunction"):
        if other.grid != self.grid:
            raise ValueError("wave functions live on different grids")

    def __add__(self, other: "WaveFunction") -> "WaveFunction":
        self._check(other)
        return WaveFunction(self.grid, self.psi + other.psi)

    def __sub__(self, other: "WaveFunction") -> "WaveFunction":
        self._check(other)
        return WaveFunction(self.grid, self.psi - other.psi)

    def __mul__(self, scalar: complex) -> "WaveFunction":
        return WaveFunction(self.grid, scalar * self.psi)

    __rmul__ = __mul__

    def __neg__(self) -> "WaveFunction":
        return WaveFunction(self.grid, -self.psi)


@dataclass(frozen=True)
class SpatialProfile:
    """A scalar or ``dim``-vector function of position.

    ``fn`` takes coordinates of shape ``(d, ...)`` and returns either an array
    of shape ``(...)`` (scalar) or ``(d, ...)`` (vector).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    vector: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.fn(X)

    def on(self, grid: GridSpec) -> np.ndarray:
        vals = np.asarray(self.fn(grid.coords))
        expected = ((grid.dim,) if self.vector else ()) + grid.shape
        vals = np.broadcast_to(vals, expected)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("profile is not finite on the lattice")
        return vals

    @classmethod
    def constant(cls, value: complex) -> "SpatialProfile":
        return cls(lambda X: np.full(X.shape[1:], value, dtype=complex if np.iscomplexobj(value) else float),
                   meta={"kind": "constant", "value": value})


def _fft(a: np.ndarray, axes=None) -> np.ndarray:
    return sfft.fftn(a, axes=axes)


def _ifft(a: np.ndarray, axes=None) -> np.ndarray:
    return sfft.ifftn(a, axes=axes)


def inner_product(phi: WaveFunction, psi: WaveFunction) -> complex:
    """Riemann-sum inner product, conjugate-linear in ``phi``."""
    if phi.grid != psi.grid:
        raise ValueError("inner product of states on different grids")
    return complex(np.vdot(phi.psi, psi.psi) * phi.grid.cell_volume)


def norm(psi: WaveFunction) -> float:
    return psi.norm()


def apply_position_op(psi: WaveFunction, f: SpatialProfile | np.ndarray) -> WaveFunction:
    """Multiply pointwise by a scalar profile."""
    vals = f.on(psi.grid) if isinstance(f, SpatialProfile) else np.asarray(f)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("multiplication profile is not finite on the lattice")
    return WaveFunction(psi.grid, vals * psi.psi)


def apply_fourier_multiplier(psi: WaveFunction,
                             g: Callable[[np.ndarray], np.ndarray] | np.ndarray) -> WaveFunction:
    """Apply ``g(p)`` in momentum space; ``g`` receives momenta of shape ``(d, ...)``."""
    mult = g(psi.grid.momenta) if callable(g) else np.asarray(g)
    if not np.all(np.isfinite(mult)):
        raise FloatingPointError("Fourier multiplier is not finite on the momentum lattice")
    return WaveFunction(psi.grid, _ifft(mult * _fft(psi.psi)))


def momentum_component(grid: GridSpec, arr: np.ndarray, j: int) -> np.ndarray:
    """``p_j`` applied to a lattice array (spectral derivative, ``p = -i d/dx``)."""
    return _ifft(grid.momenta[j] * _fft(arr))


def gradient(grid: GridSpec, arr: np.ndarray) -> np.ndarray:
    """Spectral gradient of a scalar lattice field."""
    spec = _fft(arr)
    out = np.array([_ifft(1j * grid.momenta[j] * spec) for j in range(grid.dim)])
    return out.real if np.isrealobj(arr) else out


def divergence(grid: GridSpec, vec: np.ndarray) -> np.ndarray:
    """Spectral divergence of a vector lattice field of shape ``(d, ...)``."""
    out = sum(_ifft(1j * grid.momenta[j] * _fft(vec[j])) for j in range(grid.dim))
    return out.real if np.isrealobj(vec) else out


def characteristic_function(psi: WaveFunction, q) -> complex:
    """``<psi, exp(i q.x) psi> / ||psi||^2``."""
    grid = psi.grid
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.shape != (grid.dim,):
        raise ValueError(f"q must have {grid.dim} components")
    if np.any(np.abs(q) >= grid.k_nyquist):
        raise ValueError("|q| exceeds the lattice Nyquist bound")
    snapped = np.round(q / grid.dk) * grid.dk
    q = np.where(np.abs(snapped - q) <= 1e-9, snapped, q)
    phase = np.exp(1j * np.tensordot(q, grid.coords, axes=1))
    dens = psi.density()
    return complex(np.sum(dens * phase) / np.sum(dens))


def boundary_mass(psi: WaveFunction, width: int = 2) -> float:
    """Probability mass within ``width`` lattice points of the box faces."""
    grid = psi.grid
    idx = np.arange(grid.points)
    edge = (idx < width) | (idx >= grid.points - width)
    mask = np.zeros(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        shp = [1] * grid.dim
        shp[ax] = grid.points
        mask |= edge.reshape(shp)
    return float(np.sum(psi.density()[mask]) * grid.cell_volume)


@lru_cache(maxsize=64)
def _interp_matrix(points: int, extent: float, scale: float) -> np.ndarray:
    """Trigonometric interpolation from the lattice to ``scale * axis``.

    Targets outside the fundamental box are mapped to zero instead of a
    periodic image.  The Nyquist mode is interpolated as a cosine.
    """
    dx = 2.0 * extent / points
    x = -extent + dx * np.arange(points)
    y = scale * x
    k = 2.0 * np.pi * sfft.fftfreq(points, d=dx)
    # coefficient extraction: c_m = (1/N) sum_j f_j exp(-i k_m x_j)
    to_coef = np.exp(-1j * np.outer(k, x)) / points
    basis = np.exp(1j * np.outer(y, k))
    nyq = points // 2
    basis[:, nyq] = np.cos(k[nyq] * y)
    mat = basis @ to_coef
    mat[(y < -extent) | (y >= extent)] = 0.0
    return mat


def resample_scaled(grid: GridSpec, arr: np.ndarray, scale: float) -> np.ndarray:
    """Evaluate the band-limited interpolant of ``arr`` at ``scale * x``."""
    if scale == 1.0:
        return np.array(arr, dtype=complex)
    mat = _interp_matrix(grid.points, float(grid.extent), float(scale))
    out = np.asarray(arr, dtype=complex)
    for ax in range(grid.dim):
        out = np.moveaxis(np.tensordot(mat, out, axes=(1, ax)), 0, ax)
    return out


@lru_cache(maxsize=16)
def _dft_matrix(points: int, extent: float) -> np.ndarray:
    dx = 2.0 * extent / points
    x = -extent + dx * np.arange(points)
    return np.exp(-1j * np.outer(x, x)) * dx / np.sqrt(2.0 * np.pi)


def continuum_fourier(psi: WaveFunction) -> WaveFunction:
    """Continuum transform ``(2 pi)^{-d/2} int exp(-i p.x) psi(x) dx`` sampled at
    momenta equal to the lattice positions (direct summation, one axis at a time)."""
    grid = psi.grid
    mat = _dft_matrix(grid.points, float(grid.extent))
    out = psi.psi
    for ax in range(grid.dim):
        out = np.moveaxis(np.tensordot(mat, out, axes=(1, ax)), 0, ax)
    return WaveFunction(grid, out)
