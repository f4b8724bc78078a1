"""The Niederer picture change and exact free propagators in both pictures.

The oscillator picture uses compactified time ``tau = arctan t`` and the
scaling ``<t> = sqrt(t^2 + 1)``.  Free dynamics there is generated by
``h0 = (p^2 + x^2)/2``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .lattice import GridSpec, WaveFunction, resample_scaled

__all__ = [
    "tm",
    "tm_prime",
    "tau_of_t",
    "t_of_tau",
    "apply_N",
    "apply_N_star",
    "free_schrodinger_evolve",
    "free_oscillator_evolve",
    "parity",
    "stationary_phase_check",
    "StationaryPhaseReport",
]

_MIN_POINTS = 16


def tm(t):
    """``<t> = sqrt(t^2 + 1)``."""
    return np.hypot(t, 1.0)


def tm_prime(t):
    return t / np.hypot(t, 1.0)


def tau_of_t(t):
    return np.arctan(t)


def t_of_tau(tau):
    return np.tan(tau)


def _support_radius(psi: WaveFunction, tail: float = 1e-10) -> float:
    dens = psi.density().ravel()
    r = np.sqrt(psi.grid.r2).ravel()
    order = np.argsort(r)
    cum = np.cumsum(dens[order])
    if cum[-1] == 0:
        return 0.0
    k = np.searchsorted(cum, (1.0 - tail) * cum[-1])
    return float(r[order][min(k, r.size - 1)])


def apply_N(t: float, chi: WaveFunction) -> WaveFunction:
    """``[N(t) chi](x) = <t>^{-d/2} exp(i t |x|^2 / (2 <t>^2)) chi(x / <t>)``."""
    if t == 0:
        return chi.copy()
    grid = chi.grid
    s = float(tm(t))
    radius = _support_radius(chi)
    if radius * s > grid.extent:
        warnings.warn(f"N({t}) expands the state beyond the box (radius {radius * s:.3g} > L)",
                      RuntimeWarning, stacklevel=2)
    body = resample_scaled(grid, chi.psi, 1.0 / s)
    phase = np.exp(0.5j * t * grid.r2 / s**2)
    return WaveFunction(grid, s ** (-grid.dim / 2) * phase * body)


def apply_N_star(t: float, psi: WaveFunction) -> WaveFunction:
    """``[N(t)* psi](y) = <t>^{d/2} exp(-i t |y|^2 / 2) psi(<t> y)``."""
    if t == 0:
        return psi.copy()
    grid = psi.grid
    s = float(tm(t))
    radius = _support_radius(psi)
    if 2 * radius / s < _MIN_POINTS * grid.dx:
        warnings.warn(f"N({t})* leaves fewer than {_MIN_POINTS} lattice points across the state",
                      RuntimeWarning, stacklevel=2)
    body = resample_scaled(grid, psi.psi, s)
    phase = np.exp(-0.5j * t * grid.r2)
    return WaveFunction(grid, s ** (grid.dim / 2) * phase * body)


def free_schrodinger_evolve(psi: WaveFunction, t: float, s: float) -> WaveFunction:
    """``U0(t, s) = exp(-i (t - s) p^2 / 2)``."""
    if t == s:
        return psi.copy()
    grid = psi.grid
    mult = np.exp(-0.5j * (t - s) * grid.k2)
    return WaveFunction(grid, sfft.ifftn(mult * sfft.fftn(psi.psi)))


def _shear_step(grid: GridSpec, arr: np.ndarray, dtau: float) -> np.ndarray:
    # exp(-i dtau h0) = C K C with C = exp(-i tan(dtau/2) x^2/2), K = exp(-i sin(dtau) p^2/2)
    chirp = np.exp(-0.5j * np.tan(0.5 * dtau) * grid.r2)
    kin = np.exp(-0.5j * np.sin(dtau) * grid.k2)
    out = chirp * arr
    out = sfft.ifftn(kin * sfft.fftn(out))
    return chirp * out


def oscillator_shear(grid: GridSpec, arr: np.ndarray, dtau: float,
                     max_step: float = np.pi / 4) -> np.ndarray:
    """``exp(-i dtau h0)`` on a lattice array through the three-shear factorization."""
    if dtau == 0:
        return np.array(arr, dtype=complex)
    n = max(1, int(np.ceil(abs(dtau) / max_step - 1e-12)))
    out = np.asarray(arr, dtype=complex)
    for _ in range(n):
        out = _shear_step(grid, out, dtau / n)
    return out


@lru_cache(maxsize=8)
def _h0_eigensystem(points: int, extent: float):
    grid = GridSpec(1, extent, points)
    k = grid.k_axis
    eye = np.eye(points)
    lap = sfft.ifft(k[:, None] ** 2 * sfft.fft(eye, axis=0), axis=0)
    h = 0.5 * lap.real + np.diag(0.5 * grid.axis**2)
    h = 0.5 * (h + h.T)
    return sla.eigh(h)


def _oscillator_eigen(grid: GridSpec, arr: np.ndarray, dtau: float) -> np.ndarray:
    evals, evecs = _h0_eigensystem(grid.points, float(grid.extent))
    prop = (evecs * np.exp(-1j * dtau * evals)) @ evecs.T
    out = np.asarray(arr, dtype=complex)
    for ax in range(grid.dim):
        out = np.moveaxis(np.tensordot(prop, out, axes=(1, ax)), 0, ax)
    return out


def free_oscillator_evolve(chi: WaveFunction, tau: float, sigma: float,
                           method: str = "shear") -> WaveFunction:
    """``u0(tau, sigma) = exp(-i (tau - sigma) h0)``.

    ``method="shear"`` factorizes each substep into two position chirps and
    one free flight, which is exact for the continuum operator.
    ``method="eigen"`` diagonalizes the lattice ``h0`` along each axis and is
    kept as an independent oracle.
    """
    dtau = tau - sigma
    if dtau == 0:
        return chi.copy()
    if method == "shear":
        return WaveFunction(chi.grid, oscillator_shear(chi.grid, chi.psi, dtau))
    if method == "eigen":
        return WaveFunction(chi.grid, _oscillator_eigen(chi.grid, chi.psi, dtau))
    raise ValueError(f"unknown method {method!r}")


def parity(psi: WaveFunction) -> WaveFunction:
    """``[P psi](x) = psi(-x)`` on the lattice (index ``j -> -j mod N``)."""
    out = psi.psi
    for ax in range(psi.grid.dim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return WaveFunction(psi.grid, out)


@dataclass
class StationaryPhaseReport:
    t: float
    abs_discrepancy: float
    rel_discrepancy: float
    samples: int


def stationary_phase_check(psi_hat: Callable[[np.ndarray], np.ndarray], t: float,
                           grid: GridSpec, cutoff: float = 1e-3) -> StationaryPhaseReport:
    """Compare the free packet at ``x = |t| y`` with its stationary-phase form.

    Returns the sup over sampled ``y`` of
    ``| |t|^{d/2} psi(t,|t|y) exp(-i t y^2/2) exp(+-i d pi/4) - psi_hat(+-y) |``,
    with ``y`` restricted to where ``|psi_hat| > cutoff * max |psi_hat|``.
    """
    if t == 0:
        raise ValueError("t must be nonzero")
    from .lattice import continuum_fourier

    d = grid.dim
    sign = 1.0 if t > 0 else -1.0
    # lattice state from its momentum profile: psi = F^{-1} psi_hat, F^{-1} = P F
    hat_vals = np.asarray(psi_hat(grid.coords), dtype=complex)
    psi0 = parity(continuum_fourier(WaveFunction(grid, hat_vals)))
    chi = free_oscillator_evolve(psi0, float(np.arctan(t)), 0.0)
    s = float(tm(t))
    at = abs(t)
    chi_scaled = resample_scaled(grid, chi.psi, at / s)
    y2 = grid.r2
    psi_t = s ** (-d / 2) * np.exp(0.5j * t * at**2 * y2 / s**2) * chi_scaled
    scaled = at ** (d / 2) * psi_t * np.exp(-0.5j * t * y2) * np.exp(sign * 1j * d * np.pi / 4)
    target = np.asarray(psi_hat(sign * grid.coords), dtype=complex)
    mask = np.abs(target) > cutoff * np.max(np.abs(target))
    diff = np.abs(scaled - target)[mask]
    peak = float(np.max(np.abs(target)))
    worst = float(np.max(diff))
    return StationaryPhaseReport(float(t), worst, worst / peak, int(mask.sum()))
