"""Asymptotic observables and wave operators as limits tau -> ±pi/2.

Every limit is computed along a geometric schedule
``tau_n = ±(pi/2 - 2^{-n} pi/4)`` and extrapolated in ``delta_n = pi/2 - |tau_n|``
by Richardson extrapolation with the leading order read off the trace.
Schedule points are always step nodes of the propagator, so the numerical
evolution composes exactly across them and Cauchy increments are free of
step-placement noise.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .gauge import OscPotentials, SchrFromOsc
from .lattice import SpatialProfile, WaveFunction, characteristic_function, inner_product
from .picture import apply_N
from .propagate import PropagatorConfig, cross_picture_check, evolve_osc, evolve_schr

__all__ = [
    "default_schedule",
    "richardson",
    "ConvergenceTrace",
    "StateReport",
    "ScatteringReport",
    "asymptotic_position_char",
    "asymptotic_velocity_distribution",
    "wave_operator",
    "wave_operator_adjoint",
    "isometry_defect",
    "intertwining_check",
    "shell_mass",
    "shell_band_mass",
    "check_admissible",
    "schrodinger_wave_operator_check",
    "scattering_report",
]


def default_schedule(n: int = 12, sign: int = 1, start: int = 1, density: int = 1) -> np.ndarray:
    """``tau_k = sign (pi/2 - 2^{-k} pi/4)`` for ``k = start, start + 1/density, ..., n``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    k = np.arange(start * density, n * density + 1) / density
    return sign * (np.pi / 2 - 2.0 ** (-k) * np.pi / 4)


def _with_nodes(cfg: PropagatorConfig, taus) -> PropagatorConfig:
    bp = tuple(sorted(set(cfg.breakpoints) | {float(x) for x in taus}))
    return replace(cfg, breakpoints=bp)


# --------------------------------------------------------------------------
# extrapolation


def extrapolation_basis(order: float | None, levels: int) -> list:
    """Basis functions of ``delta`` for the limit fit.

    Integer orders use ``1, delta^p, delta^(p+1), ...``.  Other detected
    orders (typically slightly below 1) indicate logarithmic corrections, as
    produced by a-gauge potentials growing like ``ln(1/delta)``; then the
    basis is ``1, delta, delta ln delta, delta^2, delta^2 ln delta, ...``.
    """
    if order is not None and abs(order - round(order)) < 0.1 and round(order) >= 1:
        p = int(round(order))
        return [lambda d: np.ones_like(d)] + [lambda d, j=j: d ** (p + j) for j in range(levels - 1)]
    fns = [lambda d: np.ones_like(d)]
    k = 1
    while len(fns) < levels:
        fns.append(lambda d, k=k: d**k)
        if len(fns) < levels:
            fns.append(lambda d, k=k: d**k * np.log(d))
        k += 1
    return fns


def richardson(deltas: np.ndarray, values: Sequence, order: float | None = 1.0, levels: int = 4):
    """Extrapolate ``values(delta)`` to ``delta = 0`` from the last ``levels`` points.

    Returns ``(limit, residual)``; the residual is the distance between the
    estimates from ``levels`` and ``levels - 1`` points.
    """
    deltas = np.asarray(deltas, dtype=float)
    vals = [np.asarray(v) for v in values]
    k = min(levels, len(vals))

    def fit(m):
        if m == 1:
            return vals[-1]
        basis = extrapolation_basis(order, m)
        d = deltas[-m:]
        M = np.array([[float(b(np.asarray(di))) for b in basis] for di in d])
        w = np.linalg.solve(M.T, np.eye(m)[:, 0])  # weights reproducing the constant term
        return sum(wi * v for wi, v in zip(w, vals[-m:]))

    lim = fit(k)
    prev = fit(k - 1) if k > 1 else vals[-1]
    return lim, float(np.linalg.norm(np.ravel(lim - prev)))


def _detect_order(increments: np.ndarray, ratio: float = 2.0):
    """Leading order from successive increment ratios; ``None`` if erratic."""
    inc = np.asarray(increments, dtype=float)
    if inc.size < 4 or np.any(inc[-4:] <= 0):
        return None
    r = inc[-4:-1] / inc[-3:]
    if np.any(r <= 1.0) or (np.max(r) - np.min(r)) > 0.25 * np.mean(r):
        return None
    return float(np.log(np.mean(r)) / np.log(ratio))


@dataclass
class ConvergenceTrace:
    """Values along a schedule and their extrapolated limit.

    ``values`` may be scalars or arrays (states, densities); ``increments``
    are ``|value_{n+1} - value_n|`` (norms for arrays), ``increments[i]``
    belonging to the step from ``taus[i]`` to ``taus[i+1]``.
    """

    taus: np.ndarray
    increments: np.ndarray
    values: list = field(default_factory=list, repr=False)
    limit: object = None
    order: float | None = None
    residual: float = np.inf
    converged: bool = False
    tail_bound: float = np.inf

    @property
    def deltas(self) -> np.ndarray:
        return np.pi / 2 - np.abs(self.taus)

    def monotone_tail(self, count: int = 5) -> bool:
        inc = self.increments[-count:]
        return inc.size == count and bool(np.all(np.diff(inc) < 0))

    def rows(self):
        """CSV rows ``n, tau, increment, value_re, value_im`` (values only if scalar)."""
        out = []
        for i, tau in enumerate(self.taus):
            inc = self.increments[i - 1] if i > 0 else ""
            val = self.values[i] if i < len(self.values) else None
            if val is not None and np.ndim(val) == 0:
                re, im = repr(float(np.real(val))), repr(float(np.imag(val)))
            else:
                re = im = ""
            out.append([i + 1, repr(float(tau)), "" if inc == "" else repr(float(inc)), re, im])
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "tau", "increment", "value_re", "value_im"])
            w.writerows(self.rows())

    def summary(self) -> dict:
        lim = self.limit
        if lim is not None and np.ndim(lim) == 0:
            lim = [float(np.real(lim)), float(np.imag(lim))]
        elif lim is not None:
            lim = None
        return {"taus": [float(x) for x in self.taus], "increments": [float(x) for x in self.increments],
                "limit": lim, "order": self.order, "residual": float(self.residual),
                "converged": bool(self.converged), "tail_bound": float(self.tail_bound)}


def _finish(trace: ConvergenceTrace, ext_values: list, ext_taus: np.ndarray, levels: int = 4,
            scale: float = 1.0):
    """Extrapolate and set the convergence verdict; ``scale`` converts array
    norms of the values into the norm used for the increments."""
    p = _detect_order(trace.increments)
    dl = np.pi / 2 - np.abs(ext_taus)
    last_inc = float(trace.increments[-1]) if trace.increments.size else 0.0
    if p is not None and len(ext_values) >= 2:
        trace.limit, res = richardson(dl, ext_values, p, levels)
        trace.residual = res * scale
        trace.order = p
        r = 2.0 ** p
        trace.tail_bound = last_inc / (r - 1.0) if r > 1 else np.inf
    else:
        trace.limit = ext_values[-1]
        trace.order = None
        # geometric tail estimate from the last two increments, if decreasing
        inc = trace.increments
        if inc.size >= 2 and 0 < inc[-1] < inc[-2]:
            q = inc[-1] / inc[-2]
            trace.tail_bound = float(inc[-1] * q / (1 - q))
        trace.residual = trace.tail_bound
    trace.converged = bool(trace.monotone_tail(5) and trace.residual < 10.0 * max(last_inc, 1e-300)) \
        or bool(trace.increments.size and np.all(trace.increments[-5:] < 1e-13))
    return trace


def _diff_norm(a, b) -> float:
    if isinstance(a, WaveFunction):
        return (a - b).norm()
    return float(np.linalg.norm(np.ravel(np.asarray(a) - np.asarray(b))))


# --------------------------------------------------------------------------
# forward traces: asymptotic observables


def _forward_states(osc: OscPotentials, psi: WaveFunction, schedule, cfg):
    cfg = _with_nodes(cfg, schedule)
    cur, t0 = psi, 0.0
    for tau in schedule:
        cur = evolve_osc(osc, cur, float(tau), t0, cfg)
        t0 = float(tau)
        yield cur


def asymptotic_position_char(osc: OscPotentials, psi: WaveFunction, q, schedule=None,
                             cfg: PropagatorConfig = PropagatorConfig()) -> ConvergenceTrace:
    """Trace of ``<psi(tau), exp(i q.x) psi(tau)>`` with ``psi(tau) = u(tau, 0) psi``."""
    schedule = default_schedule() if schedule is None else np.asarray(schedule, dtype=float)
    vals = [characteristic_function(st, q) for st in _forward_states(osc, psi, schedule, cfg)]
    inc = np.abs(np.diff(vals))
    tr = ConvergenceTrace(np.asarray(schedule), inc, vals)
    return _finish(tr, vals, np.asarray(schedule))


def asymptotic_velocity_distribution(osc: OscPotentials, psi: WaveFunction, schedule=None,
                                     cfg: PropagatorConfig = PropagatorConfig()):
    """Extrapolated ``|psi(tau)|^2`` as ``tau -> ±pi/2`` (lattice density, not
    multiplied by the cell volume).  Returns ``(density, trace)``."""
    schedule = default_schedule() if schedule is None else np.asarray(schedule, dtype=float)
    dens = [st.density() for st in _forward_states(osc, psi, schedule, cfg)]
    dx = psi.grid.cell_volume
    inc = np.array([np.sum(np.abs(b - a)) * dx for a, b in zip(dens[:-1], dens[1:])])
    tr = ConvergenceTrace(np.asarray(schedule), inc, [])
    _finish(tr, dens, np.asarray(schedule), scale=np.sqrt(psi.grid.cell_volume))
    return np.asarray(tr.limit), tr


def wave_operator_adjoint(osc: OscPotentials, psi: WaveFunction, sign: int = 1,
                          cfg: PropagatorConfig = PropagatorConfig(), schedule=None, levels: int = 4):
    """``lim u(tau, 0) psi``; equals ``w* psi`` when the shell carries no mass."""
    schedule = default_schedule(sign=sign) if schedule is None else np.asarray(schedule, dtype=float)
    states = list(_forward_states(osc, psi, schedule, cfg))
    inc = np.array([(b - a).norm() for a, b in zip(states[:-1], states[1:])])
    tr = ConvergenceTrace(np.asarray(schedule), inc, [])
    _finish(tr, [s.psi for s in states], np.asarray(schedule), levels, np.sqrt(psi.grid.cell_volume))
    return WaveFunction(psi.grid, tr.limit), tr


# --------------------------------------------------------------------------
# wave operators


def wave_operator(osc: OscPotentials, psi: WaveFunction, sign: int = 1,
                  cfg: PropagatorConfig = PropagatorConfig(), schedule=None, levels: int = 4):
    """Estimate ``w± psi = lim u(0, tau) psi``.

    Cauchy increments use ``|u(0,tau_{n+1})psi - u(0,tau_n)psi| = |u(tau_n,tau_{n+1})psi - psi|``
    (short evolutions); the last ``levels`` schedule points are evolved back to
    ``tau = 0`` and Richardson-extrapolated.  Returns ``(state, trace)``.
    """
    schedule = default_schedule(sign=sign) if schedule is None else np.asarray(schedule, dtype=float)
    if np.any(np.sign(schedule) != sign):
        raise ValueError("schedule points must have the sign of the limit")
    c = _with_nodes(cfg, schedule)
    inc = np.array([(evolve_osc(osc, psi, float(b), float(a), c) - psi).norm()
                    for a, b in zip(schedule[:-1], schedule[1:])])
    ext_taus = schedule[-levels:]
    ext = [evolve_osc(osc, psi, 0.0, float(tau), c).psi for tau in ext_taus]
    tr = ConvergenceTrace(np.asarray(schedule), inc, [])
    _finish(tr, ext, ext_taus, levels, np.sqrt(psi.grid.cell_volume))
    return WaveFunction(psi.grid, tr.limit), tr


def isometry_defect(states: Sequence[WaveFunction], images: Sequence[WaveFunction]) -> float:
    """``max |<w psi_i, w psi_j> - <psi_i, psi_j>|``."""
    if len(states) != len(images):
        raise ValueError("states and images differ in length")
    worst = 0.0
    for i in range(len(states)):
        for j in range(i, len(states)):
            d = inner_product(images[i], images[j]) - inner_product(states[i], states[j])
            worst = max(worst, abs(d))
    return float(worst)


def shell_band_mass(psi_or_density, grid=None, width: float = 0.1) -> float:
    """Mass in ``||x| - 1| < width`` of a state or a lattice density."""
    if isinstance(psi_or_density, WaveFunction):
        grid = psi_or_density.grid
        dens = psi_or_density.density()
    else:
        dens = np.asarray(psi_or_density)
    if width <= 0:
        return 0.0
    band = np.abs(np.sqrt(grid.r2) - 1.0) < width
    return float(np.sum(dens[band]) * grid.cell_volume)


def check_admissible(psi: WaveFunction, width: float = 0.1, tol: float = 1e-6) -> None:
    """Reject test states carrying more than ``tol`` of their mass near the unit shell."""
    m = shell_band_mass(psi, width=width) / max(psi.norm() ** 2, 1e-300)
    if m > tol:
        raise ValueError(f"state has relative mass {m:.3g} within {width} of the unit shell")


def shell_mass(osc: OscPotentials, psi: WaveFunction, width: float, sign: int = 1,
               cfg: PropagatorConfig = PropagatorConfig(), schedule=None) -> float:
    """Mass of the extrapolated asymptotic velocity density in ``||x| - 1| < width``."""
    if width <= psi.grid.dx:
        raise ValueError("shell width must exceed the lattice spacing")
    schedule = default_schedule(sign=sign) if schedule is None else schedule
    dens, _ = asymptotic_velocity_distribution(osc, psi, schedule, cfg)
    return shell_band_mass(dens, psi.grid, width)


def intertwining_check(osc: OscPotentials, psi: WaveFunction, f: SpatialProfile, sign: int = 1,
                       cfg: PropagatorConfig = PropagatorConfig(), schedule=None, levels: int = 4,
                       shell_width: float | None = None) -> dict:
    """Compare ``lim u(0,tau) f(x) u(tau,0) psi`` with ``w f(x) w* psi``.

    ``w* psi`` is taken as ``lim u(tau, 0) psi`` (the projection onto the
    complement of the shell is the identity on the test states; its size is
    reported as ``shell_mass``).
    """
    grid = psi.grid
    shell_width = 2 * grid.dx if shell_width is None else shell_width
    fv = np.asarray(f.on(grid))
    near = np.abs(np.sqrt(grid.r2) - 1.0) < shell_width
    if np.any(np.abs(fv[near]) > 1e-12):
        raise ValueError("f does not vanish near the unit shell")
    schedule = default_schedule(sign=sign) if schedule is None else np.asarray(schedule, dtype=float)
    c = _with_nodes(cfg, schedule)
    fwd = list(_forward_states(osc, psi, schedule, cfg))
    scale = np.sqrt(grid.cell_volume)
    fwd_inc = np.array([(b - a).norm() for a, b in zip(fwd[:-1], fwd[1:])])
    ftr = ConvergenceTrace(schedule, fwd_inc, [])
    _finish(ftr, [s.psi for s in fwd], schedule, levels, scale)
    wstar = WaveFunction(grid, ftr.limit)
    ext_taus = schedule[-levels:]
    lhs_vals = [evolve_osc(osc, WaveFunction(grid, fv * st.psi), 0.0, float(tau), c).psi
                for st, tau in zip(fwd[-levels:], ext_taus)]
    lhs_arr, lhs_res = richardson(np.pi / 2 - np.abs(ext_taus), lhs_vals, ftr.order, levels)
    lhs = WaveFunction(grid, lhs_arr)
    rhs, rtr = wave_operator(osc, WaveFunction(grid, fv * wstar.psi), sign, cfg, schedule, levels)
    return {"defect": (lhs - rhs).norm(), "lhs_norm": lhs.norm(), "rhs_norm": rhs.norm(),
            "lhs_residual": lhs_res * scale, "rhs_residual": rtr.residual,
            "wstar_residual": ftr.residual,
            "shell_mass": shell_band_mass(wstar, width=shell_width)}


def schrodinger_wave_operator_check(osc: OscPotentials, psi: WaveFunction, t: float,
                                    cfg: PropagatorConfig = PropagatorConfig()) -> dict:
    """``U(0, t) N(t) psi`` against ``u(0, arctan t) psi`` at finite ``t``,
    together with the cross-picture defect at the same ``t``."""
    tau = float(np.arctan(t))
    osc_side = evolve_osc(osc, psi, 0.0, tau, cfg)
    schr_side = evolve_schr(SchrFromOsc(osc), apply_N(t, psi), 0.0, t, cfg)
    cross = cross_picture_check(osc, osc_side, t, 0.0, cfg)
    return {"t": float(t), "defect": (osc_side - schr_side).norm(), "cross_picture_defect": cross}


# --------------------------------------------------------------------------
# reports


def _fingerprint(psi: WaveFunction) -> dict:
    grid = psi.grid
    dens = psi.density() * grid.cell_volume
    mean = [float(np.sum(grid.coords[j] * dens)) for j in range(grid.dim)]
    digest = hashlib.sha256(np.round(psi.psi, 8).tobytes()).hexdigest()[:16]
    return {"norm": psi.norm(), "mean_position": mean, "sha256_16": digest}


def _radial_histogram(density: np.ndarray, grid, bins: int = 40, rmax: float = 3.0):
    r = np.sqrt(grid.r2).ravel()
    hist, edges = np.histogram(r, bins=bins, range=(0.0, rmax), weights=density.ravel() * grid.cell_volume)
    return {"edges": edges.tolist(), "mass": hist.tolist()}


@dataclass
class StateReport:
    label: str
    fingerprint: dict
    increments: list
    converged: bool
    residual: float
    norm_defect: float
    velocity_histogram: dict
    shell_mass: float


@dataclass
class ScatteringReport:
    sign: int
    schedule: list
    states: list
    isometry_defect: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"sign": self.sign, "schedule": self.schedule, "isometry_defect": self.isometry_defect,
                "config": self.config,
                "states": [s.__dict__ for s in self.states]}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def scattering_report(osc: OscPotentials, states: Sequence[WaveFunction], sign: int = 1,
                      cfg: PropagatorConfig = PropagatorConfig(), schedule=None,
                      shell_width: float = 0.1, labels: Sequence[str] | None = None,
                      traces_out: dict | None = None) -> ScatteringReport:
    """Wave-operator estimates, isometry defect and asymptotic-velocity
    diagnostics for a family of test states."""
    schedule = default_schedule(sign=sign) if schedule is None else np.asarray(schedule, dtype=float)
    labels = labels or [f"state{i}" for i in range(len(states))]
    images, reports = [], []
    for lab, psi in zip(labels, states):
        img, tr = wave_operator(osc, psi, sign, cfg, schedule)
        dens, _ = asymptotic_velocity_distribution(osc, psi, schedule, cfg)
        images.append(img)
        if traces_out is not None:
            traces_out[lab] = tr
        reports.append(StateReport(lab, _fingerprint(img), [float(x) for x in tr.increments],
                                   tr.converged, float(tr.residual), abs(img.norm() - psi.norm()),
                                   _radial_histogram(dens, psi.grid),
                                   shell_band_mass(dens, psi.grid, shell_width)))
    return ScatteringReport(sign, [float(x) for x in schedule], reports,
                            isometry_defect(states, images))
