"""Command-line entry point: config ingestion, experiment orchestration and
report persistence.

    nlab <subcommand> [--config cfg.json] [--out dir] [--seed n] [--threads n]

Exit status 0 on success, 2 on configuration errors, 3 on numerical
non-convergence when ``fatal_nonconvergence`` is set.
"""
from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from jsonschema import Draft202012Validator

from .errors import AccuracyError, ConfigError, EscapeError, StabilityError
from .fields import (CoulombField, ConstantMagneticField, GaussianSourceField, SampleSpec,
                     UniformElectricField, ZeroField, check_bounds, eval_e)
from .gauge import SchrFromOsc, build_a_gauge, check_xA, fd_derivative
from .lattice import GridSpec, SpatialProfile, WaveFunction, boundary_mass, continuum_fourier
from .picture import free_oscillator_evolve, parity, tau_of_t
from .propagate import PropagatorConfig, cross_picture_check, evolve_osc, step_nodes
from .scatter import default_schedule, scattering_report
from . import verify as V

__all__ = ["main", "load_config", "default_config", "SCHEMA_VERSION", "SUBCOMMANDS"]

SCHEMA_VERSION = "1.0"
SUBCOMMANDS = ("free-demo", "evolve", "gauge-build", "fields-check", "scatter", "verify")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 2, 3

_BASE = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "fatal_nonconvergence": False,
    "field": {"family": "coulomb", "q": 1.0, "r0": 0.5, "core": "gaussian"},
    "gauge": {"tol": 1e-10, "samples": 1000},
    "propagator": {},
    "states": {"family": {"count": 10}},
    "output": {"summary": "summary.json", "traces": True},
}

_DEFAULTS = {
    "free-demo": {"grid": {"dim": 1, "L": 20.0, "N": 512}, "field": {"family": "zero"}},
    "evolve": {"grid": {"dim": 1, "L": 20.0, "N": 512}, "evolve": {"tau": 1.0, "sigma": 0.0, "samples": 10},
               "states": {"gaussians": [{"center": [0.5], "width": 0.7071067811865476, "k": [1.0]}]}},
    "gauge-build": {"grid": {"dim": 3, "L": 6.0, "N": 32}},
    "fields-check": {"grid": {"dim": 3, "L": 6.0, "N": 32}, "field": {"family": "gaussian_source", "q": 1.0,
                                                                      "width": 1.0},
                     "fields_check": {"kind": "tau", "n_time": 16, "n_space": 64, "tau_max": 1.5,
                                      "x_max": 3.0, "radius": 20.0, "growth_tol": 1.5}},
    "scatter": {"grid": {"dim": 1, "L": 40.0, "N": 1024},
                "states": {"gaussians": [{"center": [0.2], "width": 0.12},
                                         {"center": [-0.3], "width": 0.1, "k": [1.0]},
                                         {"center": [0.0], "width": 0.1, "k": [-2.0]}]},
                "scatter": {"sign": 1, "schedule_n": 12, "schedule_start": 1, "schedule_density": 1,
                            "shell_width": 0.1}},
    "verify": {"grid": {"dim": 3, "L": 8.0, "N": 64}, "states": {"family": {"count": 50}},
               "verify": {"tau": 0.5, "compare_N": 32, "identities": False, "delta": 1e-2,
                          "bound_tau_max": 1.4}},
}


def _schema() -> dict:
    text = resources.files("nlab").joinpath("schema/experiment.schema.json").read_text()
    return json.loads(text)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def default_config(command: str) -> dict:
    if command not in _DEFAULTS:
        raise ConfigError(f"unknown subcommand {command!r}")
    return _merge(_BASE, _DEFAULTS[command])


def _nonfinite(obj, path=()):
    if isinstance(obj, float) and not math.isfinite(obj):
        return path
    if isinstance(obj, dict):
        items = obj.items()
    elif isinstance(obj, list):
        items = enumerate(obj)
    else:
        return None
    for k, v in items:
        bad = _nonfinite(v, path + (k,))
        if bad is not None:
            return bad
    return None


def _fmt_path(path) -> str:
    return "/".join(str(p) for p in path) or "<root>"


def validate_config(cfg: dict) -> None:
    """Raise :class:`ConfigError` naming the offending path."""
    bad = _nonfinite(cfg)
    if bad is not None:
        raise ConfigError(f"cli.validate: {_fmt_path(bad)}: value is not finite")
    errors = sorted(Draft202012Validator(_schema()).iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"cli.validate: {_fmt_path(e.absolute_path)}: {e.message} "
                          f"(schema path {_fmt_path(e.schema_path)})")
    n = cfg["grid"]["N"]
    if n & (n - 1):
        raise ConfigError(f"cli.validate: grid/N: {n} is not a power of two")


def load_config(command: str, path: str | None, seed: int | None = None) -> dict:
    """Defaults for ``command`` overlaid with the JSON file at ``path``; validated."""
    user = {}
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cli.load_config: cannot read {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("cli.load_config: <root>: config must be a JSON object")
    cfg = _merge(default_config(command), user)
    if seed is not None:
        cfg["seed"] = seed
    validate_config(cfg)
    return cfg


# --------------------------------------------------------------------------
# builders


def _grid(cfg) -> GridSpec:
    g = cfg["grid"]
    return GridSpec(g["dim"], float(g["L"]), g["N"])


def _vec(values, dim, name):
    v = np.asarray(values, dtype=float)
    if v.size != dim:
        raise ConfigError(f"cli.build: {name}: expected {dim} components, got {v.size}")
    return v


def _field(cfg):
    f = cfg["field"]
    dim = cfg["grid"]["dim"]
    fam = f["family"]
    if fam == "zero":
        model = ZeroField(dim)
    elif fam == "coulomb":
        model = CoulombField(f.get("q", 1.0), f.get("r0", 0.5), dim, f.get("core", "gaussian"))
    elif fam == "gaussian_source":
        model = GaussianSourceField(f.get("q", 1.0), f.get("width", 1.0), dim)
    elif fam == "uniform_electric":
        model = UniformElectricField(_vec(f.get("E0", [1.0] * dim), dim, "field/E0"))
    else:
        if dim == 1:
            raise ConfigError("cli.build: field/family: no magnetic field in one dimension")
        size = 1 if dim == 2 else 3
        model = ConstantMagneticField(_vec(f.get("B0", [1.0] * size), size, "field/B0"), dim)
    if "gamma" in f:
        model.gamma = float(f["gamma"])
    return model


def _potentials(cfg):
    model = _field(cfg)
    g = cfg.get("gauge", {})
    a0 = None
    if "a0" in g:
        a0v = _vec(g["a0"], cfg["grid"]["dim"], "gauge/a0")
        a0 = SpatialProfile(lambda X, c=a0v: np.broadcast_to(c.reshape((-1,) + (1,) * (X.ndim - 1)),
                                                              X.shape).copy(),
                            vector=True, meta={"kind": "uniform", "value": a0v.tolist()})
    return model, build_a_gauge(model, a0, a0_div=(lambda X: np.zeros(X.shape[1:])) if a0 is not None else None,
                                tol=g.get("tol", 1e-10))


def _propagator(cfg) -> PropagatorConfig:
    try:
        return PropagatorConfig(**cfg.get("propagator", {}))
    except ValueError as exc:
        raise ConfigError(f"cli.build: propagator: {exc}") from exc


def _states(cfg, grid: GridSpec) -> list[WaveFunction]:
    s = cfg.get("states", {})
    if "gaussians" in s:
        out = []
        for i, item in enumerate(s["gaussians"]):
            c = _vec(item["center"], grid.dim, f"states/gaussians/{i}/center")
            k = _vec(item.get("k", [0.0] * grid.dim), grid.dim, f"states/gaussians/{i}/k")
            w = float(item["width"])
            shape = (-1,) + (1,) * grid.dim
            Y = grid.coords - c.reshape(shape)
            psi = np.exp(-np.sum(Y**2, axis=0) / (4 * w**2) + 1j * np.tensordot(k, grid.coords, axes=1))
            out.append(WaveFunction(grid, psi).normalized())
        return out
    return _family(cfg).states(grid)


def _family(cfg) -> V.TestStateFamily:
    f = cfg.get("states", {}).get("family", {})
    return V.TestStateFamily(count=f.get("count", 10), seed=int(cfg["seed"]) % 2**63,
                             center_max=f.get("center_max", 1.0),
                             width_range=(f.get("width_min", 0.45), f.get("width_max", 0.9)),
                             k_max=f.get("k_max", 1.5), degree=f.get("degree", 2))


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# --------------------------------------------------------------------------
# subcommands


def run_free_demo(cfg, out: Path) -> tuple[dict, bool]:
    grid = _grid(cfg)
    d = grid.dim
    states = _states(cfg, grid)
    phase = np.exp(-0.5j * np.pi * d)
    quarter = np.exp(-0.25j * np.pi * d)
    rows, par, fou = [], [], []
    for i, psi in enumerate(states):
        s_op = free_oscillator_evolve(psi, np.pi / 2, -np.pi / 2)
        dp = (s_op - parity(psi) * phase).norm()
        df = (free_oscillator_evolve(psi, np.pi / 2, 0.0) - continuum_fourier(psi) * quarter).norm()
        par.append(dp)
        fou.append(df)
        rows.append([i, repr(dp), repr(df)])
    if cfg["output"]["traces"]:
        _write_rows(out / "free_demo.csv", ["state", "parity_defect", "fourier_defect"], rows)
    return {"states": len(states), "parity_phase": [float(phase.real), float(phase.imag)],
            "parity_defect": max(par), "fourier_defect": max(fou)}, True


def run_evolve(cfg, out: Path) -> tuple[dict, bool]:
    grid = _grid(cfg)
    _, pot = _potentials(cfg)
    pc = _propagator(cfg)
    ev = cfg["evolve"]
    tau, sigma = float(ev["tau"]), float(ev["sigma"])
    psi = _states(cfg, grid)[0]
    marks = np.linspace(sigma, tau, ev["samples"] + 1)
    pc = PropagatorConfig(**{**cfg.get("propagator", {}),
                             "breakpoints": tuple(float(m) for m in marks)})
    rows, cur = [], psi
    for a, b in zip(marks[:-1], marks[1:]):
        cur = evolve_osc(pot, cur, float(b), float(a), pc)
        mean_x = [float(np.sum(grid.coords[j] * cur.density()) * grid.cell_volume) for j in range(grid.dim)]
        rows.append([repr(float(b)), repr(cur.norm()), *map(repr, mean_x), repr(boundary_mass(cur))])
    if cfg["output"]["traces"]:
        _write_rows(out / "evolve.csv", ["tau", "norm", *[f"mean_x{j}" for j in range(grid.dim)],
                                         "boundary_mass"], rows)
    t = float(np.tan(tau))
    summary = {"tau": tau, "sigma": sigma, "steps": int(step_nodes(sigma, tau, pc).size - 1),
               "norm_defect": abs(cur.norm() - psi.norm()), "boundary_mass": boundary_mass(cur)}
    if sigma == 0.0 and abs(tau) < np.pi / 2:
        summary["cross_picture_defect"] = cross_picture_check(pot, psi, t, 0.0, _propagator(cfg))
    return summary, True


def run_gauge_build(cfg, out: Path) -> tuple[dict, bool]:
    model, pot = _potentials(cfg)
    d = model.dim
    rng = np.random.default_rng(int(cfg["seed"]))
    n = cfg["gauge"]["samples"]
    taus = rng.uniform(-1.4, 1.4, n)
    T = np.tan(taus)
    X = rng.uniform(-3.0, 3.0, (d, n))
    xa = check_xA(SchrFromOsc(pot), T, X)
    # -d_tau a = e on a few slices
    Y = rng.uniform(-3.0, 3.0, (d, 64))
    worst, rows = 0.0, []
    for tau in np.linspace(-1.2, 1.2, 9):
        da = fd_derivative(lambda s: pot.a(s, Y), float(tau), 1e-3)
        dev = float(np.max(np.abs(-da - eval_e(model, float(tau), Y))))
        worst = max(worst, dev)
        rows.append([repr(float(tau)), repr(dev)])
    if cfg["output"]["traces"]:
        _write_rows(out / "gauge_field_defect.csv", ["tau", "dtau_a_plus_e"], rows)
    return {"model": model.describe(), "samples": n, "xA_defect": xa, "dtau_a_defect": worst,
            "vanishing_v": bool(pot.vanishing_v)}, True


def run_fields_check(cfg, out: Path) -> tuple[dict, bool]:
    model = _field(cfg)
    fc = cfg["fields_check"]
    spec = SampleSpec(dim=model.dim, kind=fc["kind"], n_time=fc["n_time"], n_space=fc["n_space"],
                      tau_max=fc["tau_max"], x_max=fc["x_max"], radius=fc["radius"], seed=int(cfg["seed"]))
    rep = check_bounds(model, spec, fc["growth_tol"])
    if cfg["output"]["traces"]:
        rep.write_csv(out / "bounds.csv")
    return rep.summary(), True


def run_scatter(cfg, out: Path) -> tuple[dict, bool]:
    grid = _grid(cfg)
    _, pot = _potentials(cfg)
    sc = cfg["scatter"]
    sched = default_schedule(sc["schedule_n"], sc["sign"], sc["schedule_start"], sc["schedule_density"])
    states = _states(cfg, grid)
    traces: dict = {}
    rep = scattering_report(pot, states, sc["sign"], _propagator(cfg), sched, sc["shell_width"],
                            traces_out=traces)
    if cfg["output"]["traces"]:
        for lab, tr in traces.items():
            tr.write_csv(out / f"trace_{lab}.csv")
    ok = all(s.converged for s in rep.states)
    return rep.to_dict(), ok


def run_verify(cfg, out: Path) -> tuple[dict, bool]:
    grid = _grid(cfg)
    _, pot = _potentials(cfg)
    vc = cfg["verify"]
    tau = float(vc["tau"])
    fam = _family(cfg)
    other = GridSpec(grid.dim, grid.extent, vc["compare_N"]) if vc.get("compare_N") else None
    pix = V.domain_inequality_pix(fam, pot, tau, grid, other)
    xppx = V.domain_inequality_xppx(fam, pot, tau, grid, other)
    ground = WaveFunction.from_function(grid, lambda X: np.exp(-0.5 * np.sum(X**2, axis=0)), normalize=True)
    g_pix = V.domain_inequality_pix([ground], None, 0.0, grid)["worst_margin"]
    g_xppx = V.domain_inequality_xppx([ground], None, 0.0, grid)["worst_margin"]
    res = {"tau": tau, "constants": {"pix": V.pix_constant(grid.dim), "xppx": V.xppx_constant(grid.dim)},
           "pix": {k: pix[k] for k in ("worst_margin", "worst_index", "discretization_error")},
           "xppx": {k: xppx[k] for k in ("worst_margin", "worst_index", "discretization_error")},
           "ground_state": {"pix_margin": g_pix, "pix_expected": (grid.dim**2 + 2 * grid.dim) / 2,
                            "xppx_margin": g_xppx}}
    if cfg["output"]["traces"]:
        _write_rows(out / "margins.csv", ["state", "pix_margin", "xppx_margin"],
                    [[i, repr(a), repr(b)] for i, (a, b) in enumerate(zip(pix["margins"], xppx["margins"]))])
    ok = True
    if vc.get("identities"):
        psi = fam.states(grid)[0]
        pc = _propagator(cfg)
        delta = vc["delta"]
        ids = {"xti": V.heisenberg_position_check(pot, psi, tau, delta, cfg=pc),
               "hti": V.heisenberg_energy_check(pot, psi, tau, delta, cfg=pc),
               "fxti": V.fxti_check(pot, psi, V.SmoothFunction.gaussian_bump(np.zeros(grid.dim), 1.0),
                                    tau, delta, cfg=pc)}
        res["identities"] = {k: {kk: (bool(vv) if isinstance(vv, (bool, np.bool_)) else float(vv))
                                 for kk, vv in v.items()} for k, v in ids.items()}
        sched = np.linspace(0.1, vc["bound_tau_max"], 14)
        mb = V.momentum_bound_check(pot, psi, sched, pc)
        res["momentum_bound_min_slack"] = mb["min_slack"]
        ok = all(v["ratio_ok"] for v in ids.values())
    return res, ok


_RUNNERS = {"free-demo": run_free_demo, "evolve": run_evolve, "gauge-build": run_gauge_build,
            "fields-check": run_fields_check, "scatter": run_scatter, "verify": run_verify}


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("NLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"cli: NLAB_THREADS={env!r} is not an integer") from exc
    return 1


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlab", description="Oscillator-picture scattering experiments")
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON experiment config (defaults per subcommand)")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, help="FFT worker threads (default: $NLAB_THREADS or 1)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = _now()
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("cli: --seed must be an unsigned 64-bit integer")
        cfg = load_config(args.command, args.config, args.seed)
        threads = _threads(args.threads)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status, code, error = "ok", EXIT_OK, None
    try:
        with sfft.set_workers(threads):
            results, converged = _RUNNERS[args.command](cfg, out)
        if not converged:
            status = "nonconverged"
            if cfg["fatal_nonconvergence"]:
                code = EXIT_NONCONVERGED
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AccuracyError, StabilityError, EscapeError) as exc:
        results, status = {}, "nonconverged"
        error = f"{args.command}: {type(exc).__name__}: {exc}"
        print(f"error: {error}", file=sys.stderr)
        code = EXIT_NONCONVERGED if cfg["fatal_nonconvergence"] else EXIT_OK
    summary = {"schema_version": SCHEMA_VERSION, "command": args.command, "seed": cfg["seed"],
               "config": cfg, "status": status, "error": error, "results": results,
               "timestamps": {"started": started, "finished": _now()}}
    with open(out / cfg["output"]["summary"], "w") as fh:
        json.dump(_clean(summary), fh, indent=2, sort_keys=True)
    return code


if __name__ == "__main__":
    sys.exit(main())
