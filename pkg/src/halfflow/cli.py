"""Command-line front end: ``halfflow <command> --config <path> [--out <dir>] [--threads k]``.

Configs are plain ``key = value`` lines with ``#`` comments.  Lists are comma
separated.  Exit codes: 0 success, 1 numerical nonconvergence, 2 configuration
or usage error.  Every run writes ``manifest.json``; errors additionally write
``error.json``.
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass, fields, replace
import json
import logging
import math
import os
import platform
import sys
import time
import warnings

import numpy as np

from . import _fft
from .errors import ConfigurationError, HalfflowError, NonconvergenceError
from .grid import Field, make_grid, write_field_csv

log = logging.getLogger(__name__)

COMMANDS = ("validate", "norms", "solve", "expander", "sweep")
EXIT_OK, EXIT_NONCONVERGED, EXIT_CONFIG = 0, 1, 2


class ConfigParseError(ConfigurationError):
    """Configuration text could not be turned into a :class:`RunConfig`."""


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def _opt_float(s):
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


def _strs(s):
    return tuple(x.strip() for x in s.split(",") if x.strip())


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration; every field is one config key."""

    command: str = "validate"
    # grid
    n: int = 1
    L: float = 32.0
    N: int = 1024
    m: int = 2
    # data
    data: str = "perturbed-constant"
    k: tuple = (1,)
    amplitude: float = 1.0
    angle: float = 0.3
    kappa: float = 0.2
    phase: float = 0.0
    bump_amp: float = 0.1
    bump_width: float = 1.0
    bump_center: tuple = (0.0,)
    kmax: int = 4
    seed: int = 0
    # solver
    T: float = 1.0
    M: int = 48
    rho: float = 2.0 ** 0.2
    max_iter: int = 40
    tol: float = 1e-5
    use_cutoff: bool = True
    eps_check: float = 0.3
    substeps: int = 4
    cross_check: bool = False
    frame_every: int = 1
    # seminorm sampling
    norms_T: float | None = None
    x_stride: int = 1
    per_octave: int = 5
    # self-similarity
    window_center: tuple = ()
    window_radius: float | None = None
    t_star: float | None = None
    t_min: float = 0.0
    lam_powers: tuple = (2, 4)
    # validate
    suite: str = "oracles"
    # sweep
    sweep_command: str = "norms"
    sweep_key: str = ""
    sweep_values: tuple = ()
    # output
    out: str = "halfflow_out"

    def grid(self):
        return make_grid(self.n, self.L, self.N)

    def data_spec(self):
        from .experiments import DataSpec
        return DataSpec(self.data, m=self.m, k=self.k, amplitude=self.amplitude, angle=self.angle,
                        kappa=self.kappa, phase=self.phase, bump_amp=self.bump_amp, bump_width=self.bump_width,
                        bump_center=self.bump_center, kmax=self.kmax, seed=self.seed)

    def solver_config(self):
        from .solver import SolverConfig
        return SolverConfig(T=self.T, M=self.M, rho=self.rho, max_iter=self.max_iter, tol=self.tol,
                            use_cutoff=self.use_cutoff, eps_check=self.eps_check, substeps=self.substeps)

    def to_dict(self):
        return {f.name: (list(v) if isinstance(v, tuple) else v)
                for f in fields(self) for v in [getattr(self, f.name)]}


_PARSERS = {
    "command": str, "n": int, "L": float, "N": int, "m": int,
    "data": str, "k": _ints, "amplitude": float, "angle": float, "kappa": float, "phase": float,
    "bump_amp": float, "bump_width": float, "bump_center": _floats, "kmax": int, "seed": int,
    "T": float, "M": int, "rho": float, "max_iter": int, "tol": float, "use_cutoff": _bool,
    "eps_check": float, "substeps": int, "cross_check": _bool, "frame_every": int,
    "norms_T": _opt_float, "x_stride": int, "per_octave": int,
    "window_center": _floats, "window_radius": _opt_float, "t_star": _opt_float, "t_min": float,
    "lam_powers": _ints, "suite": str,
    "sweep_command": str, "sweep_key": str, "sweep_values": _strs, "out": str,
}


def _check_ranges(cfg, lines):
    def err(key, msg):
        where = f"line {lines[key]}: " if key in lines else ""
        raise ConfigParseError(f"{where}{key}: {msg}")

    if cfg.command not in COMMANDS:
        err("command", f"unknown command {cfg.command!r}; expected one of {COMMANDS}")
    if cfg.n not in (1, 2):
        err("n", f"must be 1 or 2, got {cfg.n}")
    if cfg.N < 16 or cfg.N & (cfg.N - 1):
        err("N", f"must be a power of two >= 16, got {cfg.N}")
    if not (cfg.L > 0 and math.isfinite(cfg.L)):
        err("L", f"must be positive, got {cfg.L}")
    if cfg.m not in (2, 3):
        err("m", f"must be 2 or 3, got {cfg.m}")
    if cfg.M < 16:
        err("M", f"need at least 16 time nodes, got {cfg.M}")
    if not cfg.tol > 0:
        err("tol", f"must be positive, got {cfg.tol}")
    if not cfg.T > 0:
        err("T", f"must be positive, got {cfg.T}")
    if not cfg.rho > 1:
        err("rho", f"must exceed 1, got {cfg.rho}")
    if cfg.max_iter < 1:
        err("max_iter", "must be >= 1")
    if cfg.substeps < 1:
        err("substeps", "must be >= 1")
    if cfg.x_stride < 1:
        err("x_stride", "must be >= 1")
    if cfg.per_octave < 1:
        err("per_octave", "must be >= 1")
    if cfg.frame_every < 0:
        err("frame_every", "must be >= 0")
    if cfg.norms_T is not None and not cfg.norms_T > 0:
        err("norms_T", "must be positive")
    if cfg.suite not in ("oracles", "acceptance"):
        err("suite", f"must be 'oracles' or 'acceptance', got {cfg.suite!r}")
    if cfg.window_center and len(cfg.window_center) != cfg.n:
        err("window_center", f"needs {cfg.n} coordinates")
    if cfg.window_radius is not None and not cfg.window_radius > 0:
        err("window_radius", "must be positive")
    if any(p < 1 for p in cfg.lam_powers):
        err("lam_powers", "powers of the mesh ratio must be >= 1")
    if cfg.command == "sweep":
        if cfg.sweep_command not in ("norms", "solve", "expander"):
            err("sweep_command", f"must be norms, solve or expander, got {cfg.sweep_command!r}")
        if cfg.sweep_key not in _PARSERS or cfg.sweep_key in ("command", "out", "sweep_key", "sweep_values",
                                                              "sweep_command"):
            err("sweep_key", f"not a sweepable key: {cfg.sweep_key!r}")
        if not cfg.sweep_values:
            err("sweep_values", "needs at least one value")
    from .experiments import KINDS
    if cfg.data not in KINDS:
        err("data", f"unknown data kind {cfg.data!r}; expected one of {KINDS}")


def parse_config(text):
    """Parse ``key = value`` text into a :class:`RunConfig`.

    Unknown keys, duplicate keys, malformed lines and out-of-range values
    raise :class:`ConfigParseError` with the offending line number(s).
    """
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigParseError(f"line {lineno}: unknown key {key!r}")
        if key in lines:
            raise ConfigParseError(f"duplicate key {key!r} on lines {lines[key]} and {lineno}")
        try:
            values[key] = _PARSERS[key](val)
        except ValueError as exc:
            raise ConfigParseError(f"line {lineno}: bad value for {key!r}: {exc}") from None
        lines[key] = lineno
    cfg = RunConfig(**values)
    _check_ranges(cfg, lines)
    return cfg


def _override(cfg, key, raw):
    """Copy of ``cfg`` with one key set from its text form (used by sweeps)."""
    try:
        val = _PARSERS[key](raw)
    except ValueError as exc:
        raise ConfigParseError(f"sweep value {raw!r} for {key!r}: {exc}") from None
    new = replace(cfg, **{key: val})
    _check_ranges(new, {})
    return new


# ---------------------------------------------------------------------------
# output helpers


class Output:
    """Single writer for one run directory."""

    def __init__(self, root):
        self.root = root
        for sub in ("reports", "frames", "tables"):
            os.makedirs(os.path.join(root, sub), exist_ok=True)

    def path(self, *parts):
        return os.path.join(self.root, *parts)

    def json(self, rel, obj):
        with open(self.path(rel), "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def field(self, rel, values, grid):
        write_field_csv(Field(grid, np.asarray(values)), self.path(rel))

    def table(self, rel, header, rows):
        with open(self.path(rel), "w") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(_cell(v) for v in r) + "\n")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


# ---------------------------------------------------------------------------
# commands


def _report(rep):
    d = rep.to_dict()
    d.pop("mesh", None)
    return d


def cmd_validate(cfg, out):
    from . import validation as V
    checks = V.ORACLES if cfg.suite == "oracles" else V.ACCEPTANCE
    results = V.run_checks(checks)
    timings = {r.key: r.elapsed for r in results}
    report = {"suite": cfg.suite, "passed": all(r.passed for r in results),
              "checks": [{k: v for k, v in r.to_dict().items() if k != "elapsed"} for r in results]}
    if cfg.suite == "oracles":
        # the literal closed form differs from the computed density by a factor 2 pi; reported, not gated
        lit = V.check_poisson_identity()
        timings[lit.key] = lit.elapsed
        report["discrepancies"] = [{k: v for k, v in lit.to_dict().items() if k != "elapsed"}]
    out.json("reports/validate.json", report)
    for r in results:
        print(r.line())
    return EXIT_OK if report["passed"] else EXIT_NONCONVERGED, {"check_seconds": timings}


def _norms_report(cfg, a):
    from .norms import (besov_seminorm, bmo_seminorm, carleson_A_seminorm, default_sampling, q0_seminorm)
    g = a.grid
    T = cfg.norms_T if cfg.norms_T is not None else g.L / 8
    samp = default_sampling(g, T, x_stride=cfg.x_stride, per_octave=cfg.per_octave)
    A_T = carleson_A_seminorm(a, T, samp)
    A_inf = carleson_A_seminorm(a, g.L / 8, default_sampling(g, g.L / 8, cfg.x_stride, cfg.per_octave))
    return {"T": T, "A_T": _report(A_T), "A_inf": _report(A_inf), "q0": _report(q0_seminorm(a)),
            "bmo": _report(bmo_seminorm(a)), "besov": _report(besov_seminorm(a))}


def _datum(cfg):
    from .experiments import make_data
    return make_data(cfg.data_spec(), cfg.grid())


def cmd_norms(cfg, out):
    a = _datum(cfg)
    rep = _norms_report(cfg, a)
    out.json("reports/norms.json", rep)
    out.field("frames/data.csv", a.values, a.grid)
    out.table("tables/norms.csv", ["quantity", "value"],
              [(k, rep[k]["value"]) for k in ("A_T", "A_inf", "q0", "bmo", "besov")])
    return EXIT_OK, {}


def _solve(cfg, out):
    from .solver import (energy_series, fixed_point_residual, max_frame_difference, picard_solve,
                         sphere_deviation, step_solve, weak_residual)
    a = _datum(cfg)
    sc = cfg.solver_config()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        b = picard_solve(a, sc)
    dev = sphere_deviation(b)
    E = energy_series(b)
    diag = {"method": b.method, "converged": b.converged, "iterations": b.iterations, "history": b.history,
            "ratios": b.ratios, "data_seminorm": b.diagnostics.get("data_seminorm"),
            "warnings": [str(w.message) for w in caught],
            "max_sphere_deviation": float(dev.max()), "fixed_point_residual": fixed_point_residual(b),
            "weak_residual": weak_residual(b)}
    if cfg.cross_check:
        s = step_solve(a, sc)
        diag["step_difference"] = max_frame_difference(b, s)
    out.table("tables/frames.csv", ["index", "t", "sphere_deviation", "energy"],
              [(j, t, d, e) for j, (t, d, e) in enumerate(zip(b.mesh.times, dev, E))])
    out.field("frames/data.csv", a.values, a.grid)
    if cfg.frame_every > 0:
        for j in range(0, b.mesh.M, cfg.frame_every):
            out.field(f"frames/u_{j:04d}.csv", b.u.values[j], b.grid)
        if (b.mesh.M - 1) % cfg.frame_every:
            out.field(f"frames/u_{b.mesh.M - 1:04d}.csv", b.u.values[-1], b.grid)
    return b, diag


def cmd_solve(cfg, out):
    b, diag = _solve(cfg, out)
    out.json("reports/solve.json", diag)
    _require_converged(b)
    return EXIT_OK, {}


def _require_converged(b):
    if not b.converged:
        raise NonconvergenceError(f"no convergence within max_iter={b.config.max_iter}", b.history)


def _window(cfg, grid):
    if cfg.window_center:
        c = np.asarray(cfg.window_center, dtype=float)
    elif cfg.data == "jump-1d":
        c = np.full(grid.n, grid.L / 4)
    else:
        c = np.zeros(grid.n)
    r = cfg.window_radius if cfg.window_radius is not None else grid.L / 16
    return c, r


def cmd_expander(cfg, out):
    from .experiments import expander_profile, self_similarity_defect
    b, diag = _solve(cfg, out)
    window = _window(cfg, b.grid)
    rep = expander_profile(b, window, cfg.t_star)
    lams = [b.mesh.ratio ** p for p in cfg.lam_powers]
    ssd = self_similarity_defect(b, lams, window, t_min=cfg.t_min)
    out.json("reports/solve.json", diag)
    out.json("reports/expander.json", {**rep.to_dict(), "self_similarity_defect": ssd, "lambdas": lams,
                                       "t_min": cfg.t_min})
    out.field("frames/profile.csv", rep.profile.values, b.grid)
    out.table("tables/expander.csv", ["t", "defect"], rep.per_frame)
    _require_converged(b)
    return EXIT_OK, {}


def _headline(sub, root):
    path = os.path.join(root, "reports", f"{sub}.json")
    with open(path) as fh:
        rep = json.load(fh)
    if sub == "norms":
        return [rep[k]["value"] for k in ("A_T", "A_inf", "q0", "bmo", "besov")], \
            ["A_T", "A_inf", "q0", "bmo", "besov"]
    if sub == "solve":
        return [rep["converged"], rep["iterations"], rep["max_sphere_deviation"], rep["weak_residual"]], \
            ["converged", "iterations", "max_sphere_deviation", "weak_residual"]
    return [rep["defect"], rep["self_similarity_defect"]], ["expander_defect", "self_similarity_defect"]


def cmd_sweep(cfg, out):
    rows, header, worst = [], None, EXIT_OK
    runner = COMMAND_FUNCS[cfg.sweep_command]
    for i, raw in enumerate(cfg.sweep_values):
        sub = _override(cfg, cfg.sweep_key, raw)
        sub = replace(sub, command=cfg.sweep_command)
        root = out.path("runs", f"{i:03d}")
        code = _run_into(sub, root)
        worst = max(worst, code)
        if code == EXIT_OK or os.path.exists(os.path.join(root, "reports", f"{_report_name(sub)}.json")):
            vals, cols = _headline(_report_name(sub), root)
        else:
            vals, cols = [], []
        header = header or cols
        rows.append([i, raw, code] + vals + [""] * (len(header) - len(vals)))
    out.table("tables/sweep.csv", ["index", cfg.sweep_key, "exit_code"] + (header or []), rows)
    return worst, {}


def _report_name(cfg):
    return {"norms": "norms", "solve": "solve", "expander": "expander"}[cfg.command]


COMMAND_FUNCS = {"validate": cmd_validate, "norms": cmd_norms, "solve": cmd_solve,
                 "expander": cmd_expander, "sweep": cmd_sweep}


# ---------------------------------------------------------------------------
# driver


def _versions():
    import scipy
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "halfflow": _package_version()}


def _package_version():
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:  # not installed; running from a source tree
        return "unknown"


def _write_error(root, code, exc):
    os.makedirs(root, exist_ok=True)
    rec = {"exit_code": code, "type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, NonconvergenceError):
        rec["history"] = exc.history
    with open(os.path.join(root, "error.json"), "w") as fh:
        json.dump(_jsonable(rec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_into(cfg, root):
    t0 = time.perf_counter()
    extra, err = {}, None
    try:
        out = Output(root)
        code, extra = COMMAND_FUNCS[cfg.command](cfg, out)
    except NonconvergenceError as exc:
        code, err = EXIT_NONCONVERGED, exc
    except HalfflowError as exc:
        code, err = EXIT_CONFIG, exc
    if err is not None:
        log.error("%s: %s", type(err).__name__, err)
        _write_error(root, code, err)
    manifest = {"config": cfg.to_dict(), "exit_code": code, "versions": _versions(),
                "tolerances": {"tol": cfg.tol, "eps_check": cfg.eps_check},
                "threads": _fft.get_workers(), "seconds": time.perf_counter() - t0, **extra}
    os.makedirs(root, exist_ok=True)
    with open(os.path.join(root, "manifest.json"), "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return code


def run(config, out=None):
    """Execute ``config`` and return the exit code; results go to ``out`` (default ``config.out``)."""
    return _run_into(config, out if out is not None else config.out)


def build_parser():
    p = argparse.ArgumentParser(prog="halfflow", description="Half-harmonic map heat flow laboratory.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key = value config file (defaults are used when omitted)")
    p.add_argument("--out", help="output directory (overrides the 'out' key)")
    p.add_argument("--threads", type=int, help="FFT worker threads (overrides HALFFLOW_THREADS)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    text = ""
    try:
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        cfg = parse_config(text)
        if cfg.command != args.command:
            if "command" in {ln.split("=", 1)[0].strip() for ln in text.splitlines() if "=" in ln}:
                raise ConfigParseError(f"config command {cfg.command!r} does not match {args.command!r}")
            cfg = replace(cfg, command=args.command)
            _check_ranges(cfg, {})
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigParseError(f"--threads must be >= 1, got {args.threads}")
            _fft.set_workers(args.threads)
    except (OSError, ConfigurationError) as exc:
        root = args.out or "halfflow_out"
        print(f"halfflow: {exc}", file=sys.stderr)
        _write_error(root, EXIT_CONFIG, exc)
        return EXIT_CONFIG
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
