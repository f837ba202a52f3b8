"""Initial data families, closed-form oracles and scaling studies."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
import csv
import math
import statistics

import numpy as np

from .errors import ConfigurationError, DomainError, InterfaceError
from .grid import Field, SpaceTimeField, constant_field, interpolate, sample_function

KINDS = ("constant", "sphere-wave", "jump-1d", "homogeneous-2d", "perturbed-constant", "random-phase")


@dataclass(frozen=True)
class DataSpec:
    """Description of an initial datum.

    ``k`` is the integer wave number of a sphere wave (a tuple in 2D),
    ``angle`` the geodesic distance between the two jump values, ``kappa``
    the Lipschitz scale of the 2D homogeneous map, ``bump_*`` the Gaussian
    phase bump of a perturbed constant, ``kmax``/``seed`` the band limit and
    seed of a random phase.
    """

    kind: str = "constant"
    m: int = 2
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
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown data kind {self.kind!r}; expected one of {KINDS}")
        if self.m not in (2, 3):
            raise ConfigurationError(f"target dimension m must be 2 or 3, got {self.m}")

    @property
    def name(self):
        return self.label or self.kind


def _embed(c, s, m):
    c = np.asarray(c, dtype=float)
    s = np.broadcast_to(np.asarray(s, dtype=float), c.shape)
    comps = [c, s] + [np.zeros_like(c)] * (m - 2)
    return np.stack(comps, axis=-1)


def unit_vector(angle, m=2):
    return _embed(math.cos(angle), math.sin(angle), m)


def geodesic_midpoint(angle, m=2):
    return unit_vector(angle / 2, m)


def _phase_field(grid, spec):
    if spec.kind == "perturbed-constant":
        c = np.broadcast_to(np.asarray(spec.bump_center, dtype=float), (grid.n,))
        r2 = sum((x - ci) ** 2 for x, ci in zip(grid.mesh, c))
        return spec.bump_amp * np.exp(-r2 / (2 * spec.bump_width ** 2))
    rng = np.random.default_rng(spec.seed)
    theta = np.zeros(grid.shape)
    ks = range(-spec.kmax, spec.kmax + 1)
    kvecs = [(k,) for k in ks] if grid.n == 1 else [(k1, k2) for k1 in ks for k2 in ks]
    for kv in kvecs:
        if all(k == 0 for k in kv):
            continue
        ph = sum(2 * math.pi * k * x / grid.L for k, x in zip(kv, grid.mesh))
        c, s = rng.normal(size=2) / max(np.linalg.norm(kv), 1.0)
        theta += c * np.cos(ph) + s * np.sin(ph)
    return spec.amplitude * theta / max(np.abs(theta).max(), 1e-300)


def make_data(spec, grid):
    """Sample the datum described by ``spec`` on ``grid``."""
    m = spec.m
    if spec.kind == "constant":
        return constant_field(grid, spec.amplitude * unit_vector(0.0, m))
    if spec.kind == "sphere-wave":
        k = tuple(spec.k) + (0,) * (grid.n - len(spec.k))
        if len(k) != grid.n:
            raise ConfigurationError(f"wave vector {spec.k} does not match dimension {grid.n}")
        ph = sum(2 * math.pi * ki * x / grid.L for ki, x in zip(k, grid.mesh))
        return Field(grid, spec.amplitude * _embed(np.cos(ph), np.sin(ph), m))
    if spec.kind == "jump-1d":
        if grid.n != 1:
            raise ConfigurationError("jump-1d data needs a one-dimensional grid")
        x = grid.mesh[0]
        inside = np.abs(x) < grid.L / 4
        on_jump = np.isclose(np.abs(x), grid.L / 4, rtol=0, atol=1e-9 * grid.L)
        vals = np.where(inside[:, None], unit_vector(0.0, m), unit_vector(spec.angle, m))
        # sites sitting exactly on a jump get the geodesic midpoint, which centres the discrete jump
        vals[on_jump] = geodesic_midpoint(spec.angle, m)
        return Field(grid, spec.amplitude * vals)
    if spec.kind == "homogeneous-2d":
        if grid.n != 2:
            raise ConfigurationError("homogeneous-2d data needs a two-dimensional grid")
        x, y = grid.mesh
        alpha = np.arctan2(y, x)
        alpha = np.where((x == 0) & (y == 0), 0.0, alpha)
        psi = spec.kappa * np.sin(alpha + spec.phase)
        return Field(grid, spec.amplitude * _embed(np.cos(psi), np.sin(psi), m))
    theta = _phase_field(grid, spec)
    return Field(grid, _embed(np.cos(theta), np.sin(theta), m))


def random_bandlimited(grid, m, kmax, seed=0, amplitude=1.0):
    """Real field with random Fourier coefficients on ``0 < |k|_inf <= kmax``."""
    rng = np.random.default_rng(seed)
    vals = np.zeros(grid.shape + (m,))
    ks = range(-kmax, kmax + 1)
    kvecs = [(k,) for k in ks] if grid.n == 1 else [(k1, k2) for k1 in ks for k2 in ks]
    for kv in kvecs:
        if all(k == 0 for k in kv):
            continue
        ph = sum(2 * math.pi * k * x / grid.L for k, x in zip(kv, grid.mesh))
        c = rng.normal(size=(2, m))
        vals += np.cos(ph)[..., None] * c[0] + np.sin(ph)[..., None] * c[1]
    return Field(grid, amplitude * vals / np.abs(vals).max())


def jump_extension_oracle(x, t, a0, a1):
    """Poisson extension of the single jump from ``a0`` (x < 0) to ``a1`` (x > 0)."""
    if t <= 0:
        raise DomainError(f"oracle needs t > 0, got {t}")
    a0, a1 = np.asarray(a0, dtype=float), np.asarray(a1, dtype=float)
    s = (2 / math.pi) * np.arctan(np.asarray(x, dtype=float) / t)
    return (a0 + a1) / 2 + np.multiply.outer(s, (a1 - a0) / 2)


def two_jump_oracle(grid, t, a0, a1):
    """Superposed single-jump oracles for data ``a0`` on ``|x| < L/4`` and ``a1`` elsewhere."""
    x = grid.axis
    q = grid.L / 4
    return jump_extension_oracle(x + q, t, a1, a0) + jump_extension_oracle(x - q, t, a0, a1) - np.asarray(a0)


def periodic_two_jump_oracle(grid, t, a0, a1):
    """Exact Poisson extension on the torus of ``a0`` on ``|x| < L/4`` and ``a1`` elsewhere.

    The periodic square wave ``sign(cos(2 pi x / L))`` extends to
    ``(2/pi) arctan(cos(2 pi x / L) / sinh(2 pi t / L))``, which already
    contains every periodic image of both jumps.
    """
    if t <= 0:
        raise DomainError(f"oracle needs t > 0, got {t}")
    a0, a1 = np.asarray(a0, dtype=float), np.asarray(a1, dtype=float)
    w = 2 * math.pi / grid.L
    s = (2 / math.pi) * np.arctan(np.cos(w * grid.axis) / math.sinh(w * t))
    return (a0 + a1) / 2 + np.multiply.outer(s, (a0 - a1) / 2)


def _node_power(mesh, lam):
    k = math.log(lam) / math.log(mesh.ratio)
    kr = int(round(k))
    if kr < 1 or abs(k - kr) > 1e-6:
        raise InterfaceError(f"scale factor {lam} is not a positive power of the mesh ratio {mesh.ratio}")
    return kr


def _window_points(grid, center, radius):
    c = np.broadcast_to(np.asarray(center, dtype=float), (grid.n,))
    d = grid.periodic_distance(c)
    idx = np.argwhere(d <= radius)
    pts = grid.coords[tuple(idx.T)]
    # unwrap to the copy nearest the centre so scaling acts on true displacements
    pts = c + (pts - c + grid.L / 2) % grid.L - grid.L / 2
    return idx, pts


def self_similarity_defect(bundle, lam_set, window, t_min=0.0):
    """Largest ``|u(c + lam (x-c), lam t) - u(x, t)|`` over ``lam``, mesh pairs and window sites.

    ``window`` is ``(center, radius)``; sites ``x`` are those within
    ``radius / lam`` of the centre so both points stay in the window.
    """
    center, radius = window
    U = bundle.u
    mesh, times = U.mesh, U.mesh.times
    worst, pairs = 0.0, 0
    c = np.broadcast_to(np.asarray(center, dtype=float), (U.grid.n,))
    for lam in lam_set:
        k = _node_power(mesh, lam)
        idx, pts = _window_points(U.grid, c, radius / lam)
        for j in range(mesh.M - k):
            if times[j] < t_min:
                continue
            here = U.values[j][tuple(idx.T)]
            there = interpolate(U.frame(j + k), c + lam * (pts - c))
            worst = max(worst, float(np.linalg.norm(there - here, axis=-1).max()))
            pairs += 1
    if pairs == 0:
        raise InterfaceError("no frame pairs (t, lam t) available on the mesh")
    return worst


@dataclass
class ExpanderReport:
    """Reference profile ``u(., t*)`` and the largest deviation of later frames from its rescalings."""

    profile: Field
    t_star: float
    defect: float
    window: tuple
    per_frame: list = dc_field(default_factory=list)

    def to_dict(self):
        return {"t_star": self.t_star, "defect": self.defect,
                "window": {"center": list(np.atleast_1d(self.window[0]).astype(float)),
                           "radius": float(self.window[1])},
                "per_frame": [[float(t), float(d)] for t, d in self.per_frame]}


def expander_profile(bundle, window, t_star=None):
    """Compare frames after ``t*`` with ``u(c + (x-c) t*/t, t*)``; ``t*`` defaults to the median node."""
    center, radius = window
    U = bundle.u
    times = U.mesh.times
    j0 = U.mesh.M // 2 if t_star is None else U.mesh.index(t_star)
    ts = float(times[j0])
    prof = U.frame(j0)
    c = np.broadcast_to(np.asarray(center, dtype=float), (U.grid.n,))
    idx, pts = _window_points(U.grid, c, radius)
    per = []
    for j in range(j0 + 1, U.mesh.M):
        here = U.values[j][tuple(idx.T)]
        there = interpolate(prof, c + (pts - c) * ts / times[j])
        per.append((float(times[j]), float(np.linalg.norm(here - there, axis=-1).max())))
    defect = max((d for _, d in per), default=0.0)
    return ExpanderReport(prof, ts, defect, (c, radius), per)


def synthetic_self_similar(grid, mesh, profile, m=2):
    """Space-time field ``u(x, t) = profile(x / t)`` sampled on ``grid`` and ``mesh``."""
    frames = []
    for t in mesh.times:
        frames.append(sample_function(grid, m, lambda *xs: profile(*[x / t for x in xs])).values)
    return SpaceTimeField(grid, mesh, np.stack(frames))


def embedding_row(name, a, T_inf=None):
    from .norms import besov_seminorm, bmo_seminorm, carleson_A_seminorm, q0_seminorm
    T_inf = a.grid.L / 8 if T_inf is None else T_inf
    return {"name": name, "n": a.grid.n, "besov": besov_seminorm(a).value, "q0": q0_seminorm(a).value,
            "bmo": bmo_seminorm(a).value, "A_inf": carleson_A_seminorm(a, T_inf).value}


def embedding_study(family, csv_path=None, slack=1.1):
    """Seminorm table for ``family`` (pairs ``(name, Field)``) and the fitted ordering constants.

    Returns ``(rows, summary)``; ``summary['A_le_Q0']`` tells whether
    ``A_inf <= slack * Q0`` held for every member and ``summary['C_bmo']``
    is the smallest ``C`` with ``BMO <= C Q0``.
    """
    rows = [embedding_row(name, a) for name, a in family]
    ratios = [r["A_inf"] / r["q0"] for r in rows if r["q0"] > 1e-12]
    bmo = [r["bmo"] / r["q0"] for r in rows if r["q0"] > 1e-12]
    summary = {
        "A_le_Q0": all(r["A_inf"] <= slack * r["q0"] + 1e-12 for r in rows),
        "max_A_over_Q0": max(ratios, default=0.0),
        "C_bmo": max(bmo, default=0.0),
        "members": len(rows),
    }
    if csv_path is not None:
        write_table(rows, csv_path)
    return rows, summary


def write_table(rows, path):
    if not rows:
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})


def family_constant(values):
    """Summary of per-member constants: max, median and whether max <= 2 median."""
    vals = [float(v) for v in values if np.isfinite(v)]
    if not vals:
        return {"max": float("nan"), "median": float("nan"), "ok": False, "values": []}
    med = statistics.median(vals)
    mx = max(vals)
    return {"max": mx, "median": med, "ok": bool(np.isfinite(mx) and mx <= 2 * med), "values": vals}


def fitted_exponent(scales, values):
    """Slope of ``log values`` against ``log scales`` by least squares."""
    x, y = np.log(np.asarray(scales, dtype=float)), np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def interpolation_ratios(u):
    """The two interpolation ratios for one field.

    ``r_grad = |grad u|_inf / (|d u|_inf |d grad u|_inf)^(1/2)`` and
    ``r_half = |(-Delta)^(1/2) u|_inf / (|u|_inf |d grad u|_inf)^(1/2)``.
    """
    from .fracgrad import fg_grad_modulus_sq, fg_modulus_sq
    from .spectral import frac_laplacian, gradient_values
    g = gradient_values(u.values, u.grid)
    grad_sup = float(np.sqrt(np.sum(g ** 2, axis=(0, -1))).max())
    d_sup = float(np.sqrt(np.maximum(fg_modulus_sq(u), 0)).max())
    dg_sup = float(np.sqrt(np.maximum(fg_grad_modulus_sq(u), 0)).max())
    half_sup = frac_laplacian(u, 0.5).sup()
    return {"r_grad": grad_sup / math.sqrt(d_sup * dg_sup), "r_half": half_sup / math.sqrt(u.sup() * dg_sup),
            "grad": grad_sup, "d": d_sup, "d_grad": dg_sup, "half": half_sup, "sup": u.sup()}
