"""Mild solutions of the half-harmonic map heat flow on the periodic grid.

The flow ``du/dt + (-Delta)^(1/2) u = u |d u|^2`` is solved in mild form

    u(t) = S_t a + G(f)(t),      G(f)(t) = int_0^t S_{t-s} f(s) ds,

with ``f = phi(u) |d u|^2`` and ``phi`` a cutoff that is the identity on the
ball of radius 3/2.  :func:`picard_solve` iterates the mild equation on whole
timelines; :func:`step_solve` marches frame to frame and serves as an
independent cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
import logging
import math
import warnings

import numpy as np

from . import _fft
from .errors import ConfigurationError, DomainError, NonconvergenceError, ShapeError
from .fracgrad import fg_modulus_sq_values
from .grid import Field, SpaceTimeField, TimeMesh
from .spectral import frac_laplacian_values, poisson_semigroup_values, semigroup_timeline, energy_half

log = logging.getLogger(__name__)


def _smoothstep5(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (s * (6 * s - 15) + 10)


@dataclass(frozen=True)
class CutoffMap:
    """Radial cutoff ``phi(y) = y (1 - S(2|y| - 3))`` with the quintic smoothstep ``S``.

    ``phi`` is the identity for ``|y| <= inner``, vanishes for ``|y| >= outer``
    and its magnitude peaks at about 1.532 in between.
    """

    inner: float = 1.5
    outer: float = 2.0

    def profile(self, rho):
        rho = np.asarray(rho, dtype=float)
        return rho * (1.0 - _smoothstep5((rho - self.inner) / (self.outer - self.inner)))

    def factor(self, rho):
        """``g(rho)/rho``: the scalar multiplying ``y``."""
        rho = np.asarray(rho, dtype=float)
        return 1.0 - _smoothstep5((rho - self.inner) / (self.outer - self.inner))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return y * self.factor(np.linalg.norm(y, axis=-1))[..., None] if y.ndim > 1 else \
            y * float(self.factor(np.linalg.norm(y)))


CUTOFF = CutoffMap()


def apply_cutoff(y):
    return CUTOFF(y)


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of a solve on the geometric mesh ``t_j = T rho^(j-M)``."""

    T: float = 1.0
    M: int = 48
    rho: float = 2.0 ** 0.2
    max_iter: int = 40
    tol: float = 1e-5
    use_cutoff: bool = True
    eps_check: float = 0.3
    substeps: int = 4

    def __post_init__(self):
        if self.M < 16:
            raise ConfigurationError(f"need M >= 16 time nodes, got {self.M}")
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        if not self.T > 0:
            raise ConfigurationError(f"T must be positive, got {self.T}")
        if not self.rho > 1:
            raise ConfigurationError(f"grading ratio must exceed 1, got {self.rho}")
        if self.max_iter < 1 or self.substeps < 1:
            raise ConfigurationError("max_iter and substeps must be >= 1")

    def mesh(self):
        return TimeMesh.geometric(self.T, self.M, self.rho)


@dataclass
class SolutionBundle:
    """Discrete solution timeline with iteration diagnostics."""

    u: SpaceTimeField
    a: Field
    config: SolverConfig
    history: list = dc_field(default_factory=list)
    converged: bool = False
    method: str = "picard"
    diagnostics: dict = dc_field(default_factory=dict)
    forcing_on: bool = True

    @property
    def grid(self):
        return self.u.grid

    @property
    def mesh(self):
        return self.u.mesh

    @property
    def iterations(self):
        return len(self.history)

    @property
    def ratios(self):
        h = self.history
        return [h[i] / h[i - 1] if h[i - 1] > 0 else 0.0 for i in range(1, len(h))]


def nonlinearity_density(u):
    """``|d u|^2`` over the full shell."""
    return fg_modulus_sq_values(u.values, u.grid)


def forcing_values(V, grid, use_cutoff=True):
    dens = fg_modulus_sq_values(V, grid)
    base = CUTOFF(V) if use_cutoff else V
    return base * dens[..., None]


def forcing(u, use_cutoff=True):
    """``phi(u) |d u|^2`` (or ``u |d u|^2`` without the cutoff)."""
    return Field(u.grid, forcing_values(u.values, u.grid, use_cutoff))


def _phi_weights(z):
    """``phi1(z) = (1-e^-z)/z`` and ``phi2(z) = (z-1+e^-z)/z^2`` with series near 0."""
    z = np.asarray(z, dtype=float)
    small = z < 1e-3
    zs = np.where(small, 1.0, z)
    em = np.exp(-zs)
    p1 = np.where(small, 1 - z / 2 + z * z / 6 - z ** 3 / 24, (1 - em) / zs)
    p2 = np.where(small, 0.5 - z / 6 + z * z / 24 - z ** 3 / 120, (zs - 1 + em) / zs ** 2)
    return p1, p2


def _duhamel_spectral(F, grid, times):
    """``G(f)`` at every node, in the rfft domain; returns ``(G_hat, head_hat)``.

    Between nodes ``f`` is interpolated linearly and the semigroup is
    integrated exactly against it.  On ``(0, t_1]`` ``f`` is frozen at its
    value at ``t_1``.
    """
    axes = grid.spatial_axes
    lam = grid.abs_xi_r
    Fh = _fft.rfftn(F, axes=axes)
    G = np.empty_like(Fh)
    H = np.empty_like(Fh)
    t1 = times[0]
    p1, _ = _phi_weights(lam * t1)
    G[0] = t1 * p1 * Fh[0]
    H[0] = G[0]
    for j in range(1, len(times)):
        h = times[j] - times[j - 1]
        z = lam * h
        p1, p2 = _phi_weights(z)
        e = np.exp(-z)
        G[j] = e * G[j - 1] + h * ((p1 - p2) * Fh[j - 1] + p2 * Fh[j])
        H[j] = e * H[j - 1]
    return G, H


def duhamel_timeline(f):
    """``G(f)`` at every node of ``f.mesh`` as a SpaceTimeField."""
    G, _ = _duhamel_spectral(f.values, f.grid, f.mesh.times)
    vals = _fft.irfftn(G, s=f.grid.shape, axes=f.grid.spatial_axes)
    return SpaceTimeField(f.grid, f.mesh, vals)


def duhamel(f, t):
    """``G(f)(t)`` for a mesh node ``t``."""
    j = f.mesh.index(t)
    return duhamel_timeline(f).frame(j)


def duhamel_head_share(f):
    """Per node, sup of the propagated ``(0, t_1]`` contribution over sup of ``G(f)``."""
    G, H = _duhamel_spectral(f.values, f.grid, f.mesh.times)
    s, ax = f.grid.shape, f.grid.spatial_axes
    g = np.linalg.norm(_fft.irfftn(G, s=s, axes=ax), axis=-1).reshape(f.mesh.M, -1).max(axis=1)
    hh = np.linalg.norm(_fft.irfftn(H, s=s, axes=ax), axis=-1).reshape(f.mesh.M, -1).max(axis=1)
    return np.where(g > 0, hh / np.where(g > 0, g, 1.0), 0.0)


def _sup_diff(X, Y):
    return float(np.sqrt(np.sum((X - Y) ** 2, axis=-1)).max())


def _data_seminorm(a, T):
    from .norms import carleson_A_seminorm
    Tc = min(T, a.grid.L / 8)
    try:
        return carleson_A_seminorm(a, Tc).value, Tc
    except DomainError as exc:  # coarse grids may have no admissible radius
        log.debug("data seminorm unavailable: %s", exc)
        return float("nan"), Tc


def picard_solve(a, config=None, check_data=True):
    """Iterate ``u_{l+1} = S_t a + G(phi(u_l) |d u_l|^2)`` starting from ``u_0 = S_t a``.

    Stops when the largest per-site change over all frames is at most
    ``config.tol``.  Three consecutive growing changes raise
    :class:`NonconvergenceError`; hitting ``max_iter`` returns an
    unconverged bundle.
    """
    config = SolverConfig() if config is None else config
    grid, mesh = a.grid, config.mesh()
    times = mesh.times
    diagnostics = {}
    if check_data:
        est, Tc = _data_seminorm(a, config.T)
        diagnostics["data_seminorm"] = est
        diagnostics["data_seminorm_T"] = Tc
        if est >= config.eps_check:
            warnings.warn(f"data seminorm estimate {est:.3g} >= eps_check={config.eps_check}; "
                          "convergence is not guaranteed", RuntimeWarning, stacklevel=2)
    lin = semigroup_timeline(a.values, grid, times)
    u = lin
    history = []
    converged = False
    for _ in range(config.max_iter):
        F = forcing_values(u, grid, config.use_cutoff)
        G, _h = _duhamel_spectral(F, grid, times)
        new = lin + _fft.irfftn(G, s=grid.shape, axes=grid.spatial_axes)
        d = _sup_diff(new, u)
        history.append(d)
        u = new
        if not np.all(np.isfinite(u)):
            raise NonconvergenceError("iterate became non-finite", history)
        if d <= config.tol:
            converged = True
            break
        if len(history) >= 4 and history[-1] > history[-2] > history[-3] > history[-4]:
            raise NonconvergenceError(
                f"Picard differences grew three times in a row: {history[-4:]}", history)
    log.info("picard: %d iterations, last difference %.3g", len(history), history[-1])
    return SolutionBundle(SpaceTimeField(grid, mesh, u), a, config, history, converged, "picard", diagnostics)


def _step(uj, grid, h, use_cutoff, zero_forcing):
    if zero_forcing:
        return poisson_semigroup_values(uj, grid, h)
    ax = grid.spatial_axes
    z = grid.abs_xi_r * h
    p1, p2 = _phi_weights(z)
    e = np.exp(-z)
    uh = _fft.rfftn(uj, axes=ax)
    f0 = _fft.rfftn(forcing_values(uj, grid, use_cutoff), axes=ax)
    ah = e * uh + h * p1 * f0
    a = _fft.irfftn(ah, s=grid.shape, axes=ax)
    f1 = _fft.rfftn(forcing_values(a, grid, use_cutoff), axes=ax)
    return _fft.irfftn(ah + h * p2 * (f1 - f0), s=grid.shape, axes=ax)


def step_solve(a, config=None, zero_forcing=False):
    """March across the mesh with the second-order exponential Runge-Kutta step.

    Predictor ``a = S_h u + h phi1(h L) f(u)``, corrector
    ``u + = a + h phi2(h L) (f(a) - f(u))`` with ``L = (-Delta)^(1/2)``.
    Each mesh interval, including ``(0, t_1]``, is split into
    ``config.substeps`` equal steps.
    """
    config = SolverConfig() if config is None else config
    grid, mesh = a.grid, config.mesh()
    times = np.concatenate([[0.0], mesh.times])
    u = np.array(a.values)
    frames = []
    for j in range(mesh.M):
        h = (times[j + 1] - times[j]) / config.substeps
        for _ in range(config.substeps):
            u = _step(u, grid, h, config.use_cutoff, zero_forcing)
        if not np.all(np.isfinite(u)):
            raise NonconvergenceError(f"marching blew up before t={times[j + 1]}")
        frames.append(u)
    return SolutionBundle(SpaceTimeField(grid, mesh, np.stack(frames)), a, config, [], True, "step",
                          forcing_on=not zero_forcing)


def _bundle_forcing(bundle, V):
    if not bundle.forcing_on:
        return np.zeros_like(V)
    return forcing_values(V, bundle.grid, bundle.config.use_cutoff)


def sphere_deviation(bundle):
    """Per frame, ``max_x | |u|^2 - 1 |``."""
    V = bundle.u.values
    return np.abs(np.sum(V ** 2, axis=-1) - 1.0).reshape(bundle.mesh.M, -1).max(axis=1)


def energy_series(bundle):
    """Half-Dirichlet energy of every frame."""
    return np.array([energy_half(fr) for fr in bundle.u.frames])


def fixed_point_residual(bundle):
    """Per frame, ``sup |u - S_t a - G(f(u))|`` with the bundle's cutoff setting."""
    grid, times = bundle.grid, bundle.mesh.times
    V = bundle.u.values
    lin = semigroup_timeline(bundle.a.values, grid, times)
    F = _bundle_forcing(bundle, V)
    G, _ = _duhamel_spectral(F, grid, times)
    R = V - lin - _fft.irfftn(G, s=grid.shape, axes=grid.spatial_axes)
    return np.sqrt(np.sum(R ** 2, axis=-1)).reshape(len(times), -1).max(axis=1)


def constraint_residual(bundle):
    """Largest residual of ``dv/dt + (-Delta)^(1/2) v - 2 v |d u|^2`` for ``v = |u|^2 - 1``.

    Time derivatives are central differences on the graded mesh; interior
    frames only.
    """
    grid, times = bundle.grid, bundle.mesh.times
    V = bundle.u.values
    v = np.sum(V ** 2, axis=-1) - 1.0
    dens = fg_modulus_sq_values(V, grid)
    lap = frac_laplacian_values(v[..., None], grid, 0.5)[..., 0]
    best = 0.0
    for j in range(1, len(times) - 1):
        h0, h1 = times[j] - times[j - 1], times[j + 1] - times[j]
        dv = (h0 ** 2 * v[j + 1] - h1 ** 2 * v[j - 1] + (h1 ** 2 - h0 ** 2) * v[j]) / (h0 * h1 * (h0 + h1))
        r = dv + lap[j] - 2 * v[j] * dens[j]
        best = max(best, float(np.abs(r).max()))
    return best


@dataclass(frozen=True)
class TestFunction:
    """Separable test function ``e_c psi_k(x) b(t)``: a Fourier mode times a time bump."""

    k: tuple
    kind: str
    component: int
    center: float
    halfwidth: float


def _bump(s):
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def _bump_prime(s):
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si ** 2)) * (-2 * si / (1 - si ** 2) ** 2)
    return out


_BUMP_MASS = 0.4439938161680794  # integral of exp(-1/(1-s^2)) over (-1, 1)


def default_test_battery(grid, mesh, m, n_bumps=4):
    """Six low Fourier modes times ``n_bumps`` smooth bumps spread in log-time over ``(t_1, T)``."""
    if grid.n == 1:
        modes = [((1,), "cos"), ((1,), "sin"), ((2,), "cos"), ((2,), "sin"), ((3,), "cos"), ((5,), "sin")]
    else:
        modes = [((1, 0), "cos"), ((0, 1), "sin"), ((1, 1), "cos"), ((1, -1), "sin"), ((2, 0), "cos"),
                 ((0, 3), "sin")]
    lo, hi = math.log(mesh.t1 * 4), math.log(mesh.T)
    edges = np.exp(np.linspace(lo, hi, n_bumps + 1))
    battery = []
    for i, (k, kind) in enumerate(modes):
        for b in range(n_bumps):
            c = 0.5 * (edges[b] + edges[b + 1])
            hw = 0.5 * (edges[b + 1] - edges[b]) * 0.98
            battery.append(TestFunction(k, kind, i % m, c, hw))
    return battery


def _interp_frames(bundle, t_query):
    """Solution at arbitrary times by exact semigroup integration of linearly interpolated forcing."""
    grid, times = bundle.grid, bundle.mesh.times
    V = bundle.u.values
    F = _bundle_forcing(bundle, V)
    ax = grid.spatial_axes
    Vh = _fft.rfftn(V, axes=ax)
    Fh = _fft.rfftn(F, axes=ax)
    lam = grid.abs_xi_r
    out = np.empty((len(t_query),) + V.shape[1:])
    for q, t in enumerate(t_query):
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = min(max(j, 0), len(times) - 2)
        h = times[j + 1] - times[j]
        tau = t - times[j]
        p1, p2 = _phi_weights(lam * tau)
        uh = np.exp(-lam * tau) * Vh[j] + tau * p1 * Fh[j] + (tau * tau / h) * p2 * (Fh[j + 1] - Fh[j])
        out[q] = _fft.irfftn(uh, s=grid.shape, axes=ax)
    return out


def weak_residual(bundle, test_battery=None, gauss_points=16, panels=8, return_all=False):
    """Max over the battery of ``|int int -u.d_t phi + u.(-Delta)^(1/2) phi - f.phi|`` per unit volume.

    ``u`` between nodes is rebuilt from the mild formula with linearly
    interpolated forcing; ``f`` is the forcing of that ``u``.  Each time bump
    is integrated over its own support with ``panels`` Gauss-Legendre panels
    of ``gauss_points`` nodes.
    """
    grid, mesh = bundle.grid, bundle.mesh
    battery = default_test_battery(grid, mesh, bundle.u.m) if test_battery is None else test_battery
    xg, wg = np.polynomial.legendre.leggauss(gauss_points)
    edges = np.linspace(-1.0, 1.0, panels + 1)
    sq = np.concatenate([0.5 * (b - a) * xg + 0.5 * (a + b) for a, b in zip(edges[:-1], edges[1:])])
    sw = np.concatenate([0.5 * (b - a) * wg for a, b in zip(edges[:-1], edges[1:])])
    vol = grid.L ** grid.n
    cache = {}
    res = []
    for tf in battery:
        key = (tf.center, tf.halfwidth)
        if key not in cache:
            tq = tf.center + tf.halfwidth * sq
            if tq[0] < mesh.t1 or tq[-1] > mesh.T * (1 + 1e-12):
                raise DomainError(f"test bump support [{tq[0]}, {tq[-1]}] leaves the mesh range")
            U = _interp_frames(bundle, tq)
            cache[key] = (U, _bundle_forcing(bundle, U))
        U, F = cache[key]
        kvec = np.asarray(tf.k, dtype=float) * 2 * np.pi / grid.L
        phase = sum(kv * x for kv, x in zip(kvec, grid.mesh))
        psi = np.cos(phase) if tf.kind == "cos" else np.sin(phase)
        kabs = float(np.linalg.norm(kvec))
        uproj = np.tensordot(U[..., tf.component], psi, axes=grid.n) * grid.cell_volume / vol
        fproj = np.tensordot(F[..., tf.component], psi, axes=grid.n) * grid.cell_volume / vol
        b = _bump(sq) / (_BUMP_MASS * tf.halfwidth)
        db = _bump_prime(sq) / (_BUMP_MASS * tf.halfwidth ** 2)
        wq = sw * tf.halfwidth
        r = float(np.sum(wq * (-uproj * db + kabs * uproj * b - fproj * b)))
        res.append(abs(r))
    return (max(res), res) if return_all else max(res)


def a_priori_ratio(bundle, x_stride=1):
    """``norm(N_phi(u)) / seminorm(u)^2`` in X_T, ``N_phi(u) = G(phi(u)|du|^2)``."""
    from .norms import xt_seminorm
    F = forcing_values(bundle.u.values, bundle.grid, bundle.config.use_cutoff)
    N = duhamel_timeline(SpaceTimeField(bundle.grid, bundle.mesh, F))
    num = xt_seminorm(N, x_stride).components["norm"]
    den = xt_seminorm(bundle.u, x_stride).value
    return num / den ** 2 if den > 0 else float("nan")


def check_compatible(b1, b2):
    if b1.grid != b2.grid or b1.mesh != b2.mesh:
        raise ShapeError("bundles do not share grid and time mesh")


def max_frame_difference(b1, b2):
    check_compatible(b1, b2)
    return _sup_diff(b1.u.values, b2.u.values)
