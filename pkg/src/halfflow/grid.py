"""Periodic grids, fields on them, graded time meshes and window reductions.

The computational domain is the torus ``[-L/2, L/2)^n`` sampled at
``x_i = -L/2 + i*dx``.  Vector fields are stored as arrays of shape
``grid.shape + (m,)``; scalar fields are plain arrays of shape ``grid.shape``.
Space-time fields carry a leading frame axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
import math

import numpy as np

from . import _fft
from .errors import ConfigurationError, DataError, DomainError, InterfaceError, ShapeError


def _is_power_of_two(N):
    return isinstance(N, (int, np.integer)) and N > 0 and (N & (N - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``N`` points per axis on ``[-L/2, L/2)^n``."""

    n: int
    L: float
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ConfigurationError(f"unsupported dimension n={self.n}; only 1 and 2 are implemented")
        if not (isinstance(self.L, (int, float, np.floating)) and math.isfinite(self.L) and self.L > 0):
            raise ConfigurationError(f"domain length L must be positive and finite, got {self.L!r}")
        if not _is_power_of_two(self.N) or self.N < 16:
            raise ConfigurationError(f"N must be a power of two >= 16, got {self.N!r}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))

    @property
    def spacing(self):
        return self.L / self.N

    dx = spacing

    @property
    def shape(self):
        return (self.N,) * self.n

    @property
    def size(self):
        return self.N ** self.n

    @property
    def cell_volume(self):
        return self.spacing ** self.n

    @property
    def spatial_axes(self):
        """Axes of a ``(..., *shape, m)`` array that carry space."""
        return tuple(range(-self.n - 1, -1))

    @cached_property
    def axis(self):
        return -self.L / 2 + np.arange(self.N) * self.spacing

    @cached_property
    def mesh(self):
        """Tuple of ``n`` coordinate arrays of shape ``grid.shape`` (ij indexing)."""
        return tuple(np.meshgrid(*([self.axis] * self.n), indexing="ij"))

    @cached_property
    def coords(self):
        return np.stack(self.mesh, axis=-1)

    @cached_property
    def offsets(self):
        """Minimal-image offsets ``h`` of every site from site 0, shape ``shape + (n,)``."""
        j = np.fft.fftfreq(self.N, d=1.0 / self.N)  # 0, 1, ..., -N/2, ..., -1
        h = j * self.spacing
        return np.stack(np.meshgrid(*([h] * self.n), indexing="ij"), axis=-1)

    @cached_property
    def offset_norm(self):
        return np.sqrt(np.sum(self.offsets ** 2, axis=-1))

    @cached_property
    def freqs(self):
        """Per-axis physical frequencies ``2*pi*k/L`` in FFT order, broadcastable to ``shape``."""
        k = 2 * np.pi * np.fft.fftfreq(self.N, d=self.spacing)
        out = []
        for ax in range(self.n):
            s = [1] * self.n
            s[ax] = self.N
            out.append(k.reshape(s))
        return tuple(out)

    @cached_property
    def abs_xi(self):
        return np.sqrt(sum(f ** 2 for f in self.freqs))

    @cached_property
    def rfreqs(self):
        """Like :attr:`freqs` but in ``rfftn`` layout, with a trailing component axis."""
        out = []
        for ax in range(self.n):
            if ax == self.n - 1:
                k = 2 * np.pi * np.fft.rfftfreq(self.N, d=self.spacing)
            else:
                k = 2 * np.pi * np.fft.fftfreq(self.N, d=self.spacing)
            s = [1] * (self.n + 1)
            s[ax] = k.size
            out.append(k.reshape(s))
        return tuple(out)

    @cached_property
    def abs_xi_r(self):
        return np.sqrt(sum(f ** 2 for f in self.rfreqs))

    def periodic_distance(self, center):
        """Periodic distance of every site to ``center`` (shape ``grid.shape``)."""
        c = np.broadcast_to(np.asarray(center, dtype=float), (self.n,))
        d2 = np.zeros(self.shape)
        for ax, x in enumerate(self.mesh):
            d = np.abs(x - c[ax]) % self.L
            d = np.minimum(d, self.L - d)
            d2 += d ** 2
        return np.sqrt(d2)

    def inner_mask(self, radius=None):
        """Sites with ``max_i |x_i| <= radius`` (default ``L/4``)."""
        radius = self.L / 4 if radius is None else radius
        mask = np.ones(self.shape, dtype=bool)
        for x in self.mesh:
            mask &= np.abs(x) <= radius + 1e-12 * self.L
        return mask


def make_grid(n, L, N):
    return Grid(n, L, N)


@dataclass(frozen=True, eq=False)
class Field:
    """An ``R^m``-valued field sampled on ``grid``; ``values`` has shape ``grid.shape + (m,)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[:-1] != self.grid.shape or v.ndim != self.grid.n + 1:
            raise ShapeError(f"values of shape {v.shape} do not fit grid shape {self.grid.shape} + (m,)")
        if not np.all(np.isfinite(v)):
            raise DataError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self):
        return self.values.shape[-1]

    def norm(self):
        """Pointwise Euclidean norm, shape ``grid.shape``."""
        return np.sqrt(np.sum(self.values ** 2, axis=-1))

    def sup(self):
        return float(self.norm().max())

    def shifted(self, shift):
        """Cyclic shift by an integer number of sites per axis (``u(x - shift*dx)``)."""
        shift = np.broadcast_to(np.asarray(shift, dtype=int), (self.grid.n,))
        return Field(self.grid, np.roll(self.values, tuple(shift), axis=tuple(range(self.grid.n))))


def as_values(field):
    return field.values if isinstance(field, Field) else np.asarray(field, dtype=float)


def check_same(u, v):
    if u.grid != v.grid or u.m != v.m:
        raise ShapeError("fields must share grid and target dimension")


def sample_function(grid, m, f):
    """Sample ``f`` at the sites of ``grid``.

    ``f`` is called with the ``n`` coordinate arrays (ij meshgrid) and must
    return either an array of shape ``grid.shape + (m,)``, an array of shape
    ``(m,) + grid.shape``, or a sequence of ``m`` arrays.  For ``m == 1`` a
    plain array of shape ``grid.shape`` is accepted too.
    """
    out = f(*grid.mesh)
    if isinstance(out, (list, tuple)):
        out = np.stack([np.broadcast_to(np.asarray(c, dtype=float), grid.shape) for c in out], axis=-1)
    else:
        out = np.asarray(out, dtype=float)
        if out.shape == grid.shape and m == 1:
            out = out[..., None]
        elif out.shape == (m,) + grid.shape and out.shape != grid.shape + (m,):
            out = np.moveaxis(out, 0, -1)
        elif out.shape == (m,):
            out = np.broadcast_to(out, grid.shape + (m,))
    if out.shape != grid.shape + (m,):
        raise ShapeError(f"sampled function returned shape {out.shape}, expected {grid.shape + (m,)}")
    if not np.all(np.isfinite(out)):
        raise DataError("sampled function produced non-finite values")
    return Field(grid, np.array(out))


def constant_field(grid, vector):
    vector = np.asarray(vector, dtype=float)
    return Field(grid, np.broadcast_to(vector, grid.shape + vector.shape).copy())


def _lagrange4(frac):
    """Weights of the 4-point Lagrange stencil at offsets -1, 0, 1, 2."""
    f = frac
    return np.stack([
        -f * (f - 1) * (f - 2) / 6,
        (f + 1) * (f - 1) * (f - 2) / 2,
        -(f + 1) * f * (f - 2) / 2,
        (f + 1) * f * (f - 1) / 6,
    ], axis=-1)


def interpolate(field, point):
    """Periodic 4-point cubic interpolation of ``field`` at ``point``.

    ``point`` may be a single coordinate (scalar in 1D, length-``n`` vector)
    or an array of points with trailing axis ``n`` (1D also accepts a plain
    vector of positions).  Returns ``(m,)`` or ``points.shape[:-1] + (m,)``.
    """
    grid = field.grid
    p = np.asarray(point, dtype=float)
    single = False
    if grid.n == 1 and (p.ndim == 0 or p.shape[-1:] != (1,)):
        p = p[..., None]
    elif p.ndim == 1:
        single = True
        p = p[None, :]
    s = (p + grid.L / 2) / grid.spacing
    base = np.floor(s).astype(int)
    frac = s - base
    # snap to the node when the query sits on a site up to roundoff
    on_node = np.abs(frac) < 1e-12
    frac = np.where(on_node, 0.0, frac)
    near_next = np.abs(frac - 1) < 1e-12
    base = np.where(near_next, base + 1, base)
    frac = np.where(near_next, 0.0, frac)
    w = _lagrange4(frac)  # (..., n, 4)
    vals = field.values
    out = np.zeros(p.shape[:-1] + (field.m,))
    N = grid.N
    stencil = np.arange(-1, 3)
    if grid.n == 1:
        idx = (base[..., 0, None] + stencil) % N  # (..., 4)
        out = np.einsum("...k,...kc->...c", w[..., 0, :], vals[idx])
    else:
        ix = (base[..., 0, None] + stencil) % N
        iy = (base[..., 1, None] + stencil) % N
        block = vals[ix[..., :, None], iy[..., None, :]]  # (..., 4, 4, m)
        out = np.einsum("...i,...j,...ijc->...c", w[..., 0, :], w[..., 1, :], block)
    return out[0] if single else out


def window_average(values, grid, center, r):
    """Mean of a scalar field over sites whose periodic distance to ``center`` is below ``r``."""
    values = np.asarray(values, dtype=float)
    if r <= 0 or r > grid.L / 4:
        raise DomainError(f"window radius must lie in (0, L/4] = (0, {grid.L / 4}], got {r}")
    mask = grid.periodic_distance(center) < r
    if not mask.any():
        raise DomainError(f"empty window: no site within {r} of {center}")
    return values[mask].mean(axis=0)


@lru_cache(maxsize=256)
def ball_kernel(grid, r):
    """Offsets with ``|h| < r`` as a 0/1 array in FFT offset layout, and their count."""
    if r <= 0 or r > grid.L / 4 * (1 + 1e-12):
        raise DomainError(f"window radius must lie in (0, L/4], got {r}")
    mask = grid.offset_norm < r
    return mask.astype(float), int(mask.sum())


def window_average_all(values, grid, r):
    """Ball averages centred at every site, for arrays of shape ``(..., *grid.shape)``.

    Equivalent to calling :func:`window_average` at each site (up to FFT
    roundoff) but uses one circular convolution.
    """
    mask, count = ball_kernel(grid, r)
    axes = tuple(range(-grid.n, 0))
    kh = _fft.rfftn(mask, axes=axes)
    vh = _fft.rfftn(values, axes=axes)
    return _fft.irfftn(vh * kh, s=grid.shape, axes=axes) / count


@dataclass(frozen=True)
class TimeMesh:
    """Strictly increasing positive times ``t_1 < ... < t_M = T`` with constant ratio."""

    nodes: tuple
    ratio: float

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < 1 or t[0] <= 0 or np.any(np.diff(t) <= 0):
            raise ConfigurationError("time mesh nodes must be positive and strictly increasing")
        object.__setattr__(self, "nodes", tuple(float(x) for x in t))

    @classmethod
    def geometric(cls, T, M, ratio):
        """Nodes ``t_j = T * ratio**(j - M)``, ``j = 1..M``."""
        if M < 1 or ratio <= 1 or T <= 0:
            raise ConfigurationError(f"invalid geometric mesh T={T}, M={M}, ratio={ratio}")
        j = np.arange(1, M + 1)
        t = T * ratio ** (j - M).astype(float)
        t[-1] = T
        return cls(tuple(t), float(ratio))

    @classmethod
    def dyadic(cls, T, t_floor, per_octave=5):
        """Nodes ``T * 2**(-j/per_octave)`` down to the last one not below ``t_floor``.

        Meshes built from ``T`` and ``T/2`` share their nodes, which keeps
        suprema over nested horizons exactly monotone.
        """
        if T <= 0 or t_floor <= 0 or per_octave < 1:
            raise ConfigurationError("invalid dyadic mesh parameters")
        J = max(int(math.floor(per_octave * math.log2(T / t_floor) + 1e-9)), 0)
        j = np.arange(J, -1, -1)
        t = T * 2.0 ** (-j / per_octave)
        return cls(tuple(t), 2.0 ** (1.0 / per_octave))

    @cached_property
    def times(self):
        return np.asarray(self.nodes)

    @property
    def T(self):
        return self.nodes[-1]

    @property
    def t1(self):
        return self.nodes[0]

    @property
    def M(self):
        return len(self.nodes)

    def index(self, t, rtol=1e-9):
        """Index of the node equal to ``t`` (relative tolerance ``rtol``)."""
        times = self.times
        j = int(np.argmin(np.abs(times - t)))
        if abs(times[j] - t) > rtol * max(abs(t), times[j]):
            raise InterfaceError(f"t={t} is not a mesh node")
        return j


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """One field per node of ``mesh``; ``values`` has shape ``(M,) + grid.shape + (m,)``."""

    grid: Grid
    mesh: TimeMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[0] != self.mesh.M or v.shape[1:-1] != self.grid.shape:
            raise ShapeError(f"space-time values of shape {v.shape} do not match mesh M={self.mesh.M} "
                             f"and grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("space-time field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self):
        return self.values.shape[-1]

    @property
    def times(self):
        return self.mesh.times

    def frame(self, j):
        return Field(self.grid, self.values[j])

    @property
    def frames(self):
        return [self.frame(j) for j in range(self.mesh.M)]

    def at(self, t):
        return self.frame(self.mesh.index(t))


def write_field_csv(field, path):
    """Write a field snapshot: ``# n=..,L=..,N=..,m=..`` header, then one row per site."""
    g = field.grid
    data = np.concatenate([g.coords.reshape(-1, g.n), field.values.reshape(-1, field.m)], axis=1)
    header = f"n={g.n},L={g.L!r},N={g.N},m={field.m}"
    np.savetxt(path, data, delimiter=",", header=header, comments="# ", fmt="%.17g")


def read_field_csv(path):
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise DataError(f"{path}: missing '# n=..,L=..,N=..,m=..' header")
    meta = dict(kv.split("=") for kv in first[1:].strip().split(","))
    grid = Grid(int(meta["n"]), float(meta["L"]), int(meta["N"]))
    m = int(meta["m"])
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape != (grid.size, grid.n + m):
        raise DataError(f"{path}: expected {grid.size} rows of {grid.n + m} columns, got {data.shape}")
    return Field(grid, data[:, grid.n:].reshape(grid.shape + (m,)))
