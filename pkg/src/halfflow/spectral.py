"""Fourier multipliers on the periodic grid: fractional Laplacian, Poisson semigroup, gradients.

All transforms use the unitary normalization; integrals multiply by the cell
volume explicitly where they are reduced.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gamma as _gamma

from . import _fft
from .errors import ConfigurationError, DomainError, ShapeError
from .grid import Field, Grid, check_same

_SUPPORTED_S = (0.25, 0.5, 1.0)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Unitary DFT coefficients of a field; shape ``grid.shape + (m,)`` in FFT order."""

    grid: Grid
    coefficients: np.ndarray

    @property
    def m(self):
        return self.coefficients.shape[-1]

    def wavevectors(self):
        """Integer wavevectors ``k`` per axis, each of shape ``grid.shape``."""
        k = np.fft.fftfreq(self.grid.N, d=1.0 / self.grid.N).astype(int)
        return np.meshgrid(*([k] * self.grid.n), indexing="ij")


def _axes(grid):
    return tuple(range(grid.n))


def dft(field):
    return SpectralField(field.grid, _fft.fftn(field.values, axes=_axes(field.grid), norm="ortho"))


def idft(spec):
    v = _fft.ifftn(spec.coefficients, axes=_axes(spec.grid), norm="ortho")
    return Field(spec.grid, v.real)


def apply_multiplier(values, grid, mult):
    """Apply a real radial multiplier given on the ``rfftn`` half-spectrum.

    ``values`` has shape ``(..., *grid.shape, m)``; ``mult`` broadcasts
    against ``rfftn(values)``.
    """
    axes = grid.spatial_axes
    vh = _fft.rfftn(values, axes=axes)
    return _fft.irfftn(vh * mult, s=grid.shape, axes=axes)


def _check_s(s):
    for s0 in _SUPPORTED_S:
        if abs(float(s) - s0) < 1e-14:
            return s0
    raise ConfigurationError(f"fractional order s={s} not supported; use one of {_SUPPORTED_S}")


def frac_laplacian_values(values, grid, s=0.5):
    s = _check_s(s)
    return apply_multiplier(values, grid, grid.abs_xi_r ** (2 * s))


def frac_laplacian(field, s=0.5):
    """``(-Delta)^s`` as the multiplier ``|xi|^(2s)``, componentwise."""
    return Field(field.grid, frac_laplacian_values(field.values, field.grid, s))


def semigroup_multiplier(grid, t):
    if t < 0:
        raise DomainError(f"semigroup time must be non-negative, got {t}")
    return np.exp(-t * grid.abs_xi_r)


def poisson_semigroup_values(values, grid, t):
    if t < 0:
        raise DomainError(f"semigroup time must be non-negative, got {t}")
    if t == 0:
        return np.array(values, dtype=float)
    return apply_multiplier(values, grid, semigroup_multiplier(grid, t))


def poisson_semigroup(field, t):
    """``S_t u``: the multiplier ``exp(-t|xi|)`` (harmonic extension at height ``t``)."""
    return Field(field.grid, poisson_semigroup_values(field.values, field.grid, t))


def semigroup_timeline(values, grid, times):
    """``S_t`` applied for every ``t`` in ``times``; returns ``(len(times), *shape, m)``."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise DomainError("semigroup times must be non-negative")
    axes = grid.spatial_axes
    vh = _fft.rfftn(values, axes=axes)
    mult = np.exp(-times.reshape((-1,) + (1,) * (grid.n + 1)) * grid.abs_xi_r[None])
    return _fft.irfftn(vh[None] * mult, s=grid.shape, axes=axes)


def poisson_kernel(x, t, n):
    """``p_t(x) = gamma_n t / (t^2 + |x|^2)^((n+1)/2)``; ``x`` may be scalar (n=1) or an array of points."""
    if t <= 0:
        raise DomainError(f"Poisson kernel needs t > 0, got {t}")
    if n not in (1, 2):
        raise ConfigurationError(f"unsupported dimension n={n}")
    x = np.asarray(x, dtype=float)
    if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        r2 = x ** 2
    else:
        r2 = np.sum(x ** 2, axis=-1)
    g = _gamma((n + 1) / 2) / math.pi ** ((n + 1) / 2)
    out = g * t / (t * t + r2) ** ((n + 1) / 2)
    return float(out) if np.ndim(out) == 0 else out


def periodized_poisson_kernel(grid, t, images=3):
    """Image sum of ``p_t`` over ``|j_i| <= images`` periods, sampled at the offsets of ``grid``."""
    h = grid.offsets
    out = np.zeros(grid.shape)
    rng = range(-images, images + 1)
    if grid.n == 1:
        for j in rng:
            out += poisson_kernel(h + j * grid.L, t, 1)
    else:
        for j in rng:
            for k in rng:
                out += poisson_kernel(h + np.array([j, k]) * grid.L, t, 2)
    return out


def gradient_values(values, grid):
    """Spectral derivatives: shape ``(n, ..., *shape, m)``; the Nyquist mode is dropped."""
    axes = grid.spatial_axes
    vh = _fft.rfftn(values, axes=axes)
    out = []
    for ax, k in enumerate(grid.rfreqs):
        k = k.copy()
        # drop the Nyquist frequency, whose derivative is not real
        kk = np.abs(k) * grid.L / (2 * np.pi)
        k[np.isclose(kk, grid.N / 2)] = 0.0
        out.append(_fft.irfftn(1j * k * vh, s=grid.shape, axes=axes))
    return np.stack(out)


def gradient(field):
    """Tuple of ``n`` fields ``d u / d x_i``."""
    g = gradient_values(field.values, field.grid)
    return tuple(Field(field.grid, gi) for gi in g)


def grad_sq_values(values, grid):
    """Pointwise ``|grad u|^2`` summed over axes and components, shape ``(..., *shape)``."""
    g = gradient_values(values, grid)
    return np.sum(g ** 2, axis=(0, -1))


def dirichlet_form(u, v):
    """``integral u . (-Delta)^(1/2) v`` via Plancherel."""
    if not isinstance(u, Field) or not isinstance(v, Field):
        raise ShapeError("dirichlet_form expects two Fields")
    check_same(u, v)
    g = u.grid
    uh = _fft.fftn(u.values, axes=_axes(g), norm="ortho")
    vh = _fft.fftn(v.values, axes=_axes(g), norm="ortho")
    return float(g.cell_volume * np.sum(g.abs_xi[..., None] * (uh * vh.conj()).real))


def energy_half(field):
    """Half-Dirichlet energy ``(1/2) integral |(-Delta)^(1/4) u|^2``."""
    return 0.5 * dirichlet_form(field, field)
