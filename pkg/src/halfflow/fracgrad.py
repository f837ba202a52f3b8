"""Pointwise moduli of the half-order fractional gradient.

For a field ``u`` the squared modulus is

    |d u|^2(x) = (gamma_n / 2) * integral |u(x+h) - u(x)|^2 |h|^-(n+1) dh,

optionally restricted to an annulus ``r0 < |h| <= r1``.  On the grid the
integral becomes a midpoint sum over lattice offsets ``h != 0``.  The cell
around ``h = 0`` that the lattice sum cannot see is replaced by the
first-order Taylor term ``(grad u . h)^2``; its integrated weight is the
profile :func:`inner_measure`.

The lattice sum is a quadratic form in ``u`` with a translation-invariant
symmetric weight, so it expands into four terms each of which is either a
pointwise product or a circular convolution with the weight:

    sum_h w(h) (U(x)-U(x+h)).(V(x)-V(x+h))
        = W U.V - U.(w*V) - V.(w*U) + w*(U.V),    W = sum_h w(h).

That is what :func:`od_inner` evaluates with FFTs.  :func:`od_inner_direct`
does the literal per-site offset sum and serves as the reference.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.special import gamma as _gamma

from . import _fft
from .errors import DomainError, ShapeError
from .grid import Field, check_same
from .spectral import gradient_values

# Limit of (integral over the disc minus lattice midpoint sum) of h_1^2/|h|^3
# on the unit lattice, i.e. the 2D analogue of the 1D value 1.  Obtained by
# Richardson extrapolation of the lattice sum over growing discs.
LATTICE_INNER_2D = 1.9501324605


def gamma_n(n):
    """``Gamma((n+1)/2) / pi^((n+1)/2)``: 1/pi for n=1, 1/(2 pi) for n=2."""
    return _gamma((n + 1) / 2) / math.pi ** ((n + 1) / 2)


@dataclass(frozen=True)
class Annulus:
    """Offset shell ``r0 < |h| <= r1``.

    ``r1 = inf`` takes every offset in ``R^n``, which on the torus means the
    kernel summed over all periodic images.  Finite ``r1`` may not exceed
    ``L/2`` so that the shell contains no offset twice.
    """

    r0: float = 0.0
    r1: float = math.inf

    def __post_init__(self):
        if not (self.r0 >= 0 and self.r0 < self.r1):
            raise DomainError(f"annulus needs 0 <= r0 < r1, got ({self.r0}, {self.r1})")

    @property
    def unbounded(self):
        return math.isinf(self.r1)

    def resolve(self, grid):
        """Return ``(r0, r1)``; ``r1`` stays ``inf`` for the unbounded shell."""
        half = grid.L / 2
        if self.unbounded:
            if self.r0 >= half:
                raise DomainError(f"inner radius {self.r0} must stay below L/2 = {half}")
            return float(self.r0), math.inf
        if self.r1 > half * (1 + 1e-12):
            raise DomainError(f"annulus outer radius {self.r1} exceeds L/2 = {half}")
        return float(self.r0), float(self.r1)


FULL = Annulus()


def _as_annulus(annulus):
    if annulus is None:
        return FULL
    if isinstance(annulus, Annulus):
        return annulus
    r0, r1 = annulus
    return Annulus(float(r0), float(r1))


def inner_measure(r, grid):
    """Integrated Taylor weight of the offsets within radius ``r`` that the lattice misses.

    In 1D this is ``2 min(r, dx/2)``; in 2D it is ``pi r`` inside the
    inner cell and the lattice constant ``LATTICE_INNER_2D * dx`` beyond.
    """
    dx = grid.spacing
    if grid.n == 1:
        return 2.0 * min(r, dx / 2)
    return math.pi * r if r < dx / 2 else LATTICE_INNER_2D * dx


IMAGE_RANGE_2D = 16


@lru_cache(maxsize=16)
def image_kernel_sum(grid):
    """``sum_{j != 0} |h + jL|^-(n+1)`` at every minimal-image offset ``h``.

    In 1D the full image sum has the closed form ``(pi/L)^2 / sin^2(pi h/L)``.
    In 2D images with ``max|j_i| <= 16`` are summed directly and the rest of
    the plane is replaced by its integral, ``4 sqrt(2) / (a L^2)`` for the
    square of half-side ``a = 16.5 L``.
    """
    h = grid.offsets
    L = grid.L
    if grid.n == 1:
        x = h[..., 0]
        out = np.zeros(grid.shape)
        nz = x != 0
        out[nz] = (math.pi / L) ** 2 / np.sin(math.pi * x[nz] / L) ** 2 - 1.0 / x[nz] ** 2
        out[~nz] = math.pi ** 2 / (3 * L ** 2)
        return out
    J = IMAGE_RANGE_2D
    out = np.zeros(grid.shape)
    hx, hy = h[..., 0], h[..., 1]
    for jx in range(-J, J + 1):
        for jy in range(-J, J + 1):
            if jx == 0 and jy == 0:
                continue
            out += ((hx + jx * L) ** 2 + (hy + jy * L) ** 2) ** -1.5
    out += 4 * math.sqrt(2) / ((J + 0.5) * L * L ** 2)
    return out


@lru_cache(maxsize=64)
def offset_weights(grid, r0, r1):
    """Weights ``(gamma_n/2) dx^n / |h|^(n+1)`` on ``r0 < |h| <= r1`` in FFT offset layout.

    For ``r1 = inf`` every periodic image of each offset contributes.
    """
    rho = grid.offset_norm
    c = 0.5 * gamma_n(grid.n) * grid.cell_volume
    top = np.inf if math.isinf(r1) else r1 * (1 + 1e-12)
    mask = (rho > r0) & (rho <= top) & (rho > 0)
    w = np.zeros(grid.shape)
    w[mask] = c / rho[mask] ** (grid.n + 1)
    if math.isinf(r1):
        w += c * image_kernel_sum(grid)
        w[(0,) * grid.n] = 0.0
    w.setflags(write=False)
    return w


@lru_cache(maxsize=64)
def _weight_spectrum(grid, r0, r1):
    w = offset_weights(grid, r0, r1)
    wh = _fft.rfftn(w)
    return float(w.sum()), wh[..., None]


def _conv(values, wh, grid):
    axes = grid.spatial_axes
    return _fft.irfftn(_fft.rfftn(values, axes=axes) * wh, s=grid.shape, axes=axes)


def _inner_coeff(grid, r0, r1):
    return 0.5 * gamma_n(grid.n) * (inner_measure(r1, grid) - inner_measure(r0, grid))


def _lattice_form(U, V, grid, W, wh):
    axes = grid.spatial_axes
    same = U is V
    U = U - U.mean(axis=axes, keepdims=True)
    V = U if same else V - V.mean(axis=axes, keepdims=True)
    wU = _conv(U, wh, grid)
    wV = wU if same else _conv(V, wh, grid)
    UV = np.sum(U * V, axis=-1)
    wUV = _conv(UV[..., None], wh, grid)[..., 0]
    return W * UV - np.sum(U * wV, axis=-1) - np.sum(V * wU, axis=-1) + wUV


def quadratic_form_sum(U, grid, weights, V=None):
    """Pointwise ``sum_h w(h) (U(x)-U(x+h)).(V(x)-V(x+h))`` for a symmetric offset weight array."""
    U = np.asarray(U, dtype=float)
    V = U if V is None else np.asarray(V, dtype=float)
    w = np.asarray(weights, dtype=float)
    return _lattice_form(U, V, grid, float(w.sum()), _fft.rfftn(w)[..., None])


def od_inner_values(U, V, grid, annulus=None):
    """Off-diagonal inner product of arrays shaped ``(..., *grid.shape, m)``; returns ``(..., *grid.shape)``."""
    r0, r1 = _as_annulus(annulus).resolve(grid)
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if U.shape != V.shape:
        raise ShapeError(f"od_inner operands differ in shape: {U.shape} vs {V.shape}")
    W, wh = _weight_spectrum(grid, r0, r1)
    out = _lattice_form(U, V, grid, W, wh)
    c = _inner_coeff(grid, r0, r1)
    if c != 0.0:
        gU = gradient_values(U, grid)
        gV = gU if U is V else gradient_values(V, grid)
        out = out + c * np.sum(gU * gV, axis=(0, -1))
    return out


def fg_modulus_sq_values(U, grid, annulus=None):
    return od_inner_values(U, U, grid, annulus)


def od_inner(u, v, annulus=None):
    """Pointwise off-diagonal inner product of ``d u`` and ``d v`` over ``annulus``."""
    check_same(u, v)
    return od_inner_values(u.values, v.values, u.grid, annulus)


def fg_modulus_sq(field, annulus=None):
    """Pointwise ``|d u|^2`` restricted to ``annulus`` (full torus shell by default)."""
    return od_inner_values(field.values, field.values, field.grid, annulus)


def fg_grad_modulus_sq_values(U, grid):
    g = gradient_values(U, grid)
    return sum(fg_modulus_sq_values(gi, grid) for gi in g)


def fg_grad_modulus_sq(field):
    """``sum_i |d (du/dx_i)|^2`` over the full shell."""
    return fg_grad_modulus_sq_values(field.values, field.grid)


def od_inner_direct(u, v, annulus=None, sites=None):
    """Reference evaluation by explicit offset summation.

    ``sites`` is an integer array of site multi-indices (shape ``(k, n)``) or
    ``None`` for all sites.  Cost is ``N^n`` per site, so keep it to small
    grids or few sites.
    """
    check_same(u, v)
    grid = u.grid
    r0, r1 = _as_annulus(annulus).resolve(grid)
    w = offset_weights(grid, r0, r1)
    hidx = np.argwhere(w > 0)
    wv = w[tuple(hidx.T)]
    order = np.lexsort(hidx.T[::-1])
    hidx, wv = hidx[order], wv[order]
    U, V = u.values, v.values
    if sites is None:
        sites = np.argwhere(np.ones(grid.shape, dtype=bool))
    sites = np.atleast_2d(np.asarray(sites, dtype=int))
    gU = gradient_values(U, grid)
    gV = gradient_values(V, grid)
    c = _inner_coeff(grid, r0, r1)
    out = np.empty(len(sites))
    for k, s in enumerate(sites):
        nb = tuple(((s + hidx) % grid.N).T)
        s = tuple(s)
        dU = U[s] - U[nb]
        dV = V[s] - V[nb]
        val = float(np.dot(wv, np.sum(dU * dV, axis=-1)))
        val += c * float(np.sum(gU[(slice(None),) + s] * gV[(slice(None),) + s]))
        out[k] = val
    return out


def fg_modulus_sq_direct(field, annulus=None, sites=None):
    return od_inner_direct(field, field, annulus, sites)


def annulus_split_check(field, r0, r_mid, r1):
    """Largest pointwise defect of ``|du|^2_(r0,r1) = |du|^2_(r0,rm) + |du|^2_(rm,r1)``."""
    if not (r0 < r_mid < r1):
        raise DomainError(f"need r0 < r_mid < r1, got {r0}, {r_mid}, {r1}")
    whole = fg_modulus_sq(field, Annulus(r0, r1))
    a = fg_modulus_sq(field, Annulus(r0, r_mid))
    b = fg_modulus_sq(field, Annulus(r_mid, r1))
    return float(np.max(np.abs(whole - a - b)))
