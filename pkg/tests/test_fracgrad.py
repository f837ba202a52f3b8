import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfflow.errors import DomainError, ShapeError
from halfflow.experiments import random_bandlimited
from halfflow.fracgrad import (FULL, Annulus, annulus_split_check, fg_grad_modulus_sq, fg_modulus_sq,
                               fg_modulus_sq_direct, gamma_n, od_inner, od_inner_direct)
from halfflow.grid import Field, constant_field, make_grid, sample_function
from halfflow.spectral import dirichlet_form, poisson_kernel, poisson_semigroup


def wave(g, k):
    return sample_function(g, 2, lambda x: (np.cos(k * x), np.sin(k * x)))


def test_gamma_n():
    assert math.isclose(gamma_n(1), 1 / math.pi)
    assert math.isclose(gamma_n(2), 1 / (2 * math.pi))


@pytest.mark.parametrize("ann", [FULL, Annulus(0, 1.0), Annulus(0.5, 2.0), Annulus(1.0)])
def test_constant_zero(g1, ann):
    c = constant_field(g1, [0.6, 0.8])
    assert np.abs(fg_modulus_sq(c, ann)).max() <= 1e-13


@pytest.mark.parametrize("k", [20, 40, 60])
def test_sphere_wave_density(k):
    g = make_grid(1, 2 * np.pi, 1024)
    d = fg_modulus_sq(wave(g, k))
    assert np.abs(d / k - 1).max() <= 0.01


def test_sphere_wave_density_2d():
    g = make_grid(2, 2 * np.pi, 128)
    u = sample_function(g, 2, lambda x, y: (np.cos(12 * x + 9 * y), np.sin(12 * x + 9 * y)))
    assert np.abs(fg_modulus_sq(u) / 15 - 1).max() <= 0.01


def test_od_inner_same_path(g1):
    u = random_bandlimited(g1, 2, 8, seed=2)
    assert np.array_equal(od_inner(u, u), fg_modulus_sq(u))


def test_disjoint_components_orthogonal(g1):
    u = sample_function(g1, 2, lambda x: (1 + 0.3 * np.cos(2 * x), 0 * x))
    v = sample_function(g1, 2, lambda x: (0 * x, np.sin(5 * x)))
    assert np.abs(od_inner(u, v)).max() <= 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_integrated_identity(seed):
    g = make_grid(1, 2 * np.pi, 512)
    u = random_bandlimited(g, 2, 12, seed=seed)
    v = random_bandlimited(g, 2, 12, seed=seed + 10)
    lhs = g.cell_volume * od_inner(u, v).sum()
    rhs = dirichlet_form(u, v)
    assert abs(lhs - rhs) <= 0.01 * math.sqrt(dirichlet_form(u, u) * dirichlet_form(v, v))


def test_integrated_identity_2d():
    g = make_grid(2, 2 * np.pi, 64)
    u = random_bandlimited(g, 3, 4, seed=7)
    assert abs(g.cell_volume * fg_modulus_sq(u).sum() / dirichlet_form(u, u) - 1) <= 0.01


def test_grad_modulus_wave():
    g = make_grid(1, 2 * np.pi, 1024)
    k = 40
    assert np.abs(fg_grad_modulus_sq(wave(g, k)) / k ** 3 - 1).max() <= 0.01


def test_grad_modulus_two_modes():
    g = make_grid(1, 2 * np.pi, 1024)
    a = sample_function(g, 2, lambda x: (np.cos(8 * x), 0 * x))
    b = sample_function(g, 2, lambda x: (np.cos(100 * x), 0 * x))
    both = Field(g, a.values + b.values)
    da, db, dab = (fg_grad_modulus_sq(f) for f in (a, b, both))
    # compare cell averages so the oscillating cross terms drop out
    lhs, rhs = dab.mean(), da.mean() + db.mean()
    assert abs(lhs / rhs - 1) <= 0.02


@pytest.mark.parametrize("split", [(0.0, 0.3, 2.0), (0.1, 1.0, math.inf), (0.0, 2.0, math.inf)])
def test_annulus_split(split):
    g = make_grid(1, 2 * np.pi, 256)
    u = random_bandlimited(g, 2, 10, seed=5)
    assert annulus_split_check(u, *split) <= 1e-12
    assert annulus_split_check(constant_field(g, [1.0, 0.0]), *split) <= 1e-15


def test_annulus_errors(g1):
    u = wave(g1, 2)
    with pytest.raises(DomainError):
        fg_modulus_sq(u, Annulus(0, g1.L))
    with pytest.raises(DomainError):
        Annulus(2.0, 1.0)
    with pytest.raises(DomainError):
        fg_modulus_sq(u, Annulus(g1.L))
    with pytest.raises(ShapeError):
        od_inner(u, constant_field(make_grid(1, 1.0, 16), [1.0, 0.0]))


@pytest.mark.parametrize("ann", [FULL, Annulus(0, 1.0), Annulus(0.3)])
def test_fft_matches_direct(ann):
    g = make_grid(1, 2 * np.pi, 128)
    u = random_bandlimited(g, 2, 8, seed=1)
    v = random_bandlimited(g, 2, 8, seed=2)
    sites = np.array([[0], [17], [64], [127]])
    fast = od_inner(u, v, ann)[sites[:, 0]]
    slow = od_inner_direct(u, v, ann, sites)
    assert np.abs(fast - slow).max() <= 1e-10 * max(1.0, np.abs(slow).max())


def test_fft_matches_direct_2d():
    g = make_grid(2, 2 * np.pi, 16)
    u = random_bandlimited(g, 2, 3, seed=1)
    sites = np.array([[0, 0], [3, 11], [15, 7]])
    fast = fg_modulus_sq(u)[tuple(sites.T)]
    assert np.allclose(fast, fg_modulus_sq_direct(u, sites=sites), rtol=1e-10, atol=1e-12)


@given(st.integers(0, 1000))
def test_cauchy_schwarz(seed):
    g = make_grid(1, 2 * np.pi, 128)
    u = random_bandlimited(g, 2, 6, seed=seed)
    v = random_bandlimited(g, 2, 6, seed=seed + 1)
    ip = od_inner(u, v)
    assert np.all(ip ** 2 <= fg_modulus_sq(u) * fg_modulus_sq(v) + 1e-12)


@given(st.integers(0, 1000))
def test_bilinear(seed):
    g = make_grid(1, 2 * np.pi, 128)
    u, v, w = (random_bandlimited(g, 2, 6, seed=seed + i) for i in range(3))
    lhs = od_inner(Field(g, 2 * u.values - 3 * v.values), w)
    assert np.abs(lhs - 2 * od_inner(u, w) + 3 * od_inner(v, w)).max() <= 1e-11


def test_scaling_half_gradient():
    N = 512
    g = make_grid(1, 2 * np.pi, N)
    gs = make_grid(1, np.pi, N)
    f = lambda x: (np.cos(3 * x) + 0.2 * np.sin(7 * x), np.sin(2 * x))
    u = sample_function(g, 2, f)
    ul = sample_function(gs, 2, lambda x: f(2 * x))
    # site i of the short grid sits at x, site i of the long grid at 2x
    assert np.abs(fg_modulus_sq(ul) / (2 * fg_modulus_sq(u)) - 1).max() <= 0.01


def test_convolution_domination():
    g = make_grid(1, 2 * np.pi, 512)
    u = random_bandlimited(g, 2, 10, seed=3)
    # nonnegative unit-mass band-limited mollifier: the Fejer-like kernel S_t delta
    t = 0.2
    smooth = poisson_semigroup(u, t)
    lhs = np.sqrt(np.maximum(fg_modulus_sq(smooth), 0))
    rhs = poisson_semigroup(Field(g, np.sqrt(np.maximum(fg_modulus_sq(u), 0))[:, None]), t).values[:, 0]
    assert np.all(lhs <= rhs + 1e-3 * rhs.max())


def test_poisson_growth_local_part():
    g = make_grid(1, 200.0, 4096)
    p = sample_function(g, 1, lambda x: poisson_kernel(x, 1.0, 1))
    loc = fg_modulus_sq(p, Annulus(0, 1.0))
    x = g.axis
    inner = np.abs(x) <= g.L / 4
    weighted = loc[inner] * (1 + x[inner] ** 2)
    assert np.isfinite(weighted).all() and weighted.max() < 1.0
    # decay matches |x|^-2 times a bounded factor, not slower
    far = np.abs(x) >= 20
    assert (loc * (1 + x ** 2))[far & inner].max() <= 2 * (loc * (1 + x ** 2))[np.abs(x) <= 20].max()
