import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfflow.errors import ConfigurationError, DataError, DomainError, InterfaceError, ShapeError
from halfflow.grid import (Field, SpaceTimeField, TimeMesh, constant_field, interpolate, make_grid,
                           read_field_csv, sample_function, window_average, window_average_all, write_field_csv)


def test_make_grid_spacing():
    g = make_grid(1, 200.0, 4096)
    assert g.spacing == 200.0 / 4096
    assert g.shape == (4096,)
    g2 = make_grid(2, 40.0, 256)
    assert g2.shape == (256, 256) and g2.size == 256 ** 2


@pytest.mark.parametrize("args", [(3, 10.0, 64), (1, 10.0, 100), (1, 10.0, 8), (1, -1.0, 64)])
def test_make_grid_rejects(args):
    with pytest.raises(ConfigurationError):
        make_grid(*args)


def test_coords_centered(g1):
    x = g1.axis
    assert x[0] == -g1.L / 2
    assert np.isclose(x[-1], g1.L / 2 - g1.spacing)


def test_constant_field():
    g = make_grid(1, 8.0, 32)
    f = constant_field(g, [1.0, 0.0])
    assert np.all(f.values == np.array([1.0, 0.0]))


def test_field_validation(g1):
    with pytest.raises(ShapeError):
        Field(g1, np.zeros((10, 2)))
    bad = np.zeros(g1.shape + (2,))
    bad[3, 0] = np.nan
    with pytest.raises(DataError):
        Field(g1, bad)
    f = Field(g1, np.zeros(g1.shape + (2,)))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_sample_wave(g1):
    k = 3
    u = sample_function(g1, 2, lambda x: (np.cos(k * x), np.sin(k * x)))
    assert np.allclose(u.values[:, 0], np.cos(k * g1.axis))
    assert np.allclose(np.linalg.norm(u.values, axis=-1), 1.0)


@given(st.integers(0, 255))
def test_shift_equivariance(s):
    g = make_grid(1, 2 * np.pi, 256)
    f = lambda x: (np.cos(2 * x) + 0.3 * np.sin(5 * x), np.exp(np.sin(x)))
    shift = s * g.spacing
    a = sample_function(g, 2, lambda x: f(x - shift))
    b = sample_function(g, 2, f)
    assert np.allclose(a.values, np.roll(b.values, s, axis=0), atol=1e-12)


def test_interpolate_nodes_exact(g1):
    u = sample_function(g1, 2, lambda x: (np.cos(x), np.sin(3 * x)))
    for i in (0, 17, 255):
        assert np.array_equal(interpolate(u, g1.axis[i]), u.values[i])


def test_interpolate_linear_and_cubic():
    g = make_grid(1, 64.0, 256)
    # polynomials are only periodic-smooth away from the seam; query well inside
    for deg in range(4):
        u = sample_function(g, 2, lambda x: ((x / 8) ** deg, 1 + 0 * x))
        for x0 in (0.1234, -3.3, 5.01):
            assert abs(interpolate(u, x0)[0] - (x0 / 8) ** deg) <= 1e-10


def test_interpolate_wave_fourth_order():
    errs = []
    for N in (64, 128):
        g = make_grid(1, 2 * np.pi, N)
        u = sample_function(g, 2, lambda x: (np.cos(3 * x), np.sin(3 * x)))
        pts = np.linspace(-3, 3, 37) + 0.01
        e = max(abs(interpolate(u, p)[0] - math.cos(3 * p)) for p in pts)
        errs.append(e)
    assert errs[1] < errs[0] / 10


def test_interpolate_2d():
    g = make_grid(2, 2 * np.pi, 64)
    u = sample_function(g, 2, lambda x, y: (np.cos(x + 2 * y), np.sin(y)))
    p = np.array([0.31, -1.2])
    assert np.allclose(interpolate(u, p), [math.cos(p[0] + 2 * p[1]), math.sin(p[1])], atol=1e-4)


def test_window_average_constant(g1):
    v = np.full(g1.shape + (2,), 0.7)
    assert np.allclose(window_average(v, g1, [0.3], 1.0), 0.7)


def test_window_average_half_indicator():
    g = make_grid(1, 64.0, 1024)
    v = (g.axis >= 0).astype(float)[:, None]
    r = 4.0
    assert abs(window_average(v, g, [0.0], r)[0] - 0.5) <= g.spacing / r


def test_window_average_errors(g1):
    v = np.zeros(g1.shape + (1,))
    with pytest.raises(DomainError):
        window_average(v, g1, [0.5 * g1.spacing + 1e-9 + g1.axis[3]], 0.1 * g1.spacing)
    with pytest.raises(DomainError):
        window_average(v, g1, [0.0], g1.L)


@given(st.integers(0, 63), st.integers(0, 63))
def test_window_average_translation(s, c):
    g = make_grid(1, 16.0, 64)
    rng = np.random.default_rng(1)
    v = rng.normal(size=g.shape + (2,))
    center = g.axis[c]
    a = window_average(v, g, [center], 2.0)
    b = window_average(np.roll(v, s, axis=0), g, [g.axis[(c + s) % 64]], 2.0)
    assert np.allclose(a, b, atol=1e-13)


def test_window_average_all_matches_pointwise():
    g = make_grid(2, 8.0, 32)
    rng = np.random.default_rng(0)
    v = rng.normal(size=g.shape)
    allv = window_average_all(v, g, 1.3)
    for idx in [(0, 0), (5, 17), (31, 2)]:
        assert np.isclose(allv[idx], window_average(v, g, g.coords[idx], 1.3), atol=1e-12)


def test_time_mesh():
    m = TimeMesh.geometric(1.0, 20, 2 ** 0.2)
    assert m.M == 20 and m.T == 1.0
    assert np.allclose(m.times[1:] / m.times[:-1], 2 ** 0.2)
    assert m.index(m.times[7]) == 7
    with pytest.raises(InterfaceError):
        m.index(0.123456)
    d = TimeMesh.dyadic(1.0, 0.01, 4)
    d2 = TimeMesh.dyadic(0.5, 0.01, 4)
    assert set(np.round(d2.times, 12)) <= set(np.round(d.times, 12))
    with pytest.raises(ConfigurationError):
        TimeMesh((0.2, 0.1), 2.0)


def test_space_time_field(g1):
    mesh = TimeMesh.geometric(1.0, 4, 2.0)
    v = np.zeros((4,) + g1.shape + (2,))
    U = SpaceTimeField(g1, mesh, v)
    assert U.at(1.0).values.shape == g1.shape + (2,)
    with pytest.raises(ShapeError):
        SpaceTimeField(g1, mesh, v[:3])


def test_csv_roundtrip(tmp_path):
    g = make_grid(2, 4.0, 16)
    u = sample_function(g, 3, lambda x, y: (np.cos(x), np.sin(y), x * y / 7))
    p = tmp_path / "u.csv"
    write_field_csv(u, p)
    v = read_field_csv(p)
    assert v.grid == g and np.array_equal(v.values, u.values)
