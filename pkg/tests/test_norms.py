import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfflow.errors import DomainError
from halfflow.experiments import DataSpec, make_data, random_bandlimited
from halfflow.grid import Field, SpaceTimeField, TimeMesh, constant_field, make_grid, sample_function
from halfflow.norms import (besov_seminorm, bmo_seminorm, carleson_A_inf, carleson_A_seminorm, cumulative_integral,
                            decay_profile, default_sampling, dyadic_radii, lp_phi, lp_psi, q0_seminorm,
                            standard_estimate_ratio, tail_carleson_lhs, tail_carleson_oracle, xt_seminorm,
                            yt_norm)
from halfflow.solver import forcing_values
from halfflow.spectral import semigroup_timeline


@pytest.fixture(scope="module")
def g64():
    return make_grid(1, 64.0, 2048)


@pytest.fixture(scope="module")
def jump(g64):
    return make_data(DataSpec("jump-1d", angle=1.0), g64)


def semigroup_field(a, mesh):
    return SpaceTimeField(a.grid, mesh, semigroup_timeline(a.values, a.grid, mesh.times))


def test_dyadic_radii(g64):
    r = dyadic_radii(g64, 8.0)
    assert r[-1] == 8.0 and all(b == 2 * a for a, b in zip(r, r[1:]))
    assert r[0] >= 16 * g64.spacing
    with pytest.raises(DomainError):
        default_sampling(g64, g64.L / 4)


def test_cumulative_integral():
    t = np.linspace(0.1, 1.0, 50)
    D = 3 * t ** 2
    out = cumulative_integral(D, t)
    assert abs(out[-1] - (1.0 - 0.1 ** 3) - 0.1 * 0.03) <= 1e-3


def test_constant_all_zero(g64):
    c = constant_field(g64, [0.0, 1.0])
    for rep in (carleson_A_seminorm(c, 4.0), q0_seminorm(c), bmo_seminorm(c), besov_seminorm(c)):
        assert abs(rep.value) <= 1e-12
    assert max(v for _, v in decay_profile(c, [1.0, 2.0])) <= 1e-12
    assert abs(tail_carleson_oracle(c)) <= 1e-14
    assert abs(tail_carleson_lhs(c)) <= 1e-14


def test_report_json(jump):
    rep = carleson_A_seminorm(jump, 4.0)
    d = json.loads(rep.to_json())
    assert set(d) == {"value", "components", "argsup", "mesh", "meta"}
    assert d["argsup"]["r"] in d["mesh"]["r_set"]


def test_jump_scale_invariant(jump):
    per = carleson_A_seminorm(jump, 8.0).components["per_radius"]
    vals = [per[k] for k in sorted(per, key=float)]
    assert all(abs(b / a - 1) <= 0.05 for a, b in zip(vals, vals[1:]))


def test_jump_flat_across_horizons(jump):
    vals = [v for _, v in decay_profile(jump, [1.0, 2.0, 4.0, 8.0])]
    assert (max(vals) - min(vals)) / max(vals) <= 0.05


def test_wave_decays():
    g = make_grid(1, 64.0, 4096)
    w = make_data(DataSpec("sphere-wave", k=(2,)), g)
    vals = [v for _, v in decay_profile(w, [0.25, 0.5, 1.0, 2.0])]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    # A_T^2 = (1 - exp(-2 T xi)) / 2 for a wave; small T gives sqrt(T xi)
    xi = 2 * 2 * math.pi / 64
    assert abs(vals[-1] / math.sqrt(0.5 * (1 - math.exp(-4 * xi))) - 1) <= 0.03
    assert vals[0] / vals[-1] < 0.5


def test_monotone_in_T(g64):
    a = make_data(DataSpec("random-phase", seed=2, kmax=5), g64)
    vals = [v for _, v in decay_profile(a, [1.0, 2.0, 4.0, 8.0])]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


@given(st.integers(0, 2047))
def test_translation_invariance(s):
    g = make_grid(1, 64.0, 2048)
    a = make_data(DataSpec("jump-1d", angle=0.7), g)
    b = Field(g, np.roll(a.values, s, axis=0))
    assert abs(carleson_A_seminorm(a, 2.0).value - carleson_A_seminorm(b, 2.0).value) <= 1e-12
    assert abs(besov_seminorm(a).value - besov_seminorm(b).value) <= 1e-10


def test_translation_invariance_strided(g64, jump):
    # centers form a stride-8 lattice; shifts by multiples of the stride leave Q0 and BMO unchanged
    b = Field(g64, np.roll(jump.values, 8 * 37, axis=0))
    assert abs(q0_seminorm(jump).value - q0_seminorm(b).value) <= 1e-12
    assert abs(bmo_seminorm(jump).value - bmo_seminorm(b).value) <= 1e-12


@pytest.mark.parametrize("lam", [0.5, 3.0])
def test_homogeneity(g64, lam):
    a = random_bandlimited(g64, 2, 6, seed=1)
    b = Field(g64, lam * a.values)
    for f in (lambda u: carleson_A_seminorm(u, 4.0), q0_seminorm, bmo_seminorm, besov_seminorm):
        assert abs(f(b).value - lam * f(a).value) <= 1e-10 * f(b).value


def test_jump_q0_bmo_stable(jump):
    for rep in (q0_seminorm(jump), bmo_seminorm(jump)):
        per = rep.components["per_radius"]
        vals = [per[k] for k in sorted(per, key=float) if float(k) >= 1.0]
        assert rep.value > 0
        assert all(abs(b / a - 1) <= 0.05 for a, b in zip(vals, vals[1:]))


def test_q0_jump_closed_form(jump):
    # r^-1 int int over the window pair straddling one jump: 4 ln 2 |a1 - a0|^2
    size = 2 * math.sin(0.5)
    assert abs(q0_seminorm(jump).value / (math.sqrt(4 * math.log(2)) * size) - 1) <= 0.02


def test_embedding_ordering(g64, jump):
    fam = [jump, make_data(DataSpec("sphere-wave", k=(6,)), g64),
           make_data(DataSpec("random-phase", seed=0, kmax=6), g64)]
    c = []
    for a in fam:
        q = q0_seminorm(a).value
        assert carleson_A_inf(a).value <= 1.1 * q
        c.append(bmo_seminorm(a).value / q)
    assert max(c) < 1.0


def test_lp_functions():
    xi = np.linspace(0, 3, 301)
    assert np.all(lp_phi(xi[xi <= 1]) == 1) and np.all(lp_phi(xi[xi >= 2]) == 0)
    assert np.all(lp_psi(xi[(xi < 0.5) | (xi > 2)]) == 0)
    # shells sum to one on (0, inf) by telescoping
    s = sum(lp_psi(xi[1:] / 2.0 ** j) for j in range(-10, 8))
    assert np.allclose(s, 1.0)


def test_besov_single_mode():
    L = 64.0
    g = make_grid(1, L, 1024)
    k = 5
    w = make_data(DataSpec("sphere-wave", k=(k,)), g)
    rep = besov_seminorm(w)
    xi = 2 * math.pi * k / L
    for j, v in rep.components["blocks"].items():
        xj = 2 * math.pi / L * 2 ** j
        expect = math.sqrt(xj) * float(lp_psi(xi / xj)) * math.sqrt(L)
        assert abs(v - expect) <= 1e-10


def test_besov_homogeneous_flat():
    g = make_grid(2, 32.0, 256)

    def f(x, y):
        r = np.sqrt(x * x + y * y)
        r = np.where(r == 0, 1.0, r)
        taper = np.exp(-(r / 4) ** 4)
        return (x / r * taper, y / r * taper)

    blocks = besov_seminorm(sample_function(g, 2, f)).components["blocks"]
    fine = [blocks[j] for j in blocks if j >= 3]  # shells well inside the taper radius
    assert np.isfinite(fine).all() and max(fine) <= 1.25 * min(fine)


@pytest.mark.parametrize("name", ["jump", "wave", "perturbed"])
def test_tail_identity(g64, name):
    g = make_grid(1, 32.0, 2048)
    a = {"jump": make_data(DataSpec("jump-1d", angle=0.5), g),
         "wave": make_data(DataSpec("sphere-wave", k=(5,)), g),
         "perturbed": make_data(DataSpec("perturbed-constant", bump_amp=0.3), g)}[name]
    center = [g.L / 4] if name == "jump" else None
    lhs, rhs = tail_carleson_lhs(a, center), tail_carleson_oracle(a, center)
    assert abs(lhs / rhs - 1) <= 0.03


def test_xt_constant():
    g = make_grid(1, 16.0, 256)
    mesh = TimeMesh.geometric(1.0, 20, 2 ** 0.2)
    U = SpaceTimeField(g, mesh, np.broadcast_to([0.6, 0.8], (20, 256, 2)))
    rep = xt_seminorm(U)
    assert abs(rep.value) <= 1e-12
    assert abs(rep.components["norm"] - 1.0) <= 1e-12


def test_xt_wave_sup_profile():
    g = make_grid(1, 2 * math.pi, 512)
    k = 20
    a = make_data(DataSpec("sphere-wave", k=(k,)), g)
    mesh = TimeMesh.geometric(1.0, 60, 2 ** 0.1)
    rep = xt_seminorm(semigroup_field(a, mesh))
    assert abs(rep.components["sup0"] / math.sqrt(1 / (2 * math.e)) - 1) <= 0.03
    assert abs(rep.argsup["sup0"]["t"] * 2 * k - 1) <= 0.1


def test_yt_zero_and_wave():
    g = make_grid(1, 2 * math.pi, 512)
    mesh = TimeMesh.geometric(1.0, 60, 2 ** 0.1)
    zero = SpaceTimeField(g, mesh, np.zeros((60, 512, 2)))
    assert yt_norm(zero).value == 0.0
    k = 20
    a = make_data(DataSpec("sphere-wave", k=(k,)), g)
    U = semigroup_field(a, mesh)
    F = SpaceTimeField(g, mesh, forcing_values(U.values, g))
    # |f| = k exp(-3 t k): sup_t t|f| = 1/(3e)
    assert abs(yt_norm(F).components["sup_t_f"] * 3 * math.e - 1) <= 0.05


def test_yt_inverse_t_bump():
    g = make_grid(1, 16.0, 256)
    mesh = TimeMesh.geometric(1.0, 30, 2 ** 0.2)
    bump = np.exp(-g.axis ** 2)
    vals = np.stack([np.stack([bump / t, 0 * bump], axis=-1) for t in mesh.times])
    rep = yt_norm(SpaceTimeField(g, mesh, vals))
    assert abs(rep.components["sup_t_f"] - 1.0) <= 1e-12
    assert np.isfinite(rep.value)


def test_scaling_isometry():
    # u(x, t) -> u(2x, 2t): same site values on a grid of half the length
    N = 512
    g, gs = make_grid(1, 32.0, N), make_grid(1, 16.0, N)
    M, rho = 30, 2 ** 0.2
    m, ms = TimeMesh.geometric(2.0, M, rho), TimeMesh.geometric(1.0, M, rho)
    a = make_data(DataSpec("random-phase", seed=4, kmax=4), g)
    V = semigroup_timeline(a.values, g, m.times)
    r1 = xt_seminorm(SpaceTimeField(g, m, V))
    r2 = xt_seminorm(SpaceTimeField(gs, ms, V))
    for key in ("sup0", "sup1"):
        assert abs(r2.components[key] / r1.components[key] - 1) <= 0.01


def test_standard_estimate_finite(g64, jump):
    for a in (jump, make_data(DataSpec("sphere-wave", k=(8,)), g64)):
        c = standard_estimate_ratio(a, 8.0)
        assert np.isfinite(c) and 0 < c < 1
