"""Estimators for the Carleson-type seminorms, the X_T / Y_T space-time norms,
Q_0, BMO and a discrete homogeneous Besov norm.

Suprema over windows ``B_r(x)`` are taken over a dyadic radius set and a
strided site subgrid.  Time integrals ``int_0^r`` use the trapezoid rule on a
graded mesh; the segment ``(0, t_1]`` is filled with ``t_1`` times the
integrand at ``t_1``, which is exact when the window-averaged integrand is
constant near zero (self-similar data) and small otherwise.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field as dc_field
import json
import math

import numpy as np

from . import _fft
from .errors import ConfigurationError, DomainError, ShapeError
from .fracgrad import fg_grad_modulus_sq_values, fg_modulus_sq_values, gamma_n, offset_weights, quadratic_form_sum
from .grid import Field, SpaceTimeField, TimeMesh, window_average_all
from .spectral import gradient_values, grad_sq_values, semigroup_timeline

MIN_RADIUS_CELLS = 16


@dataclass
class SeminormReport:
    """Value of a seminorm estimate with its pieces and where the supremum was attained."""

    value: float
    components: dict = dc_field(default_factory=dict)
    argsup: dict = dc_field(default_factory=dict)
    mesh: dict = dc_field(default_factory=dict)
    meta: dict = dc_field(default_factory=dict)

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


@dataclass(frozen=True)
class SupSampling:
    """Radii, site stride and time mesh used to approximate ``sup_{r,x}`` and ``int_0^r``."""

    r_set: tuple
    x_stride: int
    t_mesh: TimeMesh

    def __post_init__(self):
        if len(self.r_set) == 0:
            raise DomainError("radius set is empty; the grid is too coarse for the requested horizon")
        if self.x_stride < 1:
            raise ConfigurationError("x_stride must be >= 1")


def dyadic_radii(grid, T):
    """``{T, T/2, ...}`` intersected with ``[16 dx, L/4]``, ascending."""
    lo, hi = MIN_RADIUS_CELLS * grid.spacing, grid.L / 4
    r, out = float(T), []
    while r >= lo * (1 - 1e-12):
        if r <= hi * (1 + 1e-12):
            out.append(r)
        r /= 2
    return tuple(sorted(out))


def default_sampling(grid, T, x_stride=1, per_octave=5, t_floor=None):
    """Dyadic radii with a dyadic-anchored time mesh reaching down to ``dx/2``."""
    if T > grid.L / 8 * (1 + 1e-12):
        raise DomainError(f"horizon T={T} exceeds L/8 = {grid.L / 8}")
    t_floor = grid.spacing / 2 if t_floor is None else t_floor
    return SupSampling(dyadic_radii(grid, T), int(x_stride), TimeMesh.dyadic(T, t_floor, per_octave))


def cumulative_integral(D, times):
    """Running ``int_0^{t_k} D dt`` with the head ``t_1 D_1``; ``D`` has a leading time axis."""
    times = np.asarray(times, dtype=float)
    out = np.empty_like(D)
    out[0] = times[0] * D[0]
    for k in range(1, len(times)):
        out[k] = out[k - 1] + 0.5 * (times[k] - times[k - 1]) * (D[k] + D[k - 1])
    return out


def _strided(grid, stride):
    return (slice(None, None, stride),) * grid.n


def _site_coords(grid, flat_index, stride):
    idx = np.unravel_index(flat_index, tuple(-(-grid.N // stride) for _ in range(grid.n)))
    return [float(grid.axis[i * stride]) for i in idx]


def _window_sup(I, grid, r, stride):
    avg = window_average_all(I, grid, r)[_strided(grid, stride)]
    k = int(np.argmax(avg))
    return float(avg.flat[k]), _site_coords(grid, k, stride)


def _density_timeline(values, grid, times):
    V = semigroup_timeline(values, grid, times)
    return fg_modulus_sq_values(V, grid)


def _carleson_by_radius(a, times, radii, stride):
    grid = a.grid
    D = _density_timeline(a.values, grid, times)
    I = cumulative_integral(D, times)
    head = times[0] * D[0]
    rows = []
    for r in radii:
        k = int(np.argmin(np.abs(times - r)))
        if abs(times[k] - r) > 1e-9 * r:
            raise DomainError(f"radius {r} is not a node of the time mesh")
        avg = window_average_all(I[k], grid, r)[_strided(grid, stride)]
        j = int(np.argmax(avg))
        val = float(avg.flat[j])
        # share of the (0, t_1] surrogate in the window attaining the sup
        hk = float(window_average_all(head, grid, r)[_strided(grid, stride)].flat[j])
        rows.append((r, val, _site_coords(grid, j, stride), hk / val if val > 0 else 0.0))
    return rows


def carleson_A_seminorm(a, T, sampling=None):
    """Estimate ``[a]_{A_T}`` = sup over ``r <= T`` and ``x`` of ``(int_0^r avg_{B_r(x)} |d S_t a|^2 dt)^(1/2)``."""
    grid = a.grid
    if sampling is None:
        sampling = default_sampling(grid, T)
    elif T > grid.L / 8 * (1 + 1e-12):
        raise DomainError(f"horizon T={T} exceeds L/8 = {grid.L / 8}")
    radii = [r for r in sampling.r_set if r <= T * (1 + 1e-12)]
    if not radii:
        raise DomainError(f"no sampled radius below T={T}")
    rows = _carleson_by_radius(a, sampling.t_mesh.times, radii, sampling.x_stride)
    best = max(rows, key=lambda row: row[1])
    value_sq = max(best[1], 0.0)
    return SeminormReport(
        value=math.sqrt(value_sq),
        components={"carleson_sq": value_sq, "head_share": best[3],
                    "per_radius": {repr(r): math.sqrt(max(v, 0.0)) for r, v, _, _ in rows}},
        argsup={"x": best[2], "r": best[0]},
        mesh={"T": T, "r_set": list(radii), "x_stride": sampling.x_stride,
              "t_nodes": sampling.t_mesh.M, "t1": sampling.t_mesh.t1, "ratio": sampling.t_mesh.ratio},
    )


def carleson_A_inf(a, **kw):
    """Torus surrogate of ``[a]_{A_infinity}``: the largest admissible horizon ``L/8``."""
    return carleson_A_seminorm(a, a.grid.L / 8, **kw)


def decay_profile(a, T_list, x_stride=1, per_octave=5):
    """``[a]_{A_T}`` for each ``T``; monotone in ``T`` because radius sets are nested.

    All horizons share one table of radius-wise suprema computed on a time
    mesh containing every sampled radius as a node.
    """
    grid = a.grid
    T_list = sorted(float(T) for T in T_list)
    if T_list[-1] > grid.L / 8 * (1 + 1e-12):
        raise DomainError(f"horizon {T_list[-1]} exceeds L/8 = {grid.L / 8}")
    t_floor = grid.spacing / 2
    nodes = set()
    for T in T_list:
        nodes.update(np.round(TimeMesh.dyadic(T, t_floor, per_octave).times, 15))
    times = np.array(sorted(nodes))
    radii = sorted({r for T in T_list for r in dyadic_radii(grid, T)})
    if not radii:
        raise DomainError("no admissible radius for the requested horizons")
    rows = _carleson_by_radius(a, times, radii, x_stride)
    table = []
    for T in T_list:
        vals = [v for r, v, _, _ in rows if r <= T * (1 + 1e-12)]
        table.append((T, math.sqrt(max(max(vals), 0.0)) if vals else 0.0))
    return table


def _frame_radius(grid, t):
    lo, hi = MIN_RADIUS_CELLS * grid.spacing, grid.L / 4
    return min(max(t, min(lo, hi)), hi)


def _carleson_over_frames(I, grid, times, stride):
    best, arg = -np.inf, None
    for k, t in enumerate(times):
        val, x = _window_sup(I[k], grid, _frame_radius(grid, t), stride)
        if val > best:
            best, arg = val, {"x": x, "t": float(t)}
    return best, arg


def _sup_over(P, grid, times, stride):
    sub = P[(slice(None),) + _strided(grid, stride)]
    k = int(np.argmax(sub))
    j, rest = np.unravel_index(k, sub.shape)[0], np.unravel_index(k, sub.shape)[1:]
    return float(sub.flat[k]), {"x": [float(grid.axis[i * stride]) for i in rest], "t": float(times[j])}


def _as_spacetime(U):
    if not isinstance(U, SpaceTimeField):
        raise ShapeError("expected a SpaceTimeField")
    return U.grid, U.mesh.times, U.values


def xt_seminorm(U, x_stride=1):
    """Four-piece X_T seminorm plus the sup norm of a space-time field."""
    grid, times, V = _as_spacetime(U)
    tcol = times.reshape((-1,) + (1,) * grid.n)
    D0 = np.maximum(fg_modulus_sq_values(V, grid), 0.0)
    D1 = np.maximum(fg_grad_modulus_sq_values(V, grid), 0.0)
    sup0, arg0 = _sup_over(np.sqrt(tcol * D0), grid, times, x_stride)
    sup1, arg1 = _sup_over(np.sqrt(tcol ** 3 * D1), grid, times, x_stride)
    c0, carg0 = _carleson_over_frames(cumulative_integral(D0, times), grid, times, x_stride)
    c1, carg1 = _carleson_over_frames(cumulative_integral(tcol ** 2 * D1, times), grid, times, x_stride)
    c0, c1 = math.sqrt(max(c0, 0.0)), math.sqrt(max(c1, 0.0))
    supnorm = float(np.sqrt(np.sum(V ** 2, axis=-1)).max())
    semi = sup0 + c0 + sup1 + c1
    return SeminormReport(
        value=semi,
        components={"sup0": sup0, "carleson0": c0, "sup1": sup1, "carleson1": c1,
                    "x0": sup0 + c0, "x1": sup1 + c1, "supnorm": supnorm, "norm": supnorm + semi},
        argsup={"sup0": arg0, "carleson0": carg0, "sup1": arg1, "carleson1": carg1},
        mesh=_mesh_info(U, x_stride),
    )


def yt_norm(F, x_stride=1):
    """Y_T pieces of a forcing timeline; ``value`` is the full norm (norm part plus seminorm part)."""
    grid, times, V = _as_spacetime(F)
    tcol = times.reshape((-1,) + (1,) * grid.n)
    absf = np.sqrt(np.sum(V ** 2, axis=-1))
    gradf = np.sqrt(np.maximum(grad_sq_values(V, grid), 0.0))
    sup_f, arg_f = _sup_over(tcol * absf, grid, times, x_stride)
    car_f, carg_f = _carleson_over_frames(cumulative_integral(absf, times), grid, times, x_stride)
    sup_g, arg_g = _sup_over(tcol ** 2 * gradf, grid, times, x_stride)
    car_g, carg_g = _carleson_over_frames(cumulative_integral(tcol * gradf, times), grid, times, x_stride)
    norm = sup_f + car_f
    semi = sup_g + car_g
    return SeminormReport(
        value=norm + semi,
        components={"sup_t_f": sup_f, "carleson_f": car_f, "sup_t2_grad": sup_g,
                    "carleson_s_grad": car_g, "norm_part": norm, "seminorm_part": semi},
        argsup={"sup_t_f": arg_f, "carleson_f": carg_f, "sup_t2_grad": arg_g, "carleson_s_grad": carg_g},
        mesh=_mesh_info(F, x_stride),
    )


def _mesh_info(U, stride):
    return {"M": U.mesh.M, "t1": U.mesh.t1, "T": U.mesh.T, "ratio": U.mesh.ratio,
            "x_stride": stride, "N": U.grid.N, "L": U.grid.L, "n": U.grid.n}


def q0_radii(grid, r_max=None):
    """Dyadic radii ``L/4, L/8, ...`` down to ``16 dx`` (or below ``r_max``)."""
    r_max = grid.L / 4 if r_max is None else r_max
    return dyadic_radii(grid, r_max)


def default_center_stride(grid, max_centers=256):
    s = 1
    while (grid.N // s) ** grid.n > max_centers:
        s *= 2
    return s


def _local_blocks(values, grid, centers, K):
    """Periodic blocks of half-width ``K`` sites around each center index."""
    off = np.arange(-K, K + 1)
    if grid.n == 1:
        idx = (centers[:, 0, None] + off) % grid.N
        return values[idx]
    ix = (centers[:, 0, None] + off) % grid.N
    iy = (centers[:, 1, None] + off) % grid.N
    return values[ix[:, :, None], iy[:, None, :]]


def _center_indices(grid, stride):
    ax = np.arange(0, grid.N, stride)
    return np.stack(np.meshgrid(*([ax] * grid.n), indexing="ij"), axis=-1).reshape(-1, grid.n)


def _ball_offsets(grid, K, r):
    off = np.arange(-K, K + 1) * grid.spacing
    if grid.n == 1:
        d = np.abs(off)
    else:
        d = np.sqrt(off[:, None] ** 2 + off[None, :] ** 2)
    return d < r


def _q0_diag_coeff(grid):
    # integral of (h.e)^2/|h|^n over pairs inside one cell
    dx = grid.spacing
    return dx ** 3 / 3 if grid.n == 1 else 0.5 * dx ** 4


def _q0_weight_kernel(grid, K):
    off = np.arange(-2 * K, 2 * K + 1) * grid.spacing
    if grid.n == 1:
        d = np.abs(off)
    else:
        d = np.sqrt(off[:, None] ** 2 + off[None, :] ** 2)
    w = np.zeros_like(d)
    nz = d > 0
    w[nz] = grid.spacing ** (2 * grid.n) / d[nz] ** grid.n
    return w


def _conv_same(blocks, w, n):
    from scipy.signal import fftconvolve
    axes = tuple(range(1, n + 1))
    K2 = (w.shape[0] - 1) // 2
    full = fftconvolve(blocks, w.reshape((1,) + w.shape + (1,) * (blocks.ndim - n - 1)), axes=axes)
    sl = (slice(None),) + (slice(K2, K2 + blocks.shape[1]),) * n
    return full[sl]


def q0_local_values(a, r, stride=None, chunk=64):
    """``r^-n int int_{B_r x B_r} |a(y)-a(z)|^2 |y-z|^-n`` at every strided center."""
    grid = a.grid
    stride = default_center_stride(grid) if stride is None else stride
    K = int(math.ceil(r / grid.spacing))
    mask = _ball_offsets(grid, K, r).astype(float)
    w = _q0_weight_kernel(grid, K)
    gsq = grad_sq_values(a.values, grid)
    centers = _center_indices(grid, stride)
    out = np.empty(len(centers))
    diag = _q0_diag_coeff(grid)
    for s in range(0, len(centers), chunk):
        c = centers[s:s + chunk]
        A = _local_blocks(a.values, grid, c, K) * mask[None, ..., None]
        A = A - A.sum(axis=tuple(range(1, grid.n + 1)), keepdims=True) / mask.sum()
        A = A * mask[None, ..., None]
        sq = np.sum(A ** 2, axis=-1)
        wm = _conv_same(np.broadcast_to(mask, (1,) + mask.shape)[..., None], w, grid.n)[0, ..., 0]
        wA = _conv_same(A, w, grid.n)
        axes = tuple(range(1, grid.n + 1))
        Q = 2 * np.sum(sq * wm[None], axis=axes) - 2 * np.sum(A * wA, axis=axes + (grid.n + 1,))
        G = _local_blocks(gsq[..., None], grid, c, K)[..., 0]
        Q = Q + diag * np.sum(G * mask[None], axis=axes)
        out[s:s + chunk] = Q / r ** grid.n
    return centers, out


def q0_seminorm(a, sampling=None, stride=None):
    """Estimate ``||a||_{Q_0}`` as the sup over sampled centers and radii."""
    grid = a.grid
    radii = q0_radii(grid) if sampling is None else sampling.r_set
    if sampling is not None and stride is None:
        stride = sampling.x_stride
    stride = default_center_stride(grid) if stride is None else stride
    best, arg, per = -np.inf, None, {}
    for r in radii:
        centers, Q = q0_local_values(a, r, stride)
        k = int(np.argmax(Q))
        per[repr(r)] = math.sqrt(max(Q[k], 0.0))
        if Q[k] > best:
            best, arg = Q[k], {"x": [float(grid.axis[i]) for i in centers[k]], "r": r}
    return SeminormReport(
        value=math.sqrt(max(best, 0.0)),
        components={"q0_sq": float(best), "per_radius": per},
        argsup=arg,
        mesh={"r_set": list(radii), "x_stride": stride},
        meta={"normalization": "r^-n double integral over B_r x B_r, weight |y-z|^-n, square root"},
    )


def bmo_seminorm(a, sampling=None, stride=None, chunk=64):
    """Sup over sampled windows of the mean L^1 oscillation ``avg_B |a - a_B|``."""
    grid = a.grid
    radii = q0_radii(grid) if sampling is None else sampling.r_set
    if sampling is not None and stride is None:
        stride = sampling.x_stride
    stride = default_center_stride(grid) if stride is None else stride
    centers = _center_indices(grid, stride)
    best, arg, per = -np.inf, None, {}
    for r in radii:
        K = int(math.ceil(r / grid.spacing))
        mask = _ball_offsets(grid, K, r)
        cnt = mask.sum()
        vals = np.empty(len(centers))
        for s in range(0, len(centers), chunk):
            B = _local_blocks(a.values, grid, centers[s:s + chunk], K)[:, mask]
            mean = B.mean(axis=1, keepdims=True)
            vals[s:s + chunk] = np.sqrt(np.sum((B - mean) ** 2, axis=-1)).sum(axis=1) / cnt
        k = int(np.argmax(vals))
        per[repr(r)] = float(vals[k])
        if vals[k] > best:
            best, arg = float(vals[k]), {"x": [float(grid.axis[i]) for i in centers[k]], "r": r}
    return SeminormReport(value=best, components={"per_radius": per}, argsup=arg,
                          mesh={"r_set": list(radii), "x_stride": stride},
                          meta={"normalization": "mean L1 oscillation over B_r(x)"})


def _smooth_step(s):
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        e0 = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        e1 = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return e0 / (e0 + e1)


def lp_phi(xi):
    """Smooth radial cut-off: 1 on ``|xi| <= 1``, 0 on ``|xi| >= 2``."""
    return 1.0 - _smooth_step(np.abs(xi) - 1.0)


def lp_psi(xi):
    """Dyadic shell function ``phi(xi) - phi(2 xi)``, supported in ``1/2 <= |xi| <= 2``."""
    return lp_phi(xi) - lp_phi(2 * xi)


def besov_seminorm(a):
    """``sup_j xi_j^(n/2) ||Delta_j a||_2`` with blocks centred at ``xi_j = 2^j (2 pi / L)``."""
    grid = a.grid
    xi0 = 2 * math.pi / grid.L
    K = int(round(math.log2(grid.N / 4)))
    ah = _fft.fftn(a.values, axes=tuple(range(grid.n)), norm="ortho")
    power = np.sum(np.abs(ah) ** 2, axis=-1)
    xi = grid.abs_xi
    blocks = {}
    for j in range(K + 1):
        xj = xi0 * 2 ** j
        l2 = math.sqrt(grid.cell_volume * float(np.sum(lp_psi(xi / xj) ** 2 * power)))
        blocks[j] = xj ** (grid.n / 2) * l2
    jbest = max(blocks, key=blocks.get)
    return SeminormReport(value=blocks[jbest], components={"blocks": blocks},
                          argsup={"j": jbest, "xi": xi0 * 2 ** jbest},
                          mesh={"K_max": K, "xi0": xi0},
                          meta={"weight": "xi_j^(n/2)"})


def _tail_center_mask(grid, center):
    return grid.periodic_distance(center) < 1.0


def tail_carleson_oracle(a, center=None):
    """``int_{B_1} int min(|h|,1) (gamma_n/2) |a(x+h)-a(x)|^2 |h|^-(n+1) dh dx`` by one double sum."""
    grid = a.grid
    if grid.L < 8:
        raise DomainError(f"unit window needs L >= 8, got L={grid.L}")
    center = np.zeros(grid.n) if center is None else center
    # periodic images all lie beyond |h| = L/2 >= 1, where min(|h|, 1) = 1
    w = offset_weights(grid, 0.0, math.inf) - offset_weights(grid, 0.0, grid.L / 2) * (
        1.0 - np.minimum(grid.offset_norm, 1.0))
    dens = quadratic_form_sum(a.values, grid, w)
    # cell |h| < dx/2 by the Taylor term, weight |h| (h.e)^2 / |h|^(n+1)
    cell = grid.spacing ** 2 / 4 if grid.n == 1 else math.pi * grid.spacing ** 2 / 8
    dens = dens + 0.5 * gamma_n(grid.n) * cell * grad_sq_values(a.values, grid)
    mask = _tail_center_mask(grid, center)
    return float(grid.cell_volume * dens[mask].sum())


def tail_carleson_lhs(a, center=None, per_octave=16):
    """``int_0^1 int_{B_1} (|d a|^(t, L/2))^2 dx dt`` by graded quadrature in ``t``."""
    grid = a.grid
    if grid.L < 8:
        raise DomainError(f"unit window needs L >= 8, got L={grid.L}")
    center = np.zeros(grid.n) if center is None else center
    mask = _tail_center_mask(grid, center)
    times = TimeMesh.dyadic(1.0, grid.spacing / 8, per_octave).times
    from .fracgrad import Annulus
    F = np.array([grid.cell_volume * fg_modulus_sq_values(a.values, grid, Annulus(t, math.inf))[mask].sum()
                  for t in times])
    return float(cumulative_integral(F, times)[-1])


def standard_estimate_ratio(a, T, sampling=None):
    """``sup_t t ||d S_t a||_inf^2 / [a]_{A_T}^2`` on the sampling mesh (``nan`` if the seminorm vanishes)."""
    grid = a.grid
    sampling = default_sampling(grid, T) if sampling is None else sampling
    times = sampling.t_mesh.times
    D = _density_timeline(a.values, grid, times)
    lhs = float(np.max(times.reshape((-1,) + (1,) * grid.n) * D))
    rep = carleson_A_seminorm(a, T, sampling)
    return lhs / rep.value ** 2 if rep.value > 0 else float("nan")
