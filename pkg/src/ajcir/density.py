"""Heat kernels by Fourier inversion, boundary weights and anisotropic norms.

One-dimensional densities come from

    p_t(x, y) = (1/pi) Re int_0^inf exp(-i y u) E[exp(i u X^x(t))] du

with the characteristic function from the Riccati solver. The u-grid is
cut at the first point where the integrand modulus drops below
``trunc_tol``; its step is ``pi / (1.1 y_max)`` or finer so that the FFT
period exceeds twice the y-window.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._fourier import fft_plan, invert_on_grid
from .errors import (DegenerateFitError, DomainError, GridTooCoarseError,
                     TruncationError)
from .model import ModelParams, check_condition_a, validate
from .riccati import _as_u, invariant_char, riccati_grid

TRUNC_TOL = 1e-12
DENSITY_RTOL = 1e-8
U_CAP = 1e6
CLIP_SUSPECT = 1e-4


# -- grids ------------------------------------------------------------------------

@dataclass(frozen=True)
class Axis:
    origin: float
    step: float
    count: int

    @property
    def points(self):
        return self.origin + self.step * np.arange(self.count)

    @property
    def end(self):
        return self.origin + self.step * (self.count - 1)

    @classmethod
    def coerce(cls, a):
        if isinstance(a, Axis):
            return a
        if isinstance(a, tuple) and len(a) == 3:
            return cls(float(a[0]), float(a[1]), int(a[2]))
        y = np.asarray(a, dtype=float)
        if y.ndim != 1 or y.size < 2:
            raise DomainError("an axis needs at least two points")
        d = np.diff(y)
        if not np.allclose(d, d[0], rtol=1e-9, atol=0.0) or d[0] <= 0:
            raise DomainError("axis points must be uniformly increasing")
        return cls(float(y[0]), float(d[0]), int(y.size))

    def to_dict(self):
        return {"origin": self.origin, "step": self.step, "count": self.count}


def _trapz_nd(values, axes):
    out = values
    for k in range(len(axes) - 1, -1, -1):
        out = np.trapezoid(out, dx=axes[k].step, axis=k)
    return float(out)


@dataclass
class DensityGrid:
    """Values of a (possibly weighted) density on a product grid."""
    axes: tuple
    values: np.ndarray
    weight: Optional[dict] = None
    clipped_mass: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def dims(self):
        return len(self.axes)

    def points(self, k=0):
        return self.axes[k].points

    def integral(self):
        return _trapz_nd(self.values, self.axes)

    @property
    def suspect(self):
        """True when clipping removed more than 1e-4 of the total mass."""
        return self.clipped_mass > CLIP_SUSPECT * max(abs(self.integral()), 1e-300)

    def header(self):
        return {"dims": self.dims, "axes": [a.to_dict() for a in self.axes],
                "weight": self.weight, "clipped_mass": self.clipped_mass,
                "suspect": bool(self.suspect), "diagnostics": self.diagnostics}

    def rows(self):
        mesh = np.meshgrid(*[a.points for a in self.axes], indexing="ij")
        cols = [g.reshape(-1) for g in mesh] + [self.values.reshape(-1)]
        return np.column_stack(cols)

    def write(self, csv_path, json_path=None):
        names = [f"y{k}" for k in range(self.dims)] + ["value"]
        with open(csv_path, "w") as fh:
            fh.write(",".join(names) + "\n")
            for row in self.rows():
                fh.write(",".join("%.17g" % v for v in row) + "\n")
        if json_path is not None:
            with open(json_path, "w") as fh:
                json.dump(self.header(), fh, indent=2, sort_keys=True, default=float)


def _clip(values, axes):
    neg = np.minimum(values, 0.0)
    clipped = -_trapz_nd(neg, axes) if np.any(neg < 0) else 0.0
    return np.maximum(values, 0.0), clipped


# -- anisotropy and boundary weight ---------------------------------------------------

@dataclass(frozen=True)
class Anisotropy:
    alpha_bar: float
    a: tuple


def anisotropy(alpha) -> Anisotropy:
    """Harmonic mean of the indices and the axis weights a_i = alpha_bar/alpha_i."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if np.any(alpha <= 1.0) or np.any(alpha >= 2.0):
        raise DomainError("every alpha_i must lie in (1, 2)")
    abar = 1.0 / np.mean(1.0 / alpha)
    return Anisotropy(float(abar), tuple(float(v) for v in abar / alpha))


def rho_delta(y, delta, alpha):
    """min(delta, y_1^(1/alpha_1), ..., y_m^(1/alpha_m)) on the orthant, 0 off it."""
    y = np.asarray(y, dtype=float)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if y.ndim == 0:
        y = y[None]
    inside = np.all(y >= 0.0, axis=-1)
    pw = np.where(y >= 0.0, np.abs(y), 0.0) ** (1.0 / alpha)
    out = np.where(inside, np.minimum(delta, pw.min(axis=-1)), 0.0)
    return float(out) if out.ndim == 0 else out


# -- characteristic-function grids -----------------------------------------------------

def _check_immigration(params):
    try:
        rep = check_condition_a(params)
        ok = rep.overall
    except DegenerateFitError:
        ok = False
    if not ok:
        warnings.warn("the immigration lower bound looks violated; the "
                      "characteristic function may not decay", RuntimeWarning)


def _u_cutoff(modulus, du, trunc_tol, u_cap):
    """First u = j du (grid point) with modulus(j) < trunc_tol, by probe and bisection."""
    j_hi = 1
    lo = 0
    while True:
        if j_hi * du > u_cap:
            raise TruncationError(f"characteristic function stays above {trunc_tol:g} "
                                  f"up to u = {u_cap:g}")
        if modulus(np.array([j_hi]))[0] < trunc_tol:
            break
        lo = j_hi
        j_hi *= 2
    while j_hi - lo > max(1, j_hi // 64):
        mid = (lo + j_hi) // 2
        if modulus(np.array([mid]))[0] < trunc_tol:
            j_hi = mid
        else:
            lo = mid
    return j_hi


@dataclass
class CharGrid:
    """phi and psi at ``times`` on the u-grid ``j du``, j = 0..n_u-1."""
    du: float
    n_fft: int
    times: np.ndarray
    phi: np.ndarray          # (n_u, nt)
    psi: np.ndarray          # (n_u, nt)
    u_max: float

    @property
    def u(self):
        return self.du * np.arange(self.phi.shape[0])

    def chi(self, ti, x):
        return np.exp(self.phi[:, ti] + x * self.psi[:, ti])


def _grid_plan(axis: Axis, y_extent=None):
    y_max = max(abs(axis.origin), abs(axis.end)) if y_extent is None else y_extent
    if not y_max > 0:
        raise DomainError("the y-window must not be a single point at 0")
    return fft_plan(axis.step, math.pi / (1.1 * y_max), axis.count)


def char_grid_1d(params: ModelParams, xs, times, axis, trunc_tol=TRUNC_TOL,
                 tol=DENSITY_RTOL, u_cap=U_CAP, n_deriv=0, k_deriv=0):
    """Riccati solutions on the inversion u-grid for all start points ``xs``.

    The cutoff is the first grid u where max over ``xs`` and ``times`` of
    |chi psi^n u^k| falls below ``trunc_tol``.
    """
    if params.m != 1:
        raise DomainError("one-dimensional models only")
    validate(params).raise_if_invalid()
    axis = Axis.coerce(axis)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times <= 0):
        raise DomainError("t must be positive")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs < 0):
        raise DomainError("x must be nonnegative")
    n_fft, du = _grid_plan(axis)
    x_min = float(xs.min())

    def solve(j):
        U = (1j * du * j.astype(float))[:, None]
        phi, psi = riccati_grid(params, U, times, rtol=tol, atol=1e-12)
        return phi, psi[..., 0]

    def modulus(j):
        phi, psi = solve(j)
        val = np.abs(np.exp(phi + x_min * psi) * psi ** n_deriv) \
            * (du * j[:, None]) ** k_deriv
        return val.max(axis=1)

    j_cut = _u_cutoff(modulus, du, trunc_tol, u_cap)
    phi, psi = solve(np.arange(j_cut + 1))
    return CharGrid(du, n_fft, times, phi, psi, du * j_cut)


def _invert(cg: CharGrid, integrand, axis: Axis):
    return invert_on_grid(integrand, cg.du, axis.origin, axis.step, axis.count)


def _diag(cg, trunc_tol):
    return {"u_max": cg.u_max, "du": cg.du, "n_u": int(cg.phi.shape[0]),
            "trunc_tol": trunc_tol}


def heat_kernel_1d(params: ModelParams, x, t, y_axis, trunc_tol=TRUNC_TOL,
                   tol=DENSITY_RTOL, u_cap=U_CAP) -> DensityGrid:
    """Transition density y -> p_t(x, y) on a uniform grid."""
    return heat_kernel_derivative_1d(params, x, t, y_axis, 0, 0, trunc_tol, tol, u_cap)


def heat_kernel_derivative_1d(params: ModelParams, x, t, y_axis, n=0, k=0,
                              trunc_tol=TRUNC_TOL, tol=DENSITY_RTOL,
                              u_cap=U_CAP) -> DensityGrid:
    """d^n/dx^n d^k/dy^k p_t(x, y): the integrand gains psi^n (-i u)^k."""
    if n < 0 or k < 0 or n + k > 4:
        raise DomainError("derivative orders must satisfy 0 <= n + k <= 4")
    _check_immigration(params)
    axis = Axis.coerce(y_axis)
    cg = char_grid_1d(params, [x], [t], axis, trunc_tol, tol, u_cap, n, k)
    vals = _kernel_from_grid(cg, 0, float(x), axis, n, k)
    diag = _diag(cg, trunc_tol)
    diag.update({"x": float(x), "t": float(t), "n": n, "k": k})
    if n == 0 and k == 0:
        vals, clipped = _clip(vals, (axis,))
        return DensityGrid((axis,), vals, None, clipped, diag)
    return DensityGrid((axis,), vals, None, 0.0, diag)


def _kernel_from_grid(cg, ti, x, axis, n=0, k=0):
    f = cg.chi(ti, x)
    if n:
        f = f * cg.psi[:, ti] ** n
    if k:
        f = f * (-1j * cg.u) ** k
    return _invert(cg, f, axis)


def heat_kernels_1d(params, xs, times, y_axis, trunc_tol=TRUNC_TOL, tol=DENSITY_RTOL,
                    u_cap=U_CAP):
    """p_t(x, .) for every x in ``xs`` and t in ``times`` from one Riccati solve.

    Returns an array (len(times), len(xs), n_y), negative values clipped.
    """
    axis = Axis.coerce(y_axis)
    cg = char_grid_1d(params, xs, times, axis, trunc_tol, tol, u_cap)
    out = np.empty((len(cg.times), len(xs), axis.count))
    for ti in range(len(cg.times)):
        for i, x in enumerate(xs):
            out[ti, i] = np.maximum(_kernel_from_grid(cg, ti, float(x), axis), 0.0)
    return out


def chapman_kolmogorov_defect(params, x, s, t, y_axis, **kw):
    """L1 distance between int p_s(x,z) p_t(z,.) dz and p_(s+t)(x,.) on the window.

    The z-integral runs over the same grid as y.
    """
    axis = Axis.coerce(y_axis)
    z = axis.points
    if z[0] < 0:
        raise DomainError("the window must start at a nonnegative point")
    times = sorted({float(s), float(t), float(s + t)})
    cg = char_grid_1d(params, np.concatenate([[x], z]), times, axis, **kw)
    ti = {v: i for i, v in enumerate(times)}
    ps = np.maximum(_kernel_from_grid(cg, ti[float(s)], float(x), axis), 0.0)
    pst = np.maximum(_kernel_from_grid(cg, ti[float(s + t)], float(x), axis), 0.0)
    w = np.full(axis.count, axis.step)
    w[0] = w[-1] = 0.5 * axis.step
    conv = np.zeros(axis.count)
    for j, zj in enumerate(z):
        if ps[j] == 0.0:
            continue
        conv += w[j] * ps[j] * np.maximum(
            _kernel_from_grid(cg, ti[float(t)], float(zj), axis), 0.0)
    return float(np.trapezoid(np.abs(conv - pst), dx=axis.step))


def invariant_density_1d(params: ModelParams, y_axis, trunc_tol=TRUNC_TOL,
                         tol=1e-10, u_cap=U_CAP) -> DensityGrid:
    """Density of the invariant law by inversion of exp(phi(inf, i u))."""
    if params.m != 1:
        raise DomainError("one-dimensional models only")
    _check_immigration(params)
    axis = Axis.coerce(y_axis)
    n_fft, du = _grid_plan(axis)

    def values(j):
        U = (1j * du * j.astype(float))[:, None]
        return np.exp(invariant_char(params, U, tol=tol))

    j_cut = _u_cutoff(lambda j: np.abs(values(j)), du, trunc_tol, u_cap)
    chi = values(np.arange(j_cut + 1))
    vals, clipped = _clip(invert_on_grid(chi, du, axis.origin, axis.step, axis.count),
                          (axis,))
    diag = {"u_max": du * j_cut, "du": du, "n_u": j_cut + 1, "trunc_tol": trunc_tol}
    return DensityGrid((axis,), vals, None, clipped, diag)


# -- anisotropic norms ------------------------------------------------------------

def default_h_set(step, n=17):
    """17 logarithmic points per sign between one grid step and 1."""
    h = np.geomspace(step, 1.0, n)
    return np.concatenate([-h[::-1], h])


def _shift(values, axis_k, step, h, extend):
    """f(y + h e_k) by linear interpolation; outside the grid: 0 or NaN."""
    s = h / step
    i0 = int(math.floor(s))
    frac = s - i0
    n = values.shape[axis_k]
    pad = np.nan if extend == "nan" else 0.0
    v = np.moveaxis(values, axis_k, 0)
    out = np.full(v.shape, pad)

    def take(off):
        r = np.full(v.shape, pad)
        lo, hi = max(0, -off), min(n, n - off)
        if lo < hi:
            r[lo:hi] = v[lo + off:hi + off]
        return r

    a = take(i0)
    out = a if frac < 1e-12 else (1.0 - frac) * a + frac * take(i0 + 1)
    return np.moveaxis(out, 0, axis_k)


def _norm_terms(grid, order, aniso, h_set, kind):
    axes = grid.axes
    f = np.asarray(grid.values, dtype=float)
    if kind == "l1":
        base = _trapz_nd(np.abs(f), axes)
    else:
        base = float(np.max(np.abs(f))) if f.size else 0.0
    terms = []
    for k, ax in enumerate(axes):
        hs = default_h_set(ax.step) if h_set is None else np.asarray(h_set, dtype=float)
        hs = hs[hs != 0.0]
        if np.any(np.abs(hs) > 1.0):
            raise DomainError("h must lie in [-1, 1]")
        if np.min(np.abs(hs)) < ax.step * (1 - 1e-9):
            raise GridTooCoarseError(f"smallest |h| {np.min(np.abs(hs)):g} is below the "
                                     f"grid step {ax.step:g} on axis {k}")
        expo = order / aniso.a[k]
        best, best_h, per_h = 0.0, float("nan"), []
        for h in hs:
            d = _shift(f, k, ax.step, h, "zero" if kind == "l1" else "nan") - f
            if kind == "l1":
                size = _trapz_nd(np.abs(d), axes)
            else:
                size = float(np.nanmax(np.abs(d))) if np.any(~np.isnan(d)) else 0.0
            val = abs(h) ** (-expo) * size
            per_h.append((float(h), size, val))
            if val > best:
                best, best_h = val, float(h)
        terms.append({"axis": k, "sup": best, "argmax_h": best_h, "per_h": per_h})
    return base, terms


def besov_norm(grid: DensityGrid, lam, aniso: Anisotropy, h_set=None,
               return_terms=False):
    """||f||_L1 + sum_k max_h |h|^(-lam/a_k) ||f(. + h e_k) - f||_L1 on the grid.

    Values off the grid count as 0.
    """
    for a in aniso.a:
        if not 0.0 < lam / a < 1.0:
            raise DomainError("need 0 < lam/a_k < 1 on every axis")
    base, terms = _norm_terms(grid, lam, aniso, h_set, "l1")
    total = base + sum(t["sup"] for t in terms)
    return (total, {"l1": base, "terms": terms}) if return_terms else total


def holder_zygmund_norm(grid: DensityGrid, eta, aniso: Anisotropy, h_set=None,
                        return_terms=False):
    """||f||_inf + sum_k max_h |h|^(-eta/a_k) ||f(. + h e_k) - f||_inf.

    Differences are taken where both points lie on the grid.
    """
    for a in aniso.a:
        if not 0.0 < eta / a < 1.0:
            raise DomainError("need 0 < eta/a_k < 1 on every axis")
    base, terms = _norm_terms(grid, eta, aniso, h_set, "sup")
    total = base + sum(t["sup"] for t in terms)
    return (total, {"sup": base, "terms": terms}) if return_terms else total


def function_grid(values, axes, weight=None):
    """Wrap raw grid values as a :class:`DensityGrid`."""
    axes = tuple(Axis.coerce(a) for a in axes)
    return DensityGrid(axes, np.asarray(values, dtype=float), weight)


# -- kernel density estimate ----------------------------------------------------

def silverman_bandwidth(samples, aniso: Optional[Anisotropy] = None):
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    n, m = x.shape
    sd = x.std(axis=0, ddof=1) if n > 1 else np.zeros(m)
    iqr = np.subtract(*np.percentile(x, [75, 25], axis=0)) / 1.34
    spread = np.where(iqr > 0, np.minimum(sd, iqr), sd)
    h = 1.06 * spread * n ** (-1.0 / (4 + m))
    if aniso is not None:
        h = h * np.asarray(aniso.a)
    return h


def weighted_kde(samples, delta, alpha, bandwidth=None, axes=None, n_grid=128,
                 chunk=20000) -> DensityGrid:
    """Gaussian product-kernel estimate of rho_delta * p on a grid.

    Default bandwidth is the Silverman-type rule times a_k per axis; the
    default grid spans [0, q_0.999 + 4 h] with ``n_grid`` points per axis.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, m = x.shape
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.size != m:
        raise DomainError("alpha has the wrong length")
    if n < 10000:
        warnings.warn("weighted_kde is intended for at least 1e4 samples",
                      RuntimeWarning)
    aniso = anisotropy(alpha)
    h = silverman_bandwidth(x, aniso) if bandwidth is None else \
        np.broadcast_to(np.asarray(bandwidth, dtype=float), (m,)).copy()
    if axes is None:
        hi = np.quantile(x, 0.999, axis=0) + 4 * np.maximum(h, 1e-12)
        hi = np.where(hi > 0, hi, 1.0)
        axes = tuple(Axis(0.0, float(hi[k]) / (n_grid - 1), n_grid) for k in range(m))
    else:
        axes = tuple(Axis.coerce(a) for a in axes)
    h = np.where(h > 0, h, np.array([a.step for a in axes]))
    pts = [a.points for a in axes]
    dens = np.zeros(tuple(a.count for a in axes))
    for lo in range(0, n, chunk):
        xc = x[lo:lo + chunk]
        ker = [np.exp(-0.5 * ((pts[k][:, None] - xc[None, :, k]) / h[k]) ** 2)
               / (h[k] * math.sqrt(2 * math.pi)) for k in range(m)]
        if m == 1:
            dens += ker[0].sum(axis=1)
        elif m == 2:
            dens += ker[0] @ ker[1].T
        else:
            sub = "".join(chr(ord("a") + k) + "z," for k in range(m))[:-1]
            dens += np.einsum(sub + "->" + "".join(chr(ord("a") + k) for k in range(m)),
                              *ker)
    dens /= n
    mesh = np.stack(np.meshgrid(*pts, indexing="ij"), axis=-1)
    vals = dens * rho_delta(mesh, delta, alpha)
    return DensityGrid(axes, vals, {"rho_delta": float(delta),
                                    "alpha": [float(a) for a in alpha]},
                       0.0, {"bandwidth": [float(v) for v in h], "n_samples": n})


# -- Besov shape experiment -----------------------------------------------------------

@dataclass
class BesovExperiment:
    lam: float
    x_scales: np.ndarray
    x_norms: np.ndarray           # (len(x_scales),)
    x_slope: float                # log-log slope in 1 + |x|
    t_list: np.ndarray
    t_norms: np.ndarray
    t_rescaled: np.ndarray        # norm * (1 ^ t)^(1/alpha_min)
    band_ratio: float             # max / min of the rescaled values
    sensitivity: dict             # lam -> (x_slope, band_ratio)

    def rows(self):
        out = [["x", s, v, float("nan")] for s, v in zip(self.x_scales, self.x_norms)]
        out += [["t", t, v, r] for t, v, r in zip(self.t_list, self.t_norms, self.t_rescaled)]
        return out


def besov_experiment(params: ModelParams, x_bar, t_fixed=0.5, t_list=(0.1, 0.2, 0.4, 0.8),
                     x_scales=(0.0, 1.0, 2.0, 4.0), n_paths=100000, seed=0, delta=1.0,
                     lam_factors=(0.05, 0.1, 0.2), main_factor=0.1, steps=200,
                     x_fixed=None):
    """Shape checks of ||rho_delta p_t(x, .)||_Besov in x and in t.

    Norms come from :func:`weighted_kde` of Euler samples (``steps`` steps to
    each horizon). lam = factor * min_k a_k.
    """
    from .simulator import simulate_ensemble
    aniso = anisotropy(params.alpha)
    amin = min(aniso.a)
    x_bar = np.asarray(x_bar, dtype=float)
    x_fixed = x_bar if x_fixed is None else np.asarray(x_fixed, dtype=float)
    factors = sorted(set(lam_factors) | {main_factor})
    grids_x = []
    for s in x_scales:
        ens = simulate_ensemble(params, s * x_bar, t_fixed, t_fixed / steps, n_paths, seed)
        grids_x.append(weighted_kde(ens.terminal, delta, params.alpha))
    grids_t = []
    for t in t_list:
        ens = simulate_ensemble(params, x_fixed, t, t / steps, n_paths, seed)
        grids_t.append(weighted_kde(ens.terminal, delta, params.alpha))
    amin_alpha = float(np.min(params.alpha))
    scale_t = np.minimum(1.0, np.asarray(t_list)) ** (1.0 / amin_alpha)
    size = np.log1p(np.asarray(x_scales) * np.linalg.norm(x_bar))
    res = {}
    for f in factors:
        lam = f * amin
        xn = np.array([besov_norm(g, lam, aniso) for g in grids_x])
        tn = np.array([besov_norm(g, lam, aniso) for g in grids_t])
        slope = float(np.polyfit(size, np.log(xn), 1)[0])
        resc = tn * scale_t
        res[f] = (lam, xn, slope, tn, resc, float(resc.max() / resc.min()))
    lam, xn, slope, tn, resc, band = res[main_factor]
    sens = {float(v[0]): (v[2], v[5]) for v in res.values()}
    return BesovExperiment(lam, np.asarray(x_scales, float), xn, slope,
                           np.asarray(t_list, float), tn, resc, band, sens)
