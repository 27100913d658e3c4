"""Lyapunov function, drift certificate and total-variation decay experiments.

The Lyapunov function is V(x) = sqrt(1 + <x, M x>) with M the solution of
M beta + beta^T M = -I. Total variation uses the full-mass convention:
mutually singular laws are at distance 2.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate, optimize

from .errors import (DegenerateFitError, DomainError, NotSubcriticalError,
                     QuadratureError)
from .levy_rng import c_alpha
from .model import (ExponentialJump, ModelParams, PointMassJump, SampledJump,
                    _jump_sample_for_quadrature, check_condition_a, is_subcritical,
                    log_moment_holds)
from .simulator import default_dt, simulate_ensemble


# -- Lyapunov matrix --------------------------------------------------------------

@dataclass(frozen=True)
class LyapunovData:
    M: np.ndarray
    c_star: float
    c_superstar: float
    residual: float

    def to_dict(self):
        return {"M": self.M.tolist(), "c_star": self.c_star,
                "c_superstar": self.c_superstar, "residual": self.residual}


def _vech_index(m):
    return [(i, j) for j in range(m) for i in range(j, m)]


def solve_M(beta) -> LyapunovData:
    """Solve M beta + beta^T M = -I in the m(m+1)/2 symmetric unknowns."""
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    if not is_subcritical(beta):
        raise NotSubcriticalError("beta must have eigenvalues with negative real part")
    m = beta.shape[0]
    idx = _vech_index(m)
    pos = {p: k for k, p in enumerate(idx)}
    A = np.zeros((len(idx), len(idx)))
    rhs = np.zeros(len(idx))
    for r, (i, j) in enumerate(idx):
        # (M beta + beta^T M)_ij = sum_k M_ik beta_kj + beta_ki M_kj
        for k in range(m):
            A[r, pos[(max(i, k), min(i, k))]] += beta[k, j]
            A[r, pos[(max(k, j), min(k, j))]] += beta[k, i]
        rhs[r] = -1.0 if i == j else 0.0
    sol = np.linalg.solve(A, rhs)
    M = np.zeros((m, m))
    for k, (i, j) in enumerate(idx):
        M[i, j] = M[j, i] = sol[k]
    res = float(np.linalg.norm(M @ beta + beta.T @ M + np.eye(m)))
    ev = np.linalg.eigvalsh(M)
    if ev.min() <= 0:
        raise NotSubcriticalError("Lyapunov solution is not positive definite")
    return LyapunovData(M, float(math.sqrt(ev.min())), float(math.sqrt(ev.max())), res)


def V_value(x, lyap: LyapunovData):
    """sqrt(1 + <x, M x>) for x of shape (m,) or (n, m)."""
    x = np.asarray(x, dtype=float)
    q = np.einsum("...i,ij,...j->...", x, lyap.M, x)
    v = np.sqrt(1.0 + q)
    return float(v) if v.ndim == 0 else v


# -- generator on V ------------------------------------------------------------------

def _quad(f, a, b, tol, **kw):
    val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=400, **kw)
    if not np.isfinite(val) or err > max(100 * tol, 1e-6 * abs(val)):
        raise QuadratureError(f"quadrature error estimate {err:.3g} above tolerance")
    return val


def _stable_term(x, j, M, Mx, V, alpha, tol):
    """int_0^inf (V(x + z e_j) - V(x) - z d_jV(x)) z^(-1-alpha) dz / c(alpha)."""
    mjj, g = M[j, j], Mx[j]

    def v1(z):
        return math.sqrt(V * V + 2.0 * z * g + z * z * mjj)

    def h_over_z2(z):
        w = v1(z)
        return mjj / (w + V) - g * (2.0 * g + z * mjj) / (V * (w + V) ** 2)

    # h/z^2 is smooth; weight z^(1-alpha) on (0, 1]
    near = _quad(h_over_z2, 0.0, 1.0, tol, weight="alg", wvar=(1.0 - alpha, 0.0))

    def h(z):
        return (v1(z) - V - z * g / V) * z ** (-1.0 - alpha)

    far = _quad(h, 1.0, np.inf, tol)
    return (near + far) / c_alpha(alpha)


def _jump_term(x, table, lyap, V, tol):
    """int_{|z|<=1} (V(x+z) - V(x)) nu(dz) for the restricted table."""
    M = lyap.M
    Mx = M @ x
    total = 0.0
    for c in range(table.n_powerlaw):
        w, th, lo, hi = table.pl_w[c], table.pl_theta[c], table.pl_lo[c], table.pl_hi[c]
        if w == 0.0 or lo >= hi:
            continue
        d = table.pl_dir[c]
        g = float(d @ Mx)
        q = float(d @ M @ d)
        gfun = table.pl_g[c]

        def f(r):
            # (V(x + r d) - V) / r without cancellation
            val = (2.0 * g + r * q) / (math.sqrt(V * V + 2.0 * r * g + r * r * q) + V)
            return val * (1.0 if gfun is None else float(gfun(np.array([r]))[0]))

        total += w * _quad(f, lo, hi, tol, weight="alg", wvar=(-th, 0.0))
    for i, jl in enumerate(table.cp_jump):
        rate = table.cp_rate[i]
        rlo, rhi = table.cp_rlo[i], table.cp_rhi[i]
        if isinstance(jl, PointMassJump):
            z = np.asarray(jl.vector)[None, :]
        else:
            z = _jump_sample_for_quadrature(jl)
        nz = np.linalg.norm(z, axis=1)
        inside = (nz > rlo) & (nz <= rhi)
        diff = V_value(x + z, lyap) - V
        total += rate * float(np.mean(np.where(inside, diff, 0.0)))
    return total


def generator_on_V(params: ModelParams, x, lyap: LyapunovData, quad_tol=1e-10):
    """Generator with jumps of norm <= 1 applied to V at ``x``.

    <b + beta x, grad V> + int_{|z|<=1} (V(x+z) - V(x)) nu(dz)
      + sum_j sigma_j x_j int (V(x + z e_j) - V(x) - z d_jV(x)) mu_alpha_j(dz)
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be nonnegative")
    M = lyap.M
    V = V_value(x, lyap)
    Mx = M @ x
    out = float((np.asarray(params.b) + params.beta @ x) @ Mx) / V
    table = params.jump_table().restrict(0.0, 1.0)
    out += _jump_term(x, table, lyap, V, quad_tol)
    for j in range(params.m):
        if x[j] == 0.0 or params.sigma[j] == 0.0:
            continue
        out += params.sigma[j] * x[j] * _stable_term(x, j, M, Mx, V, params.alpha[j],
                                                      quad_tol)
    return out


def default_drift_grid(m, r_max=1e3, n_radii=25, n_dirs=9):
    """Origin plus log-spaced radii in [1e-3, r_max] along orthant directions."""
    radii = np.geomspace(1e-3, r_max, n_radii)
    if m == 1:
        dirs = np.ones((1, 1))
    elif m == 2:
        ang = np.linspace(0.0, 0.5 * math.pi, n_dirs)
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        rng = np.random.Generator(np.random.Philox(12345))
        d = np.abs(rng.standard_normal((n_dirs, m)))
        dirs = np.vstack([np.eye(m), d / np.linalg.norm(d, axis=1, keepdims=True)])
    pts = (radii[:, None, None] * dirs[None]).reshape(-1, m)
    return np.vstack([np.zeros((1, m)), pts])


@dataclass
class DriftCertificate:
    c1: float
    c2: float
    c2_cap: float
    grid: np.ndarray
    LV: np.ndarray
    V: np.ndarray
    lyap: LyapunovData
    max_violation: float

    @property
    def ok(self):
        return self.c1 > 0 and math.isfinite(self.c2)

    def to_dict(self):
        return {"M": self.lyap.M.tolist(), "residual": self.lyap.residual,
                "c_star": self.lyap.c_star, "c_superstar": self.lyap.c_superstar,
                "c1": self.c1, "c2": self.c2, "c2_cap": self.c2_cap,
                "max_violation": self.max_violation,
                "grid": self.grid.tolist(), "LV": self.LV.tolist()}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def drift_certificate(params: ModelParams, grid=None, c2_cap=None, quad_tol=1e-10):
    """Largest c1 with L V <= -c1 V + c2 at every grid point, c2 <= c2_cap.

    Without a cap the problem is unbounded (c2 can absorb any c1 on a finite
    grid); the default cap is 2 max(1, max L V).
    """
    lyap = solve_M(params.beta)
    grid = default_drift_grid(params.m) if grid is None else np.atleast_2d(grid)
    LV = np.array([generator_on_V(params, x, lyap, quad_tol) for x in grid])
    V = V_value(grid, lyap)
    cap = 2.0 * max(1.0, float(LV.max())) if c2_cap is None else float(c2_cap)
    # variables (c1, c2): maximise c1 s.t. LV_i + c1 V_i - c2 <= 0
    A = np.column_stack([V, -np.ones_like(V)])
    res = optimize.linprog(c=[-1.0, 0.0], A_ub=A, b_ub=-LV,
                           bounds=[(None, None), (None, cap)], method="highs")
    if res.status != 0:
        raise DegenerateFitError(f"drift LP failed: {res.message}")
    c1, c2 = float(res.x[0]), float(res.x[1])
    viol = float(np.max(LV + c1 * V - c2))
    return DriftCertificate(c1, c2, cap, grid, LV, V, lyap, viol)


# -- total variation ------------------------------------------------------------------

def _quantile_edges(pooled, n_bins):
    q = np.quantile(pooled, np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
    return np.unique(q)


def tv_distance(samples_a, samples_b, n_bins=20, return_info=False):
    """sum over cells |p_a - p_b| on equal-mass bins of the pooled sample.

    Full-mass convention (range [0, 2]). Histogram bias makes this an
    overestimate of order sqrt(cells / N); compare with the self-distance
    floor of :func:`self_distance_floor`.
    """
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise DomainError("both sample sets must be nonempty")
    pooled = np.vstack([a, b])
    m = a.shape[1]
    edges = [_quantile_edges(pooled[:, k], n_bins) for k in range(m)]
    dims = [e.size + 1 for e in edges]

    def cells(s):
        flat = np.zeros(s.shape[0], dtype=np.int64)
        for k in range(m):
            flat = flat * dims[k] + np.searchsorted(edges[k], s[:, k], side="right")
        return np.bincount(flat, minlength=int(np.prod(dims))) / s.shape[0]

    tv = float(np.abs(cells(a) - cells(b)).sum())
    if return_info:
        return tv, {"cells": int(np.prod(dims)), "bins_per_axis": dims,
                    "caveat": "histogram estimate, biased upward by sampling noise"}
    return tv


def self_distance_floor(samples, n_bins=20):
    """TV between the two halves of one sample, rescaled to full size by 1/sqrt(2)."""
    s = np.asarray(samples, dtype=float)
    h = s.shape[0] // 2
    return tv_distance(s[:h], s[h:2 * h], n_bins) / math.sqrt(2.0)


# -- ergodicity experiment --------------------------------------------------------------

def aligned_dt(times, dt_max):
    """Largest dt <= dt_max dividing every time in ``times``."""
    fr = [Fraction(float(t)).limit_denominator(10 ** 6) for t in times]
    g = fr[0]
    for f in fr[1:]:
        g = Fraction(math.gcd(g.numerator * f.denominator, f.numerator * g.denominator),
                     g.denominator * f.denominator)
    k = max(1, math.ceil(float(g) / dt_max - 1e-12))
    return float(g) / k


@dataclass
class DecayTable:
    t: np.ndarray
    tv: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    floor: np.ndarray
    delta_hat: float
    delta_ci: tuple
    window: np.ndarray          # boolean mask of points used in the fit
    monotone_violations: int
    n_paths: int
    notes: list = field(default_factory=list)

    def rows(self):
        return [[t, v, lo, hi, f, int(w)] for t, v, lo, hi, f, w in
                zip(self.t, self.tv, self.ci_low, self.ci_high, self.floor, self.window)]

    header = ["t", "tv", "ci_low", "ci_high", "floor", "in_fit"]


def _fit_rate(t, tv):
    return -float(np.polyfit(t, np.log(tv), 1)[0])


def ergodicity_experiment(params: ModelParams, x, y, t_grid, n_paths=10000, seed=0,
                          dt=None, n_bins=20, n_boot=200, boot_seed=None):
    """TV between the laws started at x and y over ``t_grid`` and a decay fit.

    The fit uses the t where 2 floor < TV < 1.8; delta_hat comes with a
    percentile bootstrap 95% interval (paths resampled in both ensembles).
    """
    if not is_subcritical(params.beta):
        warnings.warn("drift matrix is not subcritical", RuntimeWarning)
    if not log_moment_holds(params.levy):
        warnings.warn("log-moment condition not verified", RuntimeWarning)
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    T = float(t_grid[-1])
    dt = aligned_dt(t_grid, default_dt(T) if dt is None else dt)
    ex = simulate_ensemble(params, x, T, dt, n_paths, seed, record_times=t_grid)
    ey = simulate_ensemble(params, y, T, dt, n_paths, seed, record_times=t_grid,
                           stream_offset=n_paths)
    nt = t_grid.size
    tv = np.array([tv_distance(ex.at(t), ey.at(t), n_bins) for t in t_grid])
    floor = np.array([0.5 * (self_distance_floor(ex.at(t), n_bins)
                             + self_distance_floor(ey.at(t), n_bins)) for t in t_grid])
    window = (tv > 2.0 * floor) & (tv < 1.8)
    notes = []
    if window.sum() < 3:
        raise DegenerateFitError(
            f"only {int(window.sum())} t values with 2*floor < TV < 1.8; "
            "widen t_grid or raise n_paths")
    delta = _fit_rate(t_grid[window], tv[window])
    rng = np.random.Generator(np.random.Philox(
        key=[int(seed if boot_seed is None else boot_seed) & ((1 << 64) - 1), 0xB007]))
    boots = np.empty((n_boot, nt))
    for r in range(n_boot):
        ia = rng.integers(0, n_paths, n_paths)
        ib = rng.integers(0, n_paths, n_paths)
        for k, t in enumerate(t_grid):
            boots[r, k] = tv_distance(ex.at(t)[ia], ey.at(t)[ib], n_bins)
    lo, hi = np.percentile(boots, [2.5, 97.5], axis=0)
    rates = np.array([_fit_rate(t_grid[window], b[window]) for b in boots])
    dci = tuple(float(v) for v in np.percentile(rates, [2.5, 97.5]))
    viol = int(np.sum(np.diff(tv) > 2.0 * np.maximum(floor[1:], floor[:-1])))
    if viol:
        notes.append(f"{viol} increase(s) beyond twice the noise floor")
    return DecayTable(t_grid, tv, lo, hi, floor, delta, dci, window, viol, int(n_paths),
                      notes)


# -- local Dobrushin probe ------------------------------------------------------------

@dataclass
class DobrushinResult:
    max_tv: float
    margin: float
    pairs: list          # (x, y, tv)
    h: float
    R: float


def dobrushin_check(params: ModelParams, R, h, n_pairs=12, n_paths=5000, seed=0,
                    dt=None, n_bins=20):
    """Max TV between P_h(x, .) and P_h(y, .) over pairs with V(x) + V(y) <= R."""
    if not h > 0:
        raise DomainError("h must be positive")
    lyap = solve_M(params.beta)
    m = params.m
    if R <= 2.0:
        raise DomainError("R must exceed 2 (V >= 1)")
    # largest radius r with V(r d) <= R - 1 for every unit d in the orthant
    r_max = math.sqrt(max((R - 1.0) ** 2 - 1.0, 0.0)) / lyap.c_superstar
    rng = np.random.Generator(np.random.Philox(key=[int(seed) & ((1 << 64) - 1), 0xD0B]))
    cands = [np.zeros(m)] + [r_max * np.eye(m)[k] for k in range(m)]
    while len(cands) < max(n_pairs, m + 1) + 1:
        d = np.abs(rng.standard_normal(m))
        cands.append(d / np.linalg.norm(d) * r_max * rng.uniform())
    pairs = [(cands[0], cands[0])]
    for i in range(len(cands)):
        for j in range(i + 1, len(cands)):
            if V_value(cands[i], lyap) + V_value(cands[j], lyap) <= R:
                pairs.append((cands[i], cands[j]))
    pairs = pairs[:n_pairs + 1]
    out = []
    for k, (a, b) in enumerate(pairs):
        ea = simulate_ensemble(params, a, h, dt, n_paths, seed, stream_offset=0)
        eb = simulate_ensemble(params, b, h, dt, n_paths, seed, stream_offset=n_paths)
        out.append((a.tolist(), b.tolist(), tv_distance(ea.terminal, eb.terminal, n_bins)))
    mx = max(p[2] for p in out)
    return DobrushinResult(mx, 2.0 - mx, out, float(h), float(R))
