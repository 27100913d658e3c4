"""Euler simulation of the process, moment formulas and rate experiments.

One Euler step is

    x' = max(0, x + (b + beta x) dt + (sigma x)^(1/alpha) dZ + dJ)

with the coordinatewise power and clamp. Path ``p`` draws all its noise
from the Philox stream keyed by ``(master_seed, stream_offset + p)`` and
addresses each draw by (block, step, purpose) counters, so ensembles are
identical for any thread count and either backend.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from . import _kernels as K
from ._backend import BACKEND, USE_NUMBA, jit
from .errors import DegenerateFitError, DomainError
from .levy_rng import (TAG_FIXED, TAG_JUMP, TAG_POISSON, RngStream,
                       counter_uniforms, exact_part_vec, jumps_vec,
                       poisson_counts_vec, rng_provenance,
                       sample_stable_spec_positive,
                       sample_subordinator_increment, subordinator_plan)
from .model import ModelParams, check_condition_a, validate

if USE_NUMBA:
    from numba import prange
else:  # pragma: no cover - exercised with AJCIR_BACKEND=numpy
    prange = range

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
NUMPY_CHUNK = 20000


def default_dt(T):
    return min(0.01, T / 1000.0)


# -- single step ------------------------------------------------------------------

def euler_step(params: ModelParams, x, dt, rng: RngStream):
    """One clamped Euler step from ``x`` of shape (m,) or (n, m)."""
    if not dt > 0.0:
        raise DomainError("dt must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise DomainError("state must be coordinatewise nonnegative")
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    n, m = xs.shape
    dz = np.column_stack([
        sample_stable_spec_positive(params.alpha[i], dt, rng, size=n)
        for i in range(m)])
    dj = sample_subordinator_increment(params.levy, dt, rng, m=m, size=n)
    out = _euler_update(xs, dt, params.b, params.beta, params.sigma,
                        params.alpha, dz, dj)
    return out[0] if single else out


def _euler_update(x, dt, b, beta, sigma, alpha, dz, dj):
    coef = (sigma * x) ** (1.0 / alpha)
    return np.maximum(x + (b + x @ beta.T) * dt + coef * dz + dj, 0.0)


# -- compiled ensemble kernel --------------------------------------------------------

@jit
def _fill(buf, nblocks, c0, c1, tag, k0, k1):
    for q in range(nblocks):
        r0, r1, r2, r3 = K.philox4x64(np.uint64(c0 + q), np.uint64(c1), np.uint64(tag),
                                      np.uint64(0), k0, k1)
        buf[4 * q] = K.to_unit(r0)
        buf[4 * q + 1] = K.to_unit(r1)
        buf[4 * q + 2] = K.to_unit(r2)
        buf[4 * q + 3] = K.to_unit(r3)


@jit
def _one_path(x0, k0, k1, n_steps, dt, b, beta, sigma, alpha, zsc, zsh, zsk, diag,
              jdrift, ex_theta, ex_gamma, ex_shift, ex_skew, ex_dir,
              cp_cum, cp_kind, cp_theta, cp_a, cp_b, cp_vec, cp_rlo, cp_rhi,
              lam_chunk, n_chunks, upj, bpj, rec, out_x, out_z, out_j, keep_noise):
    m = x0.shape[0]
    n_ex = ex_theta.shape[0]
    n_cp = cp_cum.shape[0]
    x = x0.copy()
    xn = np.empty(m)
    dz = np.empty(m)
    dj = np.empty(m)
    zc = np.zeros(m)
    jc = np.zeros(m)
    fb = (2 * m + 2 * n_ex + 3) // 4
    ufix = np.empty(4 * fb)
    pb = (n_chunks + 3) // 4
    upois = np.empty(4 * pb)
    ujump = np.empty(4 * bpj)
    inv_alpha = 1.0 / alpha
    r = 0
    while r < rec.shape[0] and rec[r] == 0:
        out_x[r, :] = x
        r += 1
    for n in range(n_steps):
        _fill(ufix, fb, 0, n, 1, k0, k1)
        for i in range(m):
            dz[i] = zsc[i] * K.cms_standard(ufix[2 * i], ufix[2 * i + 1], alpha[i],
                                            zsh[i], zsk[i])
            dj[i] = jdrift[i]
        for e in range(n_ex):
            s = ex_gamma[e] * K.cms_standard(ufix[2 * m + 2 * e], ufix[2 * m + 2 * e + 1],
                                             ex_theta[e], ex_shift[e], ex_skew[e])
            if s > 0.0:
                for i in range(m):
                    dj[i] += s * ex_dir[e, i]
        if lam_chunk > 0.0:
            _fill(upois, pb, 0, n, 2, k0, k1)
            cnt = 0
            for c in range(n_chunks):
                cnt += K.poisson_inv_scalar(lam_chunk, upois[c])
            for jn in range(cnt):
                _fill(ujump, bpj, jn * bpj, n, 3, k0, k1)
                comp = 0
                while comp < n_cp - 1 and cp_cum[comp] <= ujump[0]:
                    comp += 1
                kind = cp_kind[comp]
                if kind == 0:
                    rad = (cp_a[comp] - ujump[2] * (cp_a[comp] - cp_b[comp])) ** (
                        -1.0 / cp_theta[comp])
                    for i in range(m):
                        dj[i] += rad * cp_vec[comp, i]
                else:
                    nrm = 0.0
                    for i in range(m):
                        if kind == 1:
                            xn[i] = cp_vec[comp, i]
                        else:
                            xn[i] = -math.log(ujump[2 + i]) * cp_vec[comp, i]
                        nrm += xn[i] * xn[i]
                    nrm = math.sqrt(nrm)
                    if nrm > cp_rlo[comp] and nrm <= cp_rhi[comp]:
                        for i in range(m):
                            dj[i] += xn[i]
        for i in range(m):
            drift = b[i]
            if diag:
                drift += beta[i, i] * x[i]
            else:
                for k in range(m):
                    drift += beta[i, k] * x[k]
            coef = 0.0
            if x[i] > 0.0 and sigma[i] > 0.0:
                coef = (sigma[i] * x[i]) ** inv_alpha[i]
            v = x[i] + drift * dt + coef * dz[i] + dj[i]
            xn[i] = v if v > 0.0 else 0.0
        for i in range(m):
            x[i] = xn[i]
            zc[i] += dz[i]
            jc[i] += dj[i]
        while r < rec.shape[0] and rec[r] == n + 1:
            out_x[r, :] = x
            if keep_noise:
                out_z[r, :] = zc
                out_j[r, :] = jc
            r += 1


@jit(parallel=True)
def _paths_kernel(x0, seed, sid0, n_steps, dt, b, beta, sigma, alpha, zsc, zsh, zsk,
                  diag, jdrift, ex_theta, ex_gamma, ex_shift, ex_skew, ex_dir,
                  cp_cum, cp_kind, cp_theta, cp_a, cp_b, cp_vec, cp_rlo, cp_rhi,
                  lam_chunk, n_chunks, upj, bpj, rec, out_x, out_z, out_j, keep_noise):
    n = out_x.shape[0]
    for p in prange(n):
        k1 = np.uint64(sid0) + np.uint64(p)
        _one_path(x0, seed, k1, n_steps, dt, b, beta, sigma, alpha, zsc, zsh, zsk,
                  diag, jdrift, ex_theta, ex_gamma, ex_shift, ex_skew, ex_dir,
                  cp_cum, cp_kind, cp_theta, cp_a, cp_b, cp_vec, cp_rlo, cp_rhi,
                  lam_chunk, n_chunks, upj, bpj, rec, out_x[p], out_z[p], out_j[p],
                  keep_noise)


# -- numpy fallback (same draws, vectorised over paths) -----------------------------

def _blocks(seed, sids, c0, nblocks, step, tag):
    parts = [counter_uniforms(seed, sids, np.asarray(c0) + q, step, tag)
             for q in range(nblocks)]
    return np.concatenate(parts, axis=-1)


def _paths_numpy(x0, seed, sids, n_steps, dt, params, zc, diag, plan, rec,
                 out_x, out_z, out_j, keep_noise):
    m = params.m
    n = sids.shape[0]
    alpha = params.alpha
    beta = np.diag(np.diag(params.beta)) if diag else params.beta
    n_ex = plan.ex_theta.shape[0]
    fb = (2 * m + 2 * n_ex + 3) // 4
    pb = (plan.n_chunks + 3) // 4
    x = np.broadcast_to(x0, (n, m)).copy()
    zsum = np.zeros((n, m))
    jsum = np.zeros((n, m))
    r = 0
    while r < rec.shape[0] and rec[r] == 0:
        out_x[:, r] = x
        r += 1
    for step in range(n_steps):
        uf = _blocks(seed, sids, 0, fb, step, TAG_FIXED)
        dz = zc[0] * K.cms_standard(uf[:, 0:2 * m:2], uf[:, 1:2 * m:2], alpha,
                                    zc[1], zc[2])
        dj = plan.drift + exact_part_vec(plan, uf[:, 2 * m:2 * m + 2 * n_ex])
        if plan.lam > 0.0:
            up = _blocks(seed, sids, 0, pb, step, TAG_POISSON)[:, :plan.n_chunks]
            counts = poisson_counts_vec(plan, up)
            total = int(counts.sum())
            if total:
                owner = np.repeat(np.arange(n), counts)
                first = np.cumsum(counts) - counts
                jn = np.arange(total) - np.repeat(first, counts)
                uj = _blocks(seed, sids[owner], jn * plan.blocks_per_jump,
                             plan.blocks_per_jump, step, TAG_JUMP)
                np.add.at(dj, owner, jumps_vec(plan, uj[:, :plan.uniforms_per_jump]))
        x = _euler_update(x, dt, params.b, beta, params.sigma, alpha, dz, dj)
        zsum += dz
        jsum += dj
        while r < rec.shape[0] and rec[r] == step + 1:
            out_x[:, r] = x
            if keep_noise:
                out_z[:, r] = zsum
                out_j[:, r] = jsum
            r += 1


def _run(params, x0, n_steps, dt, n_paths, seed, rec, keep_noise=False, diag=False,
         stream_offset=0, eps=None):
    """States (and cumulative noise) at the step indices ``rec`` for every path."""
    m = params.m
    seed = int(seed) & _MASK64
    x0 = np.ascontiguousarray(np.broadcast_to(np.asarray(x0, dtype=float), (m,)))
    if np.any(x0 < 0.0):
        raise DomainError("x0 must be coordinatewise nonnegative")
    rec = np.ascontiguousarray(rec, dtype=np.int64)
    plan = subordinator_plan(params.jump_table(), dt, eps)
    zsc = np.array([K.stable_scale(a, dt) for a in params.alpha])
    consts = [K.cms_constants(a) for a in params.alpha]
    zsh = np.array([c[0] for c in consts])
    zsk = np.array([c[1] for c in consts])
    R = rec.shape[0]
    out_x = np.zeros((n_paths, R, m))
    shape_n = (n_paths, R, m) if keep_noise else (n_paths, 0, m)
    out_z = np.zeros(shape_n)
    out_j = np.zeros(shape_n)
    if USE_NUMBA and plan.compiled_ok:
        lam_chunk = plan.lam / plan.n_chunks if plan.lam > 0.0 else 0.0
        _paths_kernel(x0, np.uint64(seed), np.uint64(int(stream_offset) & _MASK64),
                      int(n_steps), float(dt), np.asarray(params.b, dtype=float),
                      np.ascontiguousarray(params.beta), np.asarray(params.sigma),
                      np.asarray(params.alpha), zsc, zsh, zsk, bool(diag),
                      np.ascontiguousarray(plan.drift, dtype=float), plan.ex_theta,
                      plan.ex_gamma, plan.ex_shift, plan.ex_skew,
                      np.ascontiguousarray(plan.ex_dir), plan.cp_cum,
                      plan.cp_kind.astype(np.int64), plan.cp_theta, plan.cp_a,
                      plan.cp_b, np.ascontiguousarray(plan.cp_vec), plan.cp_rlo,
                      plan.cp_rhi, float(lam_chunk), int(plan.n_chunks),
                      int(plan.uniforms_per_jump), int(plan.blocks_per_jump), rec,
                      out_x, out_z, out_j, bool(keep_noise))
    else:
        if USE_NUMBA:
            log.info("jump law needs Python callables; using the numpy path")
        for a in range(0, n_paths, NUMPY_CHUNK):
            hi = min(n_paths, a + NUMPY_CHUNK)
            sids = (np.arange(a, hi, dtype=np.uint64)
                    + np.uint64(int(stream_offset) & _MASK64))
            _paths_numpy(x0, seed, sids, int(n_steps), float(dt), params,
                         (zsc, zsh, zsk), diag, plan, rec, out_x[a:hi], out_z[a:hi],
                         out_j[a:hi], keep_noise)
    return out_x, out_z, out_j, plan


# -- ensembles ------------------------------------------------------------------------

@dataclass
class SamplePath:
    times: np.ndarray
    states: np.ndarray
    stream_id: int


@dataclass
class PathEnsemble:
    """Recorded states ``states[path, time, coord]`` of an Euler ensemble."""
    params: ModelParams
    x0: np.ndarray
    T: float
    dt: float
    n_paths: int
    master_seed: int
    times: np.ndarray
    states: np.ndarray
    keep: str = "terminal"
    stream_offset: int = 0
    diagonal: bool = False
    neglected_jump_mean: float = 0.0

    @property
    def terminal(self):
        return self.states[:, -1, :]

    def path(self, i) -> SamplePath:
        return SamplePath(self.times, self.states[i], self.stream_offset + i)

    def at(self, t):
        """States at the recorded time closest to ``t``."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"time {t} was not recorded")
        return self.states[:, k, :]

    def mean(self):
        """Per-time sample mean (pairwise summation) and its standard error."""
        mu = self.states.mean(axis=0)
        se = self.states.std(axis=0, ddof=1) / math.sqrt(self.n_paths) \
            if self.n_paths > 1 else np.zeros_like(mu)
        return mu, se

    def summary_rows(self, quantiles=(0.05, 0.25, 0.5, 0.75, 0.95)):
        mu, se = self.mean()
        qs = np.quantile(self.states, quantiles, axis=0)
        rows = []
        for k, t in enumerate(self.times):
            row = [t]
            for i in range(self.params.m):
                row += [mu[k, i], se[k, i]] + [qs[j, k, i] for j in range(len(quantiles))]
            rows.append(row)
        header = ["t"]
        for i in range(self.params.m):
            header += [f"mean_{i}", f"se_{i}"] + [f"q{int(round(100 * q)):02d}_{i}"
                                                  for q in quantiles]
        return header, rows

    def manifest(self):
        return {"params": self.params.to_dict(), "x0": [float(v) for v in self.x0],
                "T": self.T, "dt": self.dt, "n_paths": self.n_paths,
                "stream_offset": self.stream_offset, "diagonal_drift": self.diagonal,
                "keep": self.keep, "rng": rng_provenance(self.master_seed),
                "neglected_jump_mean_per_step": self.neglected_jump_mean}

    def write_summary_csv(self, path):
        header, rows = self.summary_rows()
        with open(path, "w", newline="") as fh:
            write_provenance(fh, self.master_seed)
            write_rows(fh, header, rows)

    def write_manifest(self, path):
        with open(path, "w") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)

    def dump_terminal(self, path):
        """Raw terminal states: magic, int64 m, int64 n_paths, then float64 rows."""
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(np.array([self.params.m, self.n_paths], dtype="<i8").tobytes())
            fh.write(np.ascontiguousarray(self.terminal, dtype="<f8").tobytes())


BINARY_MAGIC = b"AJCIRX1\0"


def load_terminal(path):
    with open(path, "rb") as fh:
        if fh.read(8) != BINARY_MAGIC:
            raise DomainError(f"{path} is not a terminal-state dump")
        m, n = np.frombuffer(fh.read(16), dtype="<i8")
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(int(n), int(m))


def write_provenance(fh, master_seed):
    for k, v in rng_provenance(master_seed).items():
        fh.write(f"# {k}={v}\n")


def fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def write_rows(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


def _step_grid(T, dt):
    if not T > 0.0:
        raise DomainError("T must be positive")
    if not 0.0 < dt <= T:
        raise DomainError("dt must satisfy 0 < dt <= T")
    n = int(math.ceil(T / dt - 1e-9))
    return n, T / n


def _record_steps(times, T, n_steps):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0.0) or np.any(times > T * (1 + 1e-12)):
        raise DomainError("record times must lie in [0, T]")
    steps = np.rint(times / T * n_steps).astype(np.int64)
    off = np.abs(steps * T / n_steps - times)
    if np.any(off > 1e-9 * max(1.0, T)):
        raise DomainError("record times must be multiples of dt")
    return np.unique(steps)


def simulate_ensemble(params: ModelParams, x0, T, dt=None, n_paths=1000, master_seed=0,
                      keep="terminal", record_times=None, stream_offset=0,
                      diagonal=False, eps=None) -> PathEnsemble:
    """Independent Euler paths, one counter-based stream per path.

    ``keep="full"`` records every step (memory n_paths * n_steps * m);
    ``record_times`` records a chosen subset instead. ``diagonal`` drops the
    off-diagonal drift terms.
    """
    validate(params).raise_if_invalid()
    dt = default_dt(T) if dt is None else float(dt)
    n_steps, dt = _step_grid(float(T), dt)
    if n_paths < 1:
        raise DomainError("n_paths must be positive")
    if record_times is not None:
        rec = _record_steps(record_times, T, n_steps)
    elif keep == "full":
        rec = np.arange(n_steps + 1)
    elif keep == "terminal":
        rec = np.array([n_steps])
    else:
        raise DomainError("keep must be 'full' or 'terminal'")
    states, _, _, plan = _run(params, x0, n_steps, dt, int(n_paths), master_seed, rec,
                              diag=diagonal, stream_offset=stream_offset, eps=eps)
    return PathEnsemble(params, np.broadcast_to(np.asarray(x0, float), (params.m,)).copy(),
                        float(T), dt, int(n_paths), int(master_seed) & _MASK64,
                        rec * dt, states, keep if record_times is None else "subset",
                        int(stream_offset), bool(diagonal), plan.neglected_l1)


def simulate_comparison_diagonal(params, x0, T, dt=None, n_paths=1000, master_seed=0,
                                 keep="terminal", paired=False, **kw):
    """Ensemble of the diagonal-drift process.

    The noise of path ``p`` depends only on (seed, p, step), so with
    ``paired=True`` the returned ``(full, diagonal)`` ensembles share their
    noise exactly.
    """
    diag = simulate_ensemble(params, x0, T, dt, n_paths, master_seed, keep,
                             diagonal=True, **kw)
    if not paired:
        return diag
    full = simulate_ensemble(params, x0, T, dt, n_paths, master_seed, keep, **kw)
    return full, diag


# -- moments and transforms ---------------------------------------------------------

def mean_formula(params: ModelParams, x, t):
    """exp(beta t) x + int_0^t exp(beta s) ds (b + int z nu(dz))."""
    m = params.m
    btil = np.asarray(params.b, dtype=float) + params.jump_table().first_moment()
    aug = np.zeros((m + 1, m + 1))
    aug[:m, :m] = params.beta
    aug[:m, m] = btil
    E = linalg.expm(aug * float(t))
    return E[:m, :m] @ np.asarray(x, dtype=float) + E[:m, m]


def empirical_char(ensemble_or_states, u, chunk=64):
    """Sample mean of exp(<u, X>) per probe row of ``u`` with jackknife SE.

    ``u`` holds complex probes (for the characteristic function pass
    ``1j * y``). Returns ``(values, se)``.
    """
    X = ensemble_or_states.terminal if isinstance(ensemble_or_states, PathEnsemble) \
        else np.asarray(ensemble_or_states, dtype=float)
    u = np.atleast_2d(np.asarray(u, dtype=np.complex128))
    n = X.shape[0]
    vals = np.empty(u.shape[0], dtype=np.complex128)
    se = np.zeros(u.shape[0])
    for a in range(0, u.shape[0], chunk):
        e = np.exp(X @ u[a:a + chunk].T)
        tot = e.sum(axis=0)
        vals[a:a + chunk] = tot / n
        if n > 1:
            loo = (tot - e) / (n - 1)
            dev = loo - loo.mean(axis=0)
            se[a:a + chunk] = np.sqrt((n - 1) / n * (np.abs(dev) ** 2).sum(axis=0))
    exact = np.all(u == 0, axis=1)
    vals[exact] = 1.0
    se[exact] = 0.0
    return vals, se


# -- boundary behaviour ---------------------------------------------------------------

def wilson_interval(k, n, z=1.959963984540054):
    p = k / n
    den = 1.0 + z * z / n
    c = (p + z * z / (2 * n)) / den
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # the bounds at k = 0 and k = n are exact, not rounded
    lo = 0.0 if k == 0 else max(0.0, c - h)
    hi = 1.0 if k == n else min(1.0, c + h)
    return lo, hi


@dataclass
class BoundaryTable:
    eps: np.ndarray
    estimate: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    slope: float
    n_paths: int

    def rows(self):
        return [[e, p, lo, hi] for e, p, lo, hi in
                zip(self.eps, self.estimate, self.ci_low, self.ci_high)]


def boundary_hit_probability(params, x0, t, eps_list, n_paths=10000, dt=None, seed=0):
    """P[min_k X_k(t) <= eps] per eps with Wilson 95% intervals and log-log slope."""
    try:
        rep = check_condition_a(params)
        if not rep.overall:
            warnings.warn("condition (A) fails for this model; boundary bound "
                          "not expected", RuntimeWarning)
    except DegenerateFitError:
        warnings.warn("condition (A) cannot be assessed (no immigration)",
                      RuntimeWarning)
    ens = simulate_ensemble(params, x0, t, dt, n_paths, seed)
    low = ens.terminal.min(axis=1)
    eps = np.asarray(eps_list, dtype=float)
    k = np.array([(low <= e).sum() for e in eps])
    est = k / n_paths
    ci = np.array([wilson_interval(int(ki), n_paths) for ki in k])
    pos = (est > 0) & (eps > 0)
    slope = float("nan")
    if pos.sum() >= 2:
        slope = float(np.polyfit(np.log(eps[pos]), np.log(est[pos]), 1)[0])
    return BoundaryTable(eps, est, ci[:, 0], ci[:, 1], slope, int(n_paths))


# -- Euler rate experiment --------------------------------------------------------------

def kappa_rates(alpha):
    """Per-coordinate rates min(1 + 1/alpha_max, 1/alpha_i + 1/alpha_i^2)."""
    alpha = np.asarray(alpha, dtype=float)
    return np.minimum(1.0 + 1.0 / alpha.max(), 1.0 / alpha + 1.0 / alpha ** 2)


@dataclass
class RateResult:
    eps: np.ndarray
    moment: np.ndarray          # (len(eps), m): mean |X - X^eps|^eta
    moment_se: np.ndarray
    fitted: np.ndarray          # (m,) slopes of log moment vs log eps
    target: np.ndarray          # eta * kappa
    eta: float
    dt_ref: float
    notice: str = ""

    def rows(self):
        out = []
        for k, e in enumerate(self.eps):
            for i in range(self.moment.shape[1]):
                out.append([e, i, self.moment[k, i], self.moment_se[k, i]])
        return out


def weak_error_rate_experiment(params, x0, t, eps_grid, eta=0.5, n_paths=10000,
                               seed=0, ref_factor=25):
    """Fitted exponent of eps -> E|X_i(t) - X_i^eps(t)|^eta per coordinate.

    The reference path is Euler on ``dt_ref = min(eps) / ref_factor``. The
    approximation restarts from the reference state at ``t - eps`` and takes
    one frozen-coefficient step of size eps driven by the same noise
    increments.
    """
    if not 0.0 < eta < 1.0:
        raise DomainError("eta must lie in (0, 1)")
    eps = np.asarray(eps_grid, dtype=float)
    if np.any(np.diff(eps) >= 0):
        raise DomainError("eps_grid must be decreasing")
    if eps[0] >= t:
        raise DomainError("eps must be smaller than t")
    dt_ref = eps.min() / ref_factor
    n_steps, dt_ref = _step_grid(float(t), dt_ref)
    lag = eps / dt_ref
    if np.any(np.abs(lag - np.rint(lag)) > 1e-6):
        raise DomainError("every eps must be a multiple of the reference step")
    lag = np.rint(lag).astype(np.int64)
    rec = np.unique(np.concatenate([n_steps - lag, [n_steps]]))
    X, Zc, Jc, _ = _run(params, x0, n_steps, dt_ref, int(n_paths), seed, rec,
                        keep_noise=True)
    idx = {int(s): k for k, s in enumerate(rec)}
    xt, zt, jt = X[:, -1], Zc[:, -1], Jc[:, -1]
    m = params.m
    mom = np.zeros((eps.size, m))
    mse = np.zeros((eps.size, m))
    for k, (e, l) in enumerate(zip(eps, lag)):
        r = idx[int(n_steps - l)]
        xs = X[:, r]
        approx = _euler_update(xs, e, params.b, params.beta, params.sigma, params.alpha,
                               zt - Zc[:, r], jt - Jc[:, r])
        d = np.abs(xt - approx) ** eta
        mom[k] = d.mean(axis=0)
        mse[k] = d.std(axis=0, ddof=1) / math.sqrt(n_paths)
    fitted = np.full(m, np.nan)
    notice = ""
    for i in range(m):
        if np.all(mom[:, i] > 0):
            fitted[i] = np.polyfit(np.log(eps), np.log(mom[:, i]), 1)[0]
        else:
            notice = "degenerate data: zero differences, exponent fit rejected"
    if notice:
        warnings.warn(notice, RuntimeWarning)
    return RateResult(eps, mom, mse, fitted, eta * kappa_rates(params.alpha), eta,
                      dt_ref, notice)
