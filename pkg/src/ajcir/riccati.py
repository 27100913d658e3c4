"""Characteristic function of the process via the generalized Riccati system.

For Re u <= 0,

    E exp(<u, X^x(t)>) = exp(phi(t, u) + <x, psi(t, u)>),
    d phi / dt = F(psi),  phi(0) = 0,
    d psi / dt = R(psi),  psi(0) = u,

with F(u) = <b, u> + int (exp(<u, z>) - 1) nu(dz) and
R_j(u) = sum_k beta_kj u_k + sigma_j (-u_j)^alpha_j (principal branch).

The system is integrated by a Dormand-Prince 5(4) pair with dense output.
phi is carried as extra state components so one error controller covers
both. A compiled per-u kernel handles closed-form Levy measures; a batched
numpy integrator covers the rest and is the fallback backend.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from ._backend import USE_NUMBA, jit
from .errors import (BranchError, DomainError, InvariantViolationError,
                     NonConvergenceError, NotSubcriticalError,
                     StepFailureError, ValidationError)
from .model import (JumpTable, ModelParams, is_subcritical, log_moment_holds,
                    pack_tables,
                    spectral_abscissa)

if USE_NUMBA:
    from numba import prange
else:
    prange = range

RTOL = 1e-10
ATOL = 1e-12
BRANCH_TOL = 1e-12
RE_PSI_TOL = 1e-8
MAX_STEPS = 200_000

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176,
                                -5103 / 18656)
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                                -17253 / 339200, 22 / 525, -1 / 40)
# dense-output weights (Hairer, Norsett & Wanner)
_D1, _D3, _D4, _D5, _D6, _D7 = (-12715105075 / 11282082432,
                                87487479700 / 32700410799,
                                -10690763975 / 1880347072,
                                701980252875 / 199316789632,
                                -1453857185 / 822651844,
                                69997945 / 29380423)

ST_OK, ST_STEP, ST_REPSI, ST_NOCONV, ST_MAXSTEPS = 0, 1, 2, 3, 4


# -- F and R ------------------------------------------------------------------

def _as_u(u, m):
    u = np.asarray(u, dtype=np.complex128)
    if u.shape[-1:] != (m,):
        raise ValidationError(f"u must have trailing dimension {m}")
    if np.any(u.real > BRANCH_TOL):
        raise BranchError("F and R need Re(u_j) <= 0 for every j")
    return u


def F_func(params: ModelParams, u):
    """F(u) = <b,u> + int (exp(<u,z>) - 1) nu(dz); vectorised over leading axes."""
    u = _as_u(u, params.m)
    val = params.jump_table().exponent(u, drift=params.b)
    return complex(val) if np.ndim(val) == 0 else val


def _stable_power(w, alpha):
    """w^alpha on the principal branch, with 0^alpha = 0."""
    out = np.zeros(np.broadcast(w, alpha).shape, dtype=np.complex128)
    nz = w != 0
    wa = np.broadcast_to(w, out.shape)
    aa = np.broadcast_to(alpha, out.shape)
    out[nz] = wa[nz] ** aa[nz]
    return out


def R_func(params: ModelParams, u):
    """R_j(u) = sum_k beta_kj u_k + sigma_j (-u_j)^alpha_j."""
    u = _as_u(u, params.m)
    return u @ params.beta + params.sigma * _stable_power(-u, params.alpha)


def closed_form_psi_1d(alpha, kappa, rho, s):
    """Solution of f' = kappa f + (-f)^alpha, f(0) = -rho, for real data.

    f(s) = -((rho^(1-alpha) - 1/kappa) exp(-kappa (alpha-1) s) + 1/kappa)^(1/(1-alpha))
    """
    if kappa == 0.0:
        raise DomainError("kappa must be nonzero")
    if not rho > 0.0:
        raise DomainError("rho must be positive")
    s = np.asarray(s, dtype=float)
    bracket = ((rho ** (1.0 - alpha) - 1.0 / kappa)
               * np.exp(-kappa * (alpha - 1.0) * s) + 1.0 / kappa)
    if np.any(bracket <= 0.0):
        raise DomainError("closed form undefined: bracket <= 0 (blow-up time "
                          "reached or passed)")
    out = -bracket ** (1.0 / (1.0 - alpha))
    return float(out) if out.ndim == 0 else out


# -- compiled per-u integrator -----------------------------------------------------

@jit
def _rhs(y, f, m, beta, sigma, alpha, drift, pl, pm, ex):
    psi = y[2:]
    a, b = K.levy_exponent_packed(psi, drift, pl, pm, ex)
    f[0] = a
    f[1] = b
    for j in range(m):
        acc = 0j
        for k in range(m):
            acc += beta[k, j] * psi[k]
        w = -psi[j]
        if w != 0:
            acc += sigma[j] * w ** alpha[j]
        f[2 + j] = acc


@jit
def _err_norm(y, ynew, e, atol, rtol):
    err = 0.0
    for i in range(y.shape[0]):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        v = abs(e[i]) / sc
        if v > err:
            err = v
    return err


@jit
def _solve_one(u, t_out, t_end, inv_mode, inv_tol, m, beta, sigma, alpha,
               drift, pl, pm, ex, rtol, atol, max_steps, phi_out, psi_out):
    n = 2 + m
    y = np.zeros(n, dtype=np.complex128)
    for j in range(m):
        y[2 + j] = u[j]
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    k5 = np.empty_like(k1)
    k6 = np.empty_like(k1)
    k7 = np.empty_like(k1)
    yt = np.empty_like(k1)
    ynew = np.empty_like(k1)
    e = np.empty_like(k1)
    _rhs(y, k1, m, beta, sigma, alpha, drift, pl, pm, ex)
    nt = t_out.shape[0]
    jo = 0
    while jo < nt and t_out[jo] <= 0.0:
        phi_out[jo, 0] = y[0]
        phi_out[jo, 1] = y[1]
        for j in range(m):
            psi_out[jo, j] = y[2 + j]
        jo += 1
    t = 0.0
    ymax = 0.0
    fmax = 0.0
    for i in range(n):
        ymax = max(ymax, abs(y[i]))
        fmax = max(fmax, abs(k1[i]))
    h = t_end
    if fmax > 0.0:
        h = min(t_end, 0.01 * max(ymax, atol / rtol) / fmax)
    h = max(h, 1e-12)
    steps = 0
    quiet = 0
    while t < t_end:
        if (not inv_mode) and jo >= nt:
            break
        if t + h > t_end:
            h = t_end - t
        for i in range(n):
            yt[i] = y[i] + h * _A21 * k1[i]
        _rhs(yt, k2, m, beta, sigma, alpha, drift, pl, pm, ex)
        for i in range(n):
            yt[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        _rhs(yt, k3, m, beta, sigma, alpha, drift, pl, pm, ex)
        for i in range(n):
            yt[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        _rhs(yt, k4, m, beta, sigma, alpha, drift, pl, pm, ex)
        for i in range(n):
            yt[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i]
                                + _A54 * k4[i])
        _rhs(yt, k5, m, beta, sigma, alpha, drift, pl, pm, ex)
        for i in range(n):
            yt[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                + _A64 * k4[i] + _A65 * k5[i])
        _rhs(yt, k6, m, beta, sigma, alpha, drift, pl, pm, ex)
        for i in range(n):
            ynew[i] = y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                                  + _B5 * k5[i] + _B6 * k6[i])
        _rhs(ynew, k7, m, beta, sigma, alpha, drift, pl, pm, ex)
        for i in range(n):
            e[i] = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                        + _E6 * k6[i] + _E7 * k7[i])
        err = _err_norm(y, ynew, e, atol, rtol)
        steps += 1
        if steps > max_steps:
            return ST_MAXSTEPS, steps, t
        if err <= 1.0:
            tn = t + h
            while jo < nt and t_out[jo] <= tn:
                th = (t_out[jo] - t) / h
                th1 = 1.0 - th
                for i in range(n):
                    r2 = ynew[i] - y[i]
                    r3 = h * k1[i] - r2
                    r4 = r2 - h * k7[i] - r3
                    r5 = h * (_D1 * k1[i] + _D3 * k3[i] + _D4 * k4[i]
                              + _D5 * k5[i] + _D6 * k6[i] + _D7 * k7[i])
                    v = y[i] + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))
                    if i < 2:
                        phi_out[jo, i] = v
                    else:
                        psi_out[jo, i - 2] = v
                jo += 1
            for j in range(m):
                if ynew[2 + j].real > RE_PSI_TOL:
                    return ST_REPSI, steps, tn
            if inv_mode:
                fa = abs(k7[0] + k7[1])
                if fa < inv_tol * max(1.0, abs(ynew[0] + ynew[1])):
                    quiet += 1
                else:
                    quiet = 0
            t = tn
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            if inv_mode and quiet >= 5:
                phi_out[0, 0] = y[0]
                phi_out[0, 1] = y[1]
                for j in range(m):
                    psi_out[0, j] = y[2 + j]
                return ST_OK, steps, t
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h *= fac
        if h < 1e-14 * max(1.0, t):
            return ST_STEP, steps, t
    if inv_mode:
        return ST_NOCONV, steps, t
    return ST_OK, steps, t


@jit(parallel=True)
def _solve_many(U, t_out, t_end, inv_mode, inv_tol, beta, sigma, alpha,
                drift, pl, pm, ex, rtol, atol, max_steps, phi_out, psi_out,
                status, steps, t_fail):
    m = U.shape[1]
    for i in prange(U.shape[0]):
        st, ns, tf = _solve_one(U[i], t_out, t_end, inv_mode, inv_tol, m, beta,
                                sigma, alpha, drift, pl, pm, ex, rtol, atol,
                                max_steps, phi_out[i], psi_out[i])
        status[i] = st
        steps[i] = ns
        t_fail[i] = tf


# -- batched numpy integrator ------------------------------------------------------

def _solve_batch_numpy(U, t_out, t_end, inv_mode, inv_tol, rhs, rtol, atol,
                       max_steps):
    """Vectorised DOPRI5 with a shared step across the rows of ``U``."""
    n, m = U.shape
    nt = t_out.shape[0]
    phi_out = np.zeros((n, max(nt, 1), 2), dtype=np.complex128)
    psi_out = np.zeros((n, max(nt, 1), m), dtype=np.complex128)
    y = np.zeros((n, 2 + m), dtype=np.complex128)
    y[:, 2:] = U
    k1 = rhs(y)
    jo = 0
    while jo < nt and t_out[jo] <= 0.0:
        phi_out[:, jo] = y[:, :2]
        psi_out[:, jo] = y[:, 2:]
        jo += 1
    fmax = np.abs(k1).max() if k1.size else 0.0
    h = t_end if fmax == 0.0 else min(t_end, 0.01 * max(np.abs(y).max(), atol / rtol) / fmax)
    h = max(h, 1e-12)
    t = 0.0
    steps = 0
    quiet = np.zeros(n, dtype=np.int64)
    while t < t_end:
        if not inv_mode and jo >= nt:
            break
        h = min(h, t_end - t)
        k2 = rhs(y + h * _A21 * k1)
        k3 = rhs(y + h * (_A31 * k1 + _A32 * k2))
        k4 = rhs(y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
        k5 = rhs(y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
        k6 = rhs(y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5))
        ynew = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        k7 = rhs(ynew)
        e = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        err = float(np.max(np.abs(e) / sc)) if e.size else 0.0
        steps += 1
        if steps > max_steps:
            raise StepFailureError(f"step budget exhausted at t={t:.6g}")
        if err <= 1.0:
            tn = t + h
            r2 = ynew - y
            r3 = h * k1 - r2
            r4 = r2 - h * k7 - r3
            r5 = h * (_D1 * k1 + _D3 * k3 + _D4 * k4 + _D5 * k5 + _D6 * k6 + _D7 * k7)
            while jo < nt and t_out[jo] <= tn:
                th = (t_out[jo] - t) / h
                th1 = 1.0 - th
                v = y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))
                phi_out[:, jo] = v[:, :2]
                psi_out[:, jo] = v[:, 2:]
                jo += 1
            bad = ynew[:, 2:].real.max(axis=1) > RE_PSI_TOL
            if bad.any():
                i = int(np.argmax(bad))
                raise InvariantViolationError(
                    f"Re(psi) > {RE_PSI_TOL} at t={tn:.6g} for u0={U[i]}")
            if inv_mode:
                fa = np.abs(k7[:, 0] + k7[:, 1])
                ok = fa < inv_tol * np.maximum(1.0, np.abs(ynew[:, 0] + ynew[:, 1]))
                quiet = np.where(ok, quiet + 1, 0)
            t, y, k1 = tn, ynew, k7
            if inv_mode and np.all(quiet >= 5):
                phi_out[:, 0] = y[:, :2]
                psi_out[:, 0] = y[:, 2:]
                return phi_out, psi_out, steps
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h *= fac
        if h < 1e-14 * max(1.0, t):
            raise StepFailureError(f"minimum step reached at t={t:.6g}")
    if inv_mode:
        raise NonConvergenceError(
            f"tail criterion not met by s_max={t_end:.6g}")
    return phi_out, psi_out, steps


# -- drivers --------------------------------------------------------------------

@dataclass(frozen=True)
class _Problem:
    m: int
    beta: np.ndarray
    sigma: np.ndarray
    alpha: np.ndarray
    drift_a: np.ndarray
    table_a: JumpTable
    drift_b: np.ndarray
    table_b: JumpTable

    @property
    def compiled_ok(self):
        return USE_NUMBA and self.table_a.closed_form and self.table_b.closed_form

    def numpy_rhs(self):
        beta, sigma, alpha = self.beta, self.sigma, self.alpha
        ta, tb, da, db = self.table_a, self.table_b, self.drift_a, self.drift_b

        def rhs(y):
            psi = y[:, 2:]
            f = np.empty_like(y)
            f[:, 0] = ta.exponent(psi, drift=da)
            f[:, 1] = tb.exponent(psi, drift=db)
            f[:, 2:] = psi @ beta + sigma * _stable_power(-psi, alpha)
            return f
        return rhs


def _problem(params, split=False):
    table = params.jump_table()
    zero = np.zeros(params.m)
    if split:
        return _Problem(params.m, params.beta, params.sigma, params.alpha,
                        np.asarray(params.b, dtype=float), table.restrict(0.0, 1.0),
                        zero, table.restrict(1.0, np.inf))
    return _Problem(params.m, params.beta, params.sigma, params.alpha,
                    np.asarray(params.b, dtype=float), table, zero, JumpTable(params.m))


def _solve(problem, U, t_out, t_end, inv_mode=False, inv_tol=1e-10, rtol=RTOL,
           atol=ATOL, max_steps=MAX_STEPS, chunk=256):
    """Integrate for every row of ``U``; returns phi (n, nt, 2), psi (n, nt, m)."""
    U = np.ascontiguousarray(np.atleast_2d(U), dtype=np.complex128)
    t_out = np.ascontiguousarray(t_out, dtype=float)
    n, m = U.shape
    if problem.compiled_ok:
        nt = max(t_out.shape[0], 1)
        phi = np.zeros((n, nt, 2), dtype=np.complex128)
        psi = np.zeros((n, nt, m), dtype=np.complex128)
        status = np.zeros(n, dtype=np.int64)
        steps = np.zeros(n, dtype=np.int64)
        tf = np.zeros(n)
        pl, pm, ex = pack_tables(problem.table_a, problem.table_b)
        _solve_many(U, t_out, float(t_end), bool(inv_mode), float(inv_tol),
                    np.ascontiguousarray(problem.beta), np.ascontiguousarray(problem.sigma),
                    np.ascontiguousarray(problem.alpha), problem.drift_a, pl, pm, ex,
                    float(rtol), float(atol), int(max_steps),
                    phi, psi, status, steps, tf)
        bad = np.nonzero(status)[0]
        if bad.size:
            i = bad[0]
            where = f"t={tf[i]:.6g}, u0={U[i]}"
            code = status[i]
            if code == ST_REPSI:
                raise InvariantViolationError(f"Re(psi) > {RE_PSI_TOL} at {where}")
            if code == ST_NOCONV:
                raise NonConvergenceError(f"tail criterion not met by s_max at {where}")
            raise StepFailureError(f"integrator failed ({'minimum step' if code == ST_STEP else 'step budget'}) at {where}")
        return phi, psi, steps
    rhs = problem.numpy_rhs()
    phi = np.zeros((n, max(t_out.shape[0], 1), 2), dtype=np.complex128)
    psi = np.zeros((n, max(t_out.shape[0], 1), m), dtype=np.complex128)
    steps = np.zeros(n, dtype=np.int64)
    order = np.argsort(np.abs(U).max(axis=1), kind="stable")
    for s in range(0, n, chunk):
        idx = order[s:s + chunk]
        p, q, ns = _solve_batch_numpy(U[idx], t_out, t_end, inv_mode, inv_tol, rhs,
                                      rtol, atol, max_steps)
        phi[idx], psi[idx], steps[idx] = p, q, ns
    return phi, psi, steps


@dataclass(frozen=True)
class RiccatiState:
    t: float
    phi: complex
    psi: np.ndarray


@dataclass(frozen=True)
class RiccatiTrajectory:
    """phi and psi at the requested times for a single initial value ``u0``."""
    u0: np.ndarray
    t: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    n_steps: int

    def states(self):
        return [RiccatiState(float(t), complex(p), s.copy())
                for t, p, s in zip(self.t, self.phi, self.psi)]

    def write_csv(self, path):
        m = self.psi.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "phi_re", "phi_im"]
                       + [f"psi{j}_{p}" for j in range(m) for p in ("re", "im")])
            for t, p, s in zip(self.t, self.phi, self.psi):
                row = [repr(float(t)), repr(p.real), repr(p.imag)]
                for v in s:
                    row += [repr(v.real), repr(v.imag)]
                w.writerow(row)


def solve_riccati(params: ModelParams, u0, T, rtol=RTOL, atol=ATOL, t_eval=None):
    """Integrate the Riccati system from ``u0`` and sample it at ``t_eval``."""
    u0 = _as_u(np.atleast_1d(u0), params.m)
    if not T > 0.0:
        raise DomainError("T must be positive")
    t_eval = np.linspace(0.0, T, 101) if t_eval is None else np.asarray(t_eval, float)
    if np.any(np.diff(t_eval) < 0.0) or t_eval[0] < 0.0 or t_eval[-1] > T * (1 + 1e-14):
        raise ValidationError("t_eval must be sorted inside [0, T]")
    phi, psi, steps = _solve(_problem(params), u0[None, :], t_eval, float(T),
                             rtol=rtol, atol=atol)
    return RiccatiTrajectory(u0, t_eval, phi[0, :, 0] + phi[0, :, 1], psi[0],
                             int(steps[0]))


def riccati_grid(params: ModelParams, U, times, rtol=RTOL, atol=ATOL, split=False):
    """phi and psi for many initial values ``U`` (n, m) at sorted ``times``.

    Returns ``(phi, psi)`` with shapes (n, nt) and (n, nt, m); with
    ``split=True`` phi has a trailing axis of length 2 holding the parts
    from <b,u> + nu on |z| <= 1 and from nu on |z| > 1.
    """
    U = _as_u(np.atleast_2d(U), params.m)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    t_end = float(times.max())
    if t_end <= 0.0:
        phi = np.zeros((U.shape[0], times.size, 2), dtype=np.complex128)
        psi = np.broadcast_to(U[:, None, :], (U.shape[0], times.size, params.m)).copy()
        return (phi if split else phi.sum(-1)), psi
    phi, psi, _ = _solve(_problem(params, split), U, times, t_end, rtol=rtol, atol=atol)
    return (phi if split else phi.sum(-1)), psi


@dataclass(frozen=True)
class CharFnValue:
    value: complex
    error_estimate: float
    trajectory: Optional[RiccatiTrajectory] = None


def char_function(params: ModelParams, x, t, u, tol=RTOL, with_trajectory=False):
    """E exp(<u, X^x(t)>) with an a-posteriori error estimate.

    The estimate is the change in the value when the tolerances are
    loosened a hundredfold.
    """
    x = np.asarray(x, dtype=float)
    u = _as_u(np.atleast_1d(u), params.m)
    if t == 0.0:
        return CharFnValue(complex(np.exp(x @ u)), 0.0)
    if np.all(u == 0):
        return CharFnValue(1.0 + 0j, 0.0)
    times = np.linspace(0.0, t, 51) if with_trajectory else np.array([t])
    phi, psi = riccati_grid(params, u[None, :], times, rtol=tol, atol=tol * 1e-2)
    val = np.exp(phi[0, -1] + psi[0, -1] @ x)
    phi2, psi2 = riccati_grid(params, u[None, :], [t], rtol=tol * 100, atol=tol)
    est = abs(val - np.exp(phi2[0, -1] + psi2[0, -1] @ x))
    traj = None
    if with_trajectory:
        traj = RiccatiTrajectory(u, times, phi[0], psi[0], 0)
    return CharFnValue(complex(val), float(est), traj)


def char_values(params: ModelParams, x, t, U, tol=RTOL):
    """Vectorised characteristic function over the rows of ``U``."""
    x = np.asarray(x, dtype=float)
    phi, psi = riccati_grid(params, U, [t], rtol=tol, atol=tol * 1e-2)
    return np.exp(phi[:, 0] + psi[:, 0] @ x)


def split_char(params: ModelParams, x, t, u, tol=RTOL):
    """Factors (Q0, Q1) of the characteristic function.

    Q0 carries <b,u>, the jumps of norm <= 1 and the initial state; Q1
    carries the jumps of norm > 1 started from 0. Both use the same psi.
    """
    x = np.asarray(x, dtype=float)
    u = _as_u(np.atleast_1d(u), params.m)
    phi, psi = riccati_grid(params, u[None, :], [t], rtol=tol, atol=tol * 1e-2,
                            split=True)
    q0 = np.exp(phi[0, -1, 0] + psi[0, -1] @ x)
    q1 = np.exp(phi[0, -1, 1])
    return complex(q0), complex(q1)


def invariant_char(params: ModelParams, u, tol=1e-10, s_max=None, rtol=RTOL,
                   atol=ATOL):
    """phi(inf, u) = int_0^inf F(psi(s, u)) ds for a subcritical model.

    Integration stops once |F(psi)| < tol max(1, |phi|) on 5 consecutive
    accepted steps. Vectorised over rows of ``u``.
    """
    if not is_subcritical(params.beta):
        raise NotSubcriticalError("invariant law needs a subcritical drift matrix")
    if not log_moment_holds(params.levy):
        raise ValidationError("invariant law needs a finite log-moment of nu")
    u = _as_u(np.asarray(u), params.m)
    single = u.ndim == 1
    U = np.atleast_2d(u)
    if s_max is None:
        s_max = 400.0 / abs(spectral_abscissa(params.beta))
    # psi stays at 0 from u = 0, so those rows are exact and skip the solver
    live = np.any(U != 0, axis=1)
    val = np.zeros(U.shape[0], dtype=np.complex128)
    if live.any():
        phi, _, _ = _solve(_problem(params), U[live], np.zeros(0), float(s_max),
                           inv_mode=True, inv_tol=tol, rtol=rtol, atol=atol)
        val[live] = phi[:, 0, 0] + phi[:, 0, 1]
    return complex(val[0]) if single else val
