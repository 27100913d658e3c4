"""Model parameters, Levy-measure descriptors and admissibility checks.

The process solves

    dX_k = (b_k + sum_j beta_kj X_j) dt + (sigma_k X_k)^(1/alpha_k) dZ_k + dJ_k

where Z_k is a spectrally positive alpha_k-stable Levy process and J is a
subordinator on the nonnegative orthant with Levy measure ``levy``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from . import _kernels as K
from .errors import (DegenerateFitError, DomainError, MomentError,
                     UnknownMomentError, UnsupportedVariantError,
                     ValidationError)

SUBCRITICAL_TOL = 1e-10
SLOPE_TOLERANCE = 0.02


# -- jump-size descriptors for compound Poisson measures ---------------------

@dataclass(frozen=True)
class PointMassJump:
    """Every jump equals ``vector``."""
    vector: tuple

    def __post_init__(self):
        object.__setattr__(self, "vector", tuple(float(v) for v in self.vector))

    @property
    def dim(self):
        return len(self.vector)


@dataclass(frozen=True)
class ExponentialJump:
    """Independent exponential coordinates with the given means (0 allowed)."""
    means: tuple

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(v) for v in self.means))

    @property
    def dim(self):
        return len(self.means)


@dataclass(frozen=True)
class SampledJump:
    """Jump law given only through a sampler.

    ``sampler(u)`` maps an ``(n, n_uniforms)`` array of uniforms in (0, 1)
    to an ``(n, dim)`` array of nonnegative jumps. Moment metadata must be
    declared by the caller; it is not inferred.
    """
    sampler: Callable[[np.ndarray], np.ndarray]
    n_uniforms: int
    dim: int
    mean: Optional[tuple] = None
    log_moment_finite: Optional[bool] = None


JumpLaw = Union[PointMassJump, ExponentialJump, SampledJump]


# -- Levy measure variants ----------------------------------------------------

@dataclass(frozen=True)
class Zero:
    """No jumps."""


@dataclass(frozen=True)
class CoordinateStable:
    """nu(dz) = sum_k weight_k z_k^(-1-theta_k) dz_k on the coordinate axes."""
    theta: tuple
    weight: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        object.__setattr__(self, "weight", tuple(float(v) for v in self.weight))


@dataclass(frozen=True)
class Spherical:
    """nu(dz) = r^(-1-theta) dr lambda(dd) with lambda a finite atom list.

    ``directions`` has one unit vector in the nonnegative orthant per row.
    """
    theta: float
    directions: tuple
    masses: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "directions",
                           tuple(tuple(float(v) for v in d) for d in self.directions))
        object.__setattr__(self, "masses", tuple(float(v) for v in self.masses))

    @classmethod
    def uniform(cls, theta, m, n_atoms=64):
        """Quasi-uniform atoms for the surface measure on the positive orthant."""
        if m == 1:
            return cls(theta, ((1.0,),), (1.0,))
        if m == 2:
            ang = (np.arange(n_atoms) + 0.5) * (0.5 * np.pi / n_atoms)
            dirs = np.column_stack([np.cos(ang), np.sin(ang)])
            total = 0.5 * np.pi
        elif m == 3:
            # Fibonacci lattice restricted to the first octant
            i = np.arange(n_atoms) + 0.5
            z = 1.0 - i / n_atoms
            phi = (0.5 * np.pi) * ((i * 0.6180339887498949) % 1.0)
            r = np.sqrt(1.0 - z * z)
            dirs = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
            total = 0.5 * np.pi
        else:
            raise ValidationError("uniform atoms are provided for m <= 3 only")
        masses = np.full(n_atoms, total / n_atoms)
        return cls(theta, tuple(map(tuple, dirs)), tuple(masses))


@dataclass(frozen=True)
class TemperedCoordinate:
    """nu(dz) = sum_k g_k(z_k) z_k^(-1-theta_k) dz_k with bounded g_k >= 0.

    ``g`` holds one vectorised callable per coordinate (``None`` for no
    jumps in that coordinate) and ``g_bound`` the declared sup of each.
    """
    theta: tuple
    g: tuple
    g_bound: tuple
    label: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        object.__setattr__(self, "g", tuple(self.g))
        object.__setattr__(self, "g_bound", tuple(float(v) for v in self.g_bound))

    @classmethod
    def exponential(cls, theta, rate):
        """Tempered stable: g_k(z) = exp(-rate_k z)."""
        rate = tuple(float(r) for r in rate)
        g = tuple(_ExpTilt(r) for r in rate)
        return cls(theta, g, tuple(1.0 for _ in rate), label="exponential")


@dataclass(frozen=True)
class _ExpTilt:
    rate: float

    def __call__(self, z):
        return np.exp(-self.rate * np.asarray(z, dtype=float))


@dataclass(frozen=True)
class Truncated:
    """Restriction of ``inner`` to jumps with Euclidean norm <= radius."""
    inner: "LevyMeasureSpec"
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class CompoundPoisson:
    rate: float
    jump: JumpLaw

    def __post_init__(self):
        object.__setattr__(self, "rate", float(self.rate))


LevyMeasureSpec = Union[Zero, CoordinateStable, Spherical, TemperedCoordinate,
                        Truncated, CompoundPoisson]


# -- model parameters ---------------------------------------------------------

def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the SDE. Arrays are stored read-only."""
    m: int
    b: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    alpha: np.ndarray
    levy: LevyMeasureSpec = field(default_factory=Zero)

    def __post_init__(self):
        m = int(self.m)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "b", _frozen(np.reshape(self.b, -1)))
        object.__setattr__(self, "beta", _frozen(np.reshape(self.beta, (m, m))))
        object.__setattr__(self, "sigma", _frozen(np.reshape(self.sigma, -1)))
        object.__setattr__(self, "alpha", _frozen(np.reshape(self.alpha, -1)))

    def replace(self, **changes):
        return replace(self, **changes)

    def diagonal_drift(self):
        return self.replace(beta=np.diag(np.diag(self.beta)))

    def jump_table(self):
        return jump_table(self.levy, self.m)

    def to_dict(self):
        return {"m": self.m, "b": self.b.tolist(), "beta": self.beta.tolist(),
                "sigma": self.sigma.tolist(), "alpha": self.alpha.tolist(),
                "levy": levy_to_dict(self.levy)}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def raise_if_invalid(self):
        if self.violations:
            raise ValidationError("; ".join(self.violations))


def _check_levy(levy, m, out, path="levy"):
    if isinstance(levy, Zero):
        return
    if isinstance(levy, CoordinateStable):
        if len(levy.theta) != m or len(levy.weight) != m:
            out.append(f"{path}: theta/weight must have length {m}")
            return
        for k, (th, w) in enumerate(zip(levy.theta, levy.weight)):
            if not 0.0 < th < 1.0:
                out.append(f"{path}.theta[{k}] not in (0,1)")
            if not (w >= 0.0 and math.isfinite(w)):
                out.append(f"{path}.weight[{k}] < 0")
        return
    if isinstance(levy, Spherical):
        if not 0.0 < levy.theta < 1.0:
            out.append(f"{path}.theta not in (0,1)")
        if len(levy.directions) != len(levy.masses):
            out.append(f"{path}: directions and masses differ in length")
        for i, (d, w) in enumerate(zip(levy.directions, levy.masses)):
            d = np.asarray(d)
            if d.shape != (m,):
                out.append(f"{path}.directions[{i}] has wrong dimension")
                continue
            if np.any(d < 0.0) or abs(np.linalg.norm(d) - 1.0) > 1e-9:
                out.append(f"{path}.directions[{i}] not a unit vector in the "
                           "nonnegative orthant")
            if not w >= 0.0:
                out.append(f"{path}.masses[{i}] < 0")
        return
    if isinstance(levy, TemperedCoordinate):
        if not (len(levy.theta) == len(levy.g) == len(levy.g_bound) == m):
            out.append(f"{path}: theta/g/g_bound must have length {m}")
            return
        for k in range(m):
            if not 0.0 < levy.theta[k] < 1.0:
                out.append(f"{path}.theta[{k}] not in (0,1)")
            gb = levy.g_bound[k]
            if not (math.isfinite(gb) and gb >= 0.0):
                out.append(f"{path}.g_bound[{k}] must be a finite bound >= 0")
            if levy.g[k] is not None and not callable(levy.g[k]):
                out.append(f"{path}.g[{k}] is not callable")
        return
    if isinstance(levy, Truncated):
        if not (levy.radius > 0.0):
            out.append(f"{path}.radius must be positive")
        _check_levy(levy.inner, m, out, path + ".inner")
        return
    if isinstance(levy, CompoundPoisson):
        if not (levy.rate > 0.0 and math.isfinite(levy.rate)):
            out.append(f"{path}.rate must be positive and finite")
        j = levy.jump
        if j.dim != m:
            out.append(f"{path}.jump has dimension {j.dim}, expected {m}")
        if isinstance(j, PointMassJump) and min(j.vector, default=0.0) < 0.0:
            out.append(f"{path}.jump.vector has a negative entry")
        if isinstance(j, ExponentialJump) and min(j.means, default=0.0) < 0.0:
            out.append(f"{path}.jump.means has a negative entry")
        return
    out.append(f"{path}: unknown variant {type(levy).__name__}")


def validate(params: ModelParams) -> ValidationReport:
    """List every violated admissibility constraint (empty when valid)."""
    out = []
    m = params.m
    if m < 1:
        return ValidationReport(("m must be a positive integer",))
    for name in ("b", "sigma", "alpha"):
        if getattr(params, name).shape != (m,):
            out.append(f"{name} must have length {m}")
    if out:
        return ValidationReport(tuple(out))
    for k in range(m):
        if not (params.b[k] >= 0.0 and math.isfinite(params.b[k])):
            out.append(f"b[{k}] < 0")
        if not 1.0 < params.alpha[k] < 2.0:
            out.append(f"alpha[{k}] not in (1,2)")
        if not (params.sigma[k] > 0.0 and math.isfinite(params.sigma[k])):
            out.append(f"sigma[{k}] <= 0")
    if not np.all(np.isfinite(params.beta)):
        out.append("beta has non-finite entries")
    for k in range(m):
        for j in range(m):
            if k != j and params.beta[k, j] < 0.0:
                out.append(f"beta[{k}][{j}] < 0")
    _check_levy(params.levy, m, out)
    return ValidationReport(tuple(out))


def is_subcritical(beta) -> bool:
    """True iff every eigenvalue of ``beta`` has real part below -1e-10."""
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    if beta.shape[0] != beta.shape[1]:
        raise ValidationError("beta must be square")
    return bool(np.max(np.linalg.eigvals(beta).real) < -SUBCRITICAL_TOL)


def spectral_abscissa(beta):
    return float(np.max(np.linalg.eigvals(np.atleast_2d(beta)).real))


# -- flattened jump table -----------------------------------------------------

_EMPTY = np.zeros(0)


@dataclass(frozen=True)
class JumpTable:
    """A Levy measure flattened into radial power-law and compound-Poisson parts.

    Power-law component ``c`` contributes
    ``w_c g_c(r) r^(-1-theta_c) dr`` along direction ``d_c`` for radii in
    ``(lo_c, hi_c]``; ``g_c`` is ``None`` for g = 1. ``exact`` marks
    untruncated coordinate-stable components, which are sampled exactly.
    Compound-Poisson components keep jumps with norm in ``(rlo, rhi]``.
    """
    m: int
    pl_w: np.ndarray = _EMPTY
    pl_theta: np.ndarray = _EMPTY
    pl_lo: np.ndarray = _EMPTY
    pl_hi: np.ndarray = _EMPTY
    pl_dir: np.ndarray = None
    pl_g: tuple = ()
    pl_gbound: np.ndarray = _EMPTY
    pl_exact: np.ndarray = np.zeros(0, dtype=bool)
    cp_rate: np.ndarray = _EMPTY
    cp_jump: tuple = ()
    cp_rlo: np.ndarray = _EMPTY
    cp_rhi: np.ndarray = _EMPTY

    def __post_init__(self):
        if self.pl_dir is None:
            object.__setattr__(self, "pl_dir", np.zeros((0, self.m)))

    @property
    def n_powerlaw(self):
        return self.pl_w.shape[0]

    @property
    def n_poisson(self):
        return self.cp_rate.shape[0]

    def _cp_filter(self, kind):
        idx = [i for i, j in enumerate(self.cp_jump) if isinstance(j, kind)]
        return np.array(idx, dtype=int)

    @property
    def closed_form(self):
        """True when the Laplace exponent has a closed form (no callables)."""
        if any(g is not None for g in self.pl_g):
            return False
        for i, j in enumerate(self.cp_jump):
            if isinstance(j, SampledJump):
                return False
            if isinstance(j, ExponentialJump) and (
                    self.cp_rlo[i] > 0.0 or self.cp_rhi[i] < np.inf):
                return False
        return True

    def packed(self, part=0):
        """Closed-form part of the table as packed arrays ``(pl, pm, ex)``.

        Rows carry ``part`` in column 0 so two tables can share one kernel
        call (see :func:`pack_tables`).
        """
        plain = np.array([g is None for g in self.pl_g], dtype=bool)
        m = self.m
        idx = np.flatnonzero(plain) if plain.size else np.zeros(0, dtype=int)
        pl = np.zeros((idx.size, K.PL_COLS + m))
        for r, c in enumerate(idx):
            th, lo, hi = self.pl_theta[c], self.pl_lo[c], self.pl_hi[c]
            pl[r, :K.PL_COLS] = (
                part, self.pl_w[c], th, lo, hi,
                lo ** (-th) if lo > 0.0 else 0.0,
                hi ** (-th) if hi < np.inf else 0.0,
                math.gamma(1.0 - th) / th, math.gamma(-th))
            pl[r, K.PL_COLS:] = self.pl_dir[c]
        pm = self._cp_filter(PointMassJump)
        ex = self._cp_filter(ExponentialJump)
        if ex.size:
            ex = ex[(self.cp_rlo[ex] == 0.0) & (self.cp_rhi[ex] == np.inf)]
        pm_arr = np.zeros((pm.size, 2 + m))
        for r, c in enumerate(pm):
            pm_arr[r, 0] = part
            pm_arr[r, 1] = self.cp_rate[c]
            pm_arr[r, 2:] = self.cp_jump[c].vector
        ex_arr = np.zeros((ex.size, 2 + m))
        for r, c in enumerate(ex):
            ex_arr[r, 0] = part
            ex_arr[r, 1] = self.cp_rate[c]
            ex_arr[r, 2:] = self.cp_jump[c].means
        return pl, pm_arr, ex_arr

    def restrict(self, lo=0.0, hi=np.inf):
        """Restriction of the measure to jump norms in (lo, hi]."""
        new_lo = np.maximum(self.pl_lo, lo)
        new_hi = np.minimum(self.pl_hi, hi)
        keep = new_lo < new_hi
        exact = self.pl_exact & (new_lo == 0.0) & (new_hi == np.inf)
        cp_keep = []
        rlo, rhi = [], []
        for i, j in enumerate(self.cp_jump):
            a = max(self.cp_rlo[i], lo)
            b = min(self.cp_rhi[i], hi)
            if isinstance(j, PointMassJump):
                n = float(np.linalg.norm(j.vector))
                if not a < n <= b:
                    continue
            elif a >= b:
                continue
            cp_keep.append(i)
            rlo.append(a)
            rhi.append(b)
        cp_keep = np.array(cp_keep, dtype=int)
        return JumpTable(
            self.m, self.pl_w[keep], self.pl_theta[keep], new_lo[keep],
            new_hi[keep], self.pl_dir[keep], tuple(g for g, k in zip(self.pl_g, keep) if k),
            self.pl_gbound[keep], exact[keep], self.cp_rate[cp_keep],
            tuple(self.cp_jump[i] for i in cp_keep), np.array(rlo, dtype=float),
            np.array(rhi, dtype=float))

    # -- Laplace exponent --------------------------------------------------
    def exponent(self, u, drift=None):
        """int (exp(<u,z>) - 1) nu(dz) (+ <drift, u>) for rows of complex ``u``."""
        u = np.asarray(u, dtype=np.complex128)
        flat = u.reshape(-1, self.m)
        d = np.zeros(self.m) if drift is None else np.asarray(drift, dtype=float)
        out = K.levy_exponent_vec(flat, d, *self.packed())[0]
        if not self.closed_form:
            out = out + self._exponent_general(flat)[0]
        return out.reshape(u.shape[:-1])

    def _exponent_general(self, flat):
        """Quadrature / Monte-Carlo part of the exponent, with standard errors."""
        val = np.zeros(flat.shape[0], dtype=np.complex128)
        se = np.zeros(flat.shape[0])
        for c, g in enumerate(self.pl_g):
            if g is None or self.pl_w[c] == 0.0:
                continue
            s = flat @ self.pl_dir[c]
            for i, si in enumerate(s):
                val[i] += self.pl_w[c] * _tempered_integral(
                    g, self.pl_theta[c], self.pl_lo[c], self.pl_hi[c], si)
        for i, j in enumerate(self.cp_jump):
            closed = isinstance(j, PointMassJump) or (
                isinstance(j, ExponentialJump) and self.cp_rlo[i] == 0.0
                and self.cp_rhi[i] == np.inf)
            if closed:
                continue
            z = _jump_sample_for_quadrature(j)
            nz = np.linalg.norm(z, axis=1)
            inside = (nz > self.cp_rlo[i]) & (nz <= self.cp_rhi[i])
            e = np.exp(flat @ z.T.astype(np.complex128)) * inside
            val += self.cp_rate[i] * (e.mean(axis=1) - inside.mean())
            se += self.cp_rate[i] * np.abs(e - inside).std(axis=1) / math.sqrt(z.shape[0])
        return val, se

    # -- moments -------------------------------------------------------------
    def first_moment(self):
        """int z nu(dz); raises :class:`MomentError` when it is infinite."""
        mean = np.zeros(self.m)
        for c in range(self.n_powerlaw):
            w, th, lo, hi = (self.pl_w[c], self.pl_theta[c], self.pl_lo[c],
                             self.pl_hi[c])
            if w == 0.0:
                continue
            g = self.pl_g[c]
            if g is None:
                if hi == np.inf:
                    raise MomentError(
                        "the Levy measure has no first moment: power-law tails "
                        "r^(-1-theta) with theta < 1 need a Truncated, tempered "
                        "or compound-Poisson specification")
                r = (hi ** (1.0 - th) - lo ** (1.0 - th)) / (1.0 - th)
            else:
                r = _tempered_moment(g, th, lo, hi)
            mean += w * r * self.pl_dir[c]
        for i, j in enumerate(self.cp_jump):
            rate = self.cp_rate[i]
            full = self.cp_rlo[i] == 0.0 and self.cp_rhi[i] == np.inf
            if isinstance(j, PointMassJump):
                mean += rate * np.asarray(j.vector)
            elif isinstance(j, ExponentialJump) and full:
                mean += rate * np.asarray(j.means)
            elif isinstance(j, SampledJump) and full and j.mean is not None:
                mean += rate * np.asarray(j.mean, dtype=float)
            elif isinstance(j, SampledJump) and j.mean is None:
                raise UnknownMomentError("sampled jump law declares no mean")
            else:
                z = _jump_sample_for_quadrature(j)
                nz = np.linalg.norm(z, axis=1)
                inside = (nz > self.cp_rlo[i]) & (nz <= self.cp_rhi[i])
                mean += rate * (z * inside[:, None]).mean(axis=0)
        return mean

    def small_jump_mean(self, eps):
        """Per-unit-time mean of power-law jumps with norm <= eps (not exact ones)."""
        drift = np.zeros(self.m)
        for c in range(self.n_powerlaw):
            if self.pl_exact[c] or self.pl_w[c] == 0.0:
                continue
            lo, hi = self.pl_lo[c], min(self.pl_hi[c], eps)
            if hi <= lo:
                continue
            th = self.pl_theta[c]
            g = self.pl_g[c]
            if g is None:
                r = (hi ** (1.0 - th) - lo ** (1.0 - th)) / (1.0 - th)
            else:
                r = _tempered_moment(g, th, lo, hi)
            drift += self.pl_w[c] * r * self.pl_dir[c]
        return drift


_QUAD_SAMPLE_N = 200_000


def _jump_sample_for_quadrature(j):
    """Fixed-seed jump sample used for Monte-Carlo functionals of sampled laws."""
    from .levy_rng import RngStream
    rng = RngStream(0x5EED, 0xC0FFEE)
    n = _QUAD_SAMPLE_N
    if isinstance(j, ExponentialJump):
        u = rng.uniforms(n * j.dim).reshape(n, j.dim)
        return -np.log(u) * np.asarray(j.means)
    u = rng.uniforms(n * j.n_uniforms).reshape(n, j.n_uniforms)
    return np.asarray(j.sampler(u), dtype=float).reshape(n, j.dim)


def _quad_complex(f, a, b):
    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-11)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re = integrate.quad(lambda r: f(r).real, a, b, **opts)[0]
        im = integrate.quad(lambda r: f(r).imag, a, b, **opts)[0]
    return complex(re, im)


def _tempered_integral(g, theta, lo, hi, s):
    """int_lo^hi (exp(s r) - 1) g(r) r^(-1-theta) dr by adaptive quadrature."""
    s = complex(s)
    if s == 0:
        return 0j

    def f(r):
        return np.expm1(s * r) * float(g(r)) * r ** (-1.0 - theta)

    total = 0j
    mid = min(max(lo, 1.0), hi)
    if mid > lo:
        total += _quad_complex(f, lo, mid)
    if hi > mid:
        total += _quad_complex(f, mid, hi)
    return total


def _tempered_moment(g, theta, lo, hi):
    def f(r):
        return float(g(r)) * r ** (-theta)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            mid = min(max(lo, 1.0), hi)
            val = 0.0
            if mid > lo:
                val += integrate.quad(f, lo, mid, limit=400)[0]
            if hi > mid:
                val += integrate.quad(f, mid, hi, limit=400)[0]
        except integrate.IntegrationWarning as exc:
            raise MomentError("tempered Levy measure: first-moment integral "
                              f"did not converge ({exc})") from None
    return val


def pack_tables(table_a, table_b=None):
    """Stack the packed arrays of two tables; rows of ``table_b`` get part 1."""
    pa = table_a.packed(0)
    if table_b is None:
        return pa
    pb = table_b.packed(1)
    return tuple(np.ascontiguousarray(np.vstack([x, y])) for x, y in zip(pa, pb))


def jump_table(levy: LevyMeasureSpec, m: int) -> JumpTable:
    """Flatten a Levy-measure spec into a :class:`JumpTable`."""
    if isinstance(levy, Zero):
        return JumpTable(m)
    if isinstance(levy, CoordinateStable):
        eye = np.eye(m)
        n = m
        return JumpTable(m, np.array(levy.weight), np.array(levy.theta),
                         np.zeros(n), np.full(n, np.inf), eye, (None,) * n,
                         np.ones(n), np.ones(n, dtype=bool))
    if isinstance(levy, Spherical):
        n = len(levy.masses)
        return JumpTable(m, np.array(levy.masses), np.full(n, levy.theta),
                         np.zeros(n), np.full(n, np.inf),
                         np.array(levy.directions).reshape(n, m), (None,) * n,
                         np.ones(n), np.zeros(n, dtype=bool))
    if isinstance(levy, TemperedCoordinate):
        keep = [k for k in range(m) if levy.g[k] is not None]
        n = len(keep)
        return JumpTable(m, np.ones(n), np.array(levy.theta)[keep], np.zeros(n),
                         np.full(n, np.inf), np.eye(m)[keep],
                         tuple(levy.g[k] for k in keep),
                         np.array(levy.g_bound)[keep], np.zeros(n, dtype=bool))
    if isinstance(levy, Truncated):
        return jump_table(levy.inner, m).restrict(0.0, levy.radius)
    if isinstance(levy, CompoundPoisson):
        return JumpTable(m, cp_rate=np.array([levy.rate]), cp_jump=(levy.jump,),
                         cp_rlo=np.zeros(1), cp_rhi=np.full(1, np.inf))
    raise UnsupportedVariantError(f"unknown Levy variant {type(levy).__name__}")


# -- functionals --------------------------------------------------------------

def immigration_functional(params: ModelParams, k: int, xi, return_se=False):
    """b_k xi + int (1 - exp(-xi z_k)) nu(dz), vectorised over ``xi``.

    Closed forms are used for coordinate-stable, spherical and point-mass or
    exponential jumps, adaptive quadrature for tempered measures and a
    fixed-seed Monte-Carlo average for sampled jump laws (with standard
    error when ``return_se`` is set).
    """
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < 0.0):
        raise DomainError("xi must be nonnegative")
    if not 0 <= k < params.m:
        raise DomainError(f"coordinate index {k} out of range")
    table = params.jump_table()
    u = np.zeros(xi_arr.shape + (params.m,), dtype=np.complex128)
    u[..., k] = -xi_arr
    flat = u.reshape(-1, params.m)
    d = np.asarray(params.b, dtype=float)
    val = K.levy_exponent_vec(flat, d, *table.packed())[0]
    se = np.zeros(flat.shape[0])
    if not table.closed_form:
        extra, se = table._exponent_general(flat)
        val = val + extra
        if np.any(se > 0.0):
            warnings.warn("immigration functional of a sampled jump law is a "
                          "Monte-Carlo estimate", RuntimeWarning, stacklevel=2)
    res = np.maximum(-val.real, 0.0).reshape(xi_arr.shape)
    # the truncation terms cancel only to rounding at xi = 0
    res = np.where(xi_arr == 0.0, 0.0, res)
    if return_se:
        return res, se.reshape(xi_arr.shape)
    return float(res) if res.ndim == 0 else res


@dataclass(frozen=True)
class ConditionAReport:
    k: tuple
    vartheta_fit: tuple
    C_fit: tuple
    M_used: tuple
    satisfied: tuple
    overall: bool
    shared_C: float
    slope_tolerance: float = SLOPE_TOLERANCE

    def rows(self):
        return [{"k": k, "vartheta_fit": v, "C_fit": c, "satisfied": s}
                for k, v, c, s in zip(self.k, self.vartheta_fit, self.C_fit,
                                      self.satisfied)]

    def to_dict(self):
        return {"k": list(self.k), "vartheta_fit": list(self.vartheta_fit),
                "C_fit": list(self.C_fit), "M_used": list(self.M_used),
                "satisfied": list(self.satisfied), "overall": self.overall,
                "shared_C": self.shared_C, "slope_tolerance": self.slope_tolerance}


def default_xi_grid():
    return np.geomspace(1.0, 1e6, 25)


def check_condition_a(params: ModelParams, xi_grid=None, k=None,
                      slope_tolerance=SLOPE_TOLERANCE) -> ConditionAReport:
    """Power-law fit of the immigration functional on the upper half of ``xi_grid``.

    Coordinate ``k`` is reported satisfied when the fitted exponent exceeds
    ``alpha[k] - 1 - slope_tolerance`` and the fitted constant is positive.
    With several coordinates the overall verdict is the conjunction and
    ``shared_C`` the smallest per-coordinate constant.
    """
    xi = default_xi_grid() if xi_grid is None else np.asarray(xi_grid, dtype=float)
    if xi.ndim != 1 or xi.size < 8:
        raise ValidationError("xi_grid needs at least 8 points")
    if np.any(np.diff(xi) <= 0.0) or xi[0] <= 0.0:
        raise ValidationError("xi_grid must be positive and increasing")
    if xi[-1] / xi[0] < 100.0 * (1.0 - 1e-12):
        raise ValidationError("xi_grid must span at least two decades")
    ks = range(params.m) if k is None else [int(k)]
    upper = xi[xi.size // 2:]
    out_k, slopes, consts, ms, sats = [], [], [], [], []
    for kk in ks:
        vals = immigration_functional(params, kk, xi)
        if np.all(vals == 0.0):
            raise DegenerateFitError(
                f"immigration functional is identically 0 for coordinate {kk}")
        top = immigration_functional(params, kk, upper)
        pos = top > 0.0
        if pos.sum() < 2:
            slope, const = -np.inf, 0.0
        else:
            slope, icpt = np.polyfit(np.log(upper[pos]), np.log(top[pos]), 1)
            const = math.exp(icpt)
        ok = bool(slope > params.alpha[kk] - 1.0 - slope_tolerance and const > 0.0)
        out_k.append(kk)
        slopes.append(float(slope))
        consts.append(float(const))
        ms.append(float(upper[0]))
        sats.append(ok)
    return ConditionAReport(tuple(out_k), tuple(slopes), tuple(consts), tuple(ms),
                            tuple(sats), all(sats), float(min(consts)),
                            slope_tolerance)


def log_moment_holds(levy: LevyMeasureSpec) -> bool:
    """Whether int_{|z|>1} log(1 + |z|) nu(dz) is finite."""
    if isinstance(levy, (Zero, Truncated)):
        return True
    if isinstance(levy, CoordinateStable):
        return all(0.0 < t < 1.0 for t in levy.theta)
    if isinstance(levy, Spherical):
        return 0.0 < levy.theta < 1.0
    if isinstance(levy, TemperedCoordinate):
        return all(0.0 < t < 1.0 for t in levy.theta)
    if isinstance(levy, CompoundPoisson):
        j = levy.jump
        if isinstance(j, (PointMassJump, ExponentialJump)):
            return True
        if j.log_moment_finite is None:
            raise UnknownMomentError(
                "sampled jump law does not declare whether its log-moment is finite")
        return bool(j.log_moment_finite)
    raise UnsupportedVariantError(f"unknown Levy variant {type(levy).__name__}")


# -- config (de)serialisation -------------------------------------------------

def levy_to_dict(levy):
    if isinstance(levy, Zero):
        return {"variant": "zero"}
    if isinstance(levy, CoordinateStable):
        return {"variant": "coordinate_stable", "theta": list(levy.theta),
                "weight": list(levy.weight)}
    if isinstance(levy, Spherical):
        return {"variant": "spherical", "theta": levy.theta,
                "directions": [list(d) for d in levy.directions],
                "masses": list(levy.masses)}
    if isinstance(levy, TemperedCoordinate):
        if levy.label != "exponential":
            raise UnsupportedVariantError(
                "only exponentially tempered measures can be serialised")
        return {"variant": "tempered_coordinate", "theta": list(levy.theta),
                "family": "exponential", "rate": [g.rate for g in levy.g]}
    if isinstance(levy, Truncated):
        return {"variant": "truncated", "radius": levy.radius,
                "inner": levy_to_dict(levy.inner)}
    if isinstance(levy, CompoundPoisson):
        j = levy.jump
        if isinstance(j, PointMassJump):
            jd = {"kind": "point", "vector": list(j.vector)}
        elif isinstance(j, ExponentialJump):
            jd = {"kind": "exponential", "means": list(j.means)}
        else:
            raise UnsupportedVariantError("sampled jump laws cannot be serialised")
        return {"variant": "compound_poisson", "rate": levy.rate, "jump": jd}
    raise UnsupportedVariantError(f"unknown Levy variant {type(levy).__name__}")


def levy_from_dict(d, m):
    try:
        tag = str(d.get("variant", "zero")).lower().replace("-", "_")
        if tag == "zero":
            return Zero()
        if tag == "coordinate_stable":
            return CoordinateStable(_vec(d["theta"], m), _vec(d.get("weight", 1.0), m))
        if tag == "spherical":
            if "atoms" in d and isinstance(d["atoms"], int):
                return Spherical.uniform(d["theta"], m, d["atoms"])
            if "directions" not in d:
                return Spherical.uniform(d["theta"], m, int(d.get("n_atoms", 64)))
            return Spherical(d["theta"], d["directions"], d["masses"])
        if tag == "tempered_coordinate":
            if d.get("family", "exponential") != "exponential":
                raise ValidationError("tempered family must be 'exponential'")
            return TemperedCoordinate.exponential(_vec(d["theta"], m),
                                                  _vec(d["rate"], m))
        if tag == "truncated":
            return Truncated(levy_from_dict(d["inner"], m), d["radius"])
        if tag == "compound_poisson":
            jd = d["jump"]
            kind = jd.get("kind", "point")
            if kind == "point":
                jump = PointMassJump(_vec(jd["vector"], m))
            elif kind == "exponential":
                jump = ExponentialJump(_vec(jd["means"], m))
            else:
                raise ValidationError(f"unknown jump kind {kind!r}")
            return CompoundPoisson(d["rate"], jump)
    except KeyError as exc:
        raise ValidationError(f"levy table is missing key {exc}") from None
    raise ValidationError(f"unknown levy variant {d.get('variant')!r}")


def _vec(v, m):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.size == 1 and m > 1:
        a = np.full(m, a[0])
    if a.size != m:
        raise ValidationError(f"expected {m} entries, got {a.size}")
    return tuple(a.tolist())


def params_from_dict(d) -> ModelParams:
    """Build :class:`ModelParams` from a nested mapping (config-file layout)."""
    try:
        m = int(d["m"])
        beta = np.asarray(d["beta"], dtype=float)
        if beta.size != m * m:
            raise ValidationError(f"beta must have {m * m} entries")
        return ModelParams(m, _vec(d.get("b", 0.0), m), beta.reshape(m, m),
                           _vec(d.get("sigma", 1.0), m), _vec(d["alpha"], m),
                           levy_from_dict(d.get("levy", {"variant": "zero"}), m))
    except KeyError as exc:
        raise ValidationError(f"model table is missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed model table: {exc}") from None
