"""Reproducible random variates for the driving noises.

All randomness comes from counter-based Philox4x64-10 streams keyed by
``(master_seed, stream_id)``. A path ensemble uses ``stream_id = path
index`` and addresses its draws by (step, purpose) counters, so results do
not depend on how paths are split across threads.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._fourier import fft_plan, invert_on_grid
from .errors import DomainError, TruncationError
from .model import (ExponentialJump, JumpTable, PointMassJump, SampledJump,
                    jump_table)

log = logging.getLogger(__name__)

GENERATOR = "philox4x64-10"
STREAM_RULE = "key=(master_seed, stream_id=path index); counter=(block, step, purpose, 0)"

# purpose tags in the third counter word; 0 is reserved for RngStream
TAG_FIXED = 1      # stable noise and exact subordinator draws
TAG_POISSON = 2    # Poisson counts
TAG_JUMP = 3       # jump sizes

_MASK64 = (1 << 64) - 1


def rng_provenance(master_seed):
    return {"master_seed": int(master_seed) & _MASK64, "generator": GENERATOR,
            "numpy_version": np.__version__, "stream_rule": STREAM_RULE}


class RngStream:
    """Sequential view of one Philox stream.

    Block ``n`` (n = 1, 2, ...) is the Philox image of counter ``(n, 0, 0,
    0)`` under key ``(master_seed, stream_id)``; this reproduces
    ``numpy.random.Philox(key=(master_seed, stream_id)).random_raw()``.
    """

    def __init__(self, master_seed, stream_id=0, counter=0):
        self.master_seed = int(master_seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self.counter = int(counter)

    def __repr__(self):
        return (f"RngStream(master_seed={self.master_seed}, "
                f"stream_id={self.stream_id}, counter={self.counter})")

    def copy(self):
        return RngStream(self.master_seed, self.stream_id, self.counter)

    def raw_blocks(self, n_blocks):
        """Next ``n_blocks`` Philox outputs as a ``(n_blocks, 4)`` uint64 array."""
        c0 = np.arange(self.counter + 1, self.counter + 1 + n_blocks,
                       dtype=np.uint64)
        z = np.zeros_like(c0)
        k0 = np.full_like(c0, self.master_seed)
        k1 = np.full_like(c0, self.stream_id)
        out = K.philox4x64(c0, z, z, z, k0, k1)
        self.counter += n_blocks
        return np.stack(out, axis=-1)

    def random_raw(self, n):
        blocks = self.raw_blocks((n + 3) // 4)
        return blocks.reshape(-1)[:n]

    def uniforms(self, n):
        """``n`` doubles in (0, 1); a partially used block is discarded."""
        if n <= 0:
            return np.zeros(0)
        return K.to_unit(self.random_raw(n))


def counter_uniforms(seed, stream_ids, c0, c1, tag):
    """Uniforms of the 4 lanes of block (c0, c1, tag) for each stream id.

    ``stream_ids`` and ``c0`` broadcast together; returns shape ``(..., 4)``.
    """
    sid, c0 = (np.ascontiguousarray(a) for a in np.broadcast_arrays(
        np.asarray(stream_ids, dtype=np.uint64), np.asarray(c0, dtype=np.uint64)))
    k0 = np.full(sid.shape, int(seed) & _MASK64, dtype=np.uint64)
    c1 = np.full(sid.shape, c1, dtype=np.uint64)
    c2 = np.full(sid.shape, tag, dtype=np.uint64)
    z = np.zeros(sid.shape, dtype=np.uint64)
    out = K.philox4x64(c0, c1, c2, z, k0, sid)
    return K.to_unit(np.stack(out, axis=-1))


# -- stable laws ---------------------------------------------------------------

def c_alpha(alpha):
    """int_0^inf (exp(-z) - 1 + z) z^(-1-alpha) dz = Gamma(2-alpha)/(alpha(alpha-1))."""
    alpha = float(alpha)
    if not 1.0 < alpha < 2.0:
        raise DomainError("alpha must lie in (1, 2)")
    return math.gamma(2.0 - alpha) / (alpha * (alpha - 1.0))


@dataclass(frozen=True)
class StableParams:
    """Spectrally positive stable law with E[exp(-xi Z(t))] = exp(t xi^alpha)."""
    alpha: float
    normalization: str = "laplace-xi^alpha"

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise DomainError("alpha must lie in (1, 2)")


def _pairs(rng, n):
    u = rng.uniforms(2 * n)
    return u[0::2], u[1::2]


def sample_stable_spec_positive(sp, t, rng, size=None):
    """Increment Z(t) of the mean-zero spectrally positive alpha-stable process."""
    alpha = sp.alpha if isinstance(sp, StableParams) else float(sp)
    if not t > 0.0:
        raise DomainError("t must be positive")
    n = 1 if size is None else int(np.prod(size))
    u1, u2 = _pairs(rng, n)
    shift, scale = K.cms_constants(alpha)
    z = K.stable_scale(alpha, t) * K.cms_standard(u1, u2, alpha, shift, scale)
    return float(z[0]) if size is None else z.reshape(size)


def sample_one_sided_stable(theta, scale, rng, size=None):
    """theta-stable subordinator value with Laplace exponent scale Gamma(1-theta)/theta lam^theta."""
    if not 0.0 < theta < 1.0:
        raise DomainError("theta must lie in (0, 1)")
    n = 1 if size is None else int(np.prod(size))
    u1, u2 = _pairs(rng, n)
    shift, sk = K.cms_constants(theta)
    s = K.one_sided_scale(theta, scale) * K.cms_standard(u1, u2, theta, shift, sk)
    s = np.maximum(s, 0.0)
    return float(s[0]) if size is None else s.reshape(size)


# -- subordinator plans --------------------------------------------------------

KIND_POWERLAW, KIND_POINT, KIND_EXPONENTIAL, KIND_SAMPLED = 0, 1, 2, 3


def default_small_jump_cutoff(dt):
    return min(math.sqrt(dt), 1e-3)


@dataclass(frozen=True)
class SubordinatorPlan:
    """Per-step sampling recipe for the subordinator increment over ``dt``.

    Exact one-sided stable draws for untruncated coordinate-stable parts,
    compound Poisson for the remaining jumps above ``eps`` and a
    deterministic drift equal to the mean of the neglected small jumps.
    """
    m: int
    dt: float
    eps: float
    drift: np.ndarray            # (m,) per step
    ex_dir: np.ndarray           # (E, m)
    ex_theta: np.ndarray
    ex_gamma: np.ndarray         # CMS scale for this dt
    ex_shift: np.ndarray
    ex_skew: np.ndarray
    cp_lam: np.ndarray           # (C,) Poisson mean per step
    cp_cum: np.ndarray           # (C,) cumulative component probabilities
    cp_kind: np.ndarray
    cp_theta: np.ndarray
    cp_a: np.ndarray             # lo^-theta for power laws
    cp_b: np.ndarray             # hi^-theta (0 when unbounded)
    cp_vec: np.ndarray           # (C, m) direction / point / means
    cp_gbound: np.ndarray
    cp_rlo: np.ndarray
    cp_rhi: np.ndarray
    cp_g: tuple                  # callables or None
    cp_sampler: tuple            # SampledJump or None
    n_mag: int                   # magnitude uniforms per jump
    neglected_l1: float          # int_{|z|<=eps} |z| nu(dz) dt

    @property
    def lam(self):
        return float(self.cp_lam.sum())

    @property
    def n_chunks(self):
        return K.poisson_chunks(self.lam)

    @property
    def uniforms_per_jump(self):
        return 2 + self.n_mag

    @property
    def blocks_per_jump(self):
        return (self.uniforms_per_jump + 3) // 4

    @property
    def compiled_ok(self):
        """True when no Python callables are needed per jump."""
        return (all(g is None for g in self.cp_g)
                and all(s is None for s in self.cp_sampler))


def subordinator_plan(table: JumpTable, dt, eps=None) -> SubordinatorPlan:
    m = table.m
    eps = default_small_jump_cutoff(dt) if eps is None else float(eps)
    drift = table.small_jump_mean(eps) * dt
    ex_dir, ex_theta, ex_gamma, ex_shift, ex_skew = [], [], [], [], []
    rows = []
    for c in range(table.n_powerlaw):
        w, th = table.pl_w[c], table.pl_theta[c]
        if w == 0.0:
            continue
        if table.pl_exact[c]:
            sh, sk = K.cms_constants(th)
            ex_dir.append(table.pl_dir[c])
            ex_theta.append(th)
            ex_gamma.append(K.one_sided_scale(th, w * dt))
            ex_shift.append(sh)
            ex_skew.append(sk)
            continue
        lo = max(table.pl_lo[c], eps)
        hi = table.pl_hi[c]
        if lo >= hi:
            continue
        a, bb = lo ** (-th), (0.0 if hi == np.inf else hi ** (-th))
        gb = table.pl_gbound[c] if table.pl_g[c] is not None else 1.0
        lam = w * gb * (a - bb) / th * dt
        if lam > 0.0:
            rows.append((lam, KIND_POWERLAW, th, a, bb, table.pl_dir[c], gb, 0.0,
                         np.inf, table.pl_g[c], None))
    for i, j in enumerate(table.cp_jump):
        lam = table.cp_rate[i] * dt
        rlo, rhi = table.cp_rlo[i], table.cp_rhi[i]
        if isinstance(j, PointMassJump):
            rows.append((lam, KIND_POINT, 0.0, 0.0, 0.0, np.array(j.vector), 1.0,
                         rlo, rhi, None, None))
        elif isinstance(j, ExponentialJump):
            rows.append((lam, KIND_EXPONENTIAL, 0.0, 0.0, 0.0, np.array(j.means),
                         1.0, rlo, rhi, None, None))
        else:
            rows.append((lam, KIND_SAMPLED, 0.0, 0.0, 0.0, np.zeros(m), 1.0, rlo,
                         rhi, None, j))
    n_mag = 1
    for r in rows:
        if r[1] == KIND_EXPONENTIAL:
            n_mag = max(n_mag, m)
        elif r[1] == KIND_SAMPLED:
            n_mag = max(n_mag, r[10].n_uniforms)
    lam = np.array([r[0] for r in rows], dtype=float)
    cum = np.cumsum(lam) / lam.sum() if lam.size else lam
    if cum.size:
        cum[-1] = 1.0
    neglected = float(np.abs(drift).sum())
    if neglected > 0.0:
        log.info("small-jump cutoff eps=%.3g: neglected-jump mean %.3g per step "
                 "replaced by drift (pathwise error bound)", eps, neglected)

    def arr(i, dtype=float):
        return np.array([r[i] for r in rows], dtype=dtype)

    return SubordinatorPlan(
        m=m, dt=float(dt), eps=eps, drift=drift,
        ex_dir=np.array(ex_dir, dtype=float).reshape(-1, m),
        ex_theta=np.array(ex_theta, dtype=float),
        ex_gamma=np.array(ex_gamma, dtype=float),
        ex_shift=np.array(ex_shift, dtype=float),
        ex_skew=np.array(ex_skew, dtype=float),
        cp_lam=lam, cp_cum=cum, cp_kind=arr(1, np.int64), cp_theta=arr(2),
        cp_a=arr(3), cp_b=arr(4),
        cp_vec=np.array([r[5] for r in rows], dtype=float).reshape(-1, m),
        cp_gbound=arr(6), cp_rlo=arr(7), cp_rhi=arr(8),
        cp_g=tuple(r[9] for r in rows), cp_sampler=tuple(r[10] for r in rows),
        n_mag=n_mag, neglected_l1=neglected)


def exact_part_vec(plan, u):
    """Sum of exact stable draws; ``u`` has shape (n, 2E)."""
    out = np.zeros((u.shape[0], plan.m))
    for e in range(plan.ex_theta.shape[0]):
        s = plan.ex_gamma[e] * K.cms_standard(u[:, 2 * e], u[:, 2 * e + 1],
                                              plan.ex_theta[e], plan.ex_shift[e],
                                              plan.ex_skew[e])
        out += np.maximum(s, 0.0)[:, None] * plan.ex_dir[e]
    return out


def poisson_counts_vec(plan, u):
    """Poisson counts from ``u`` of shape (n, n_chunks)."""
    if plan.lam == 0.0:
        return np.zeros(u.shape[0], dtype=np.int64)
    per = plan.lam / plan.n_chunks
    return K.poisson_inv_vec(per, u).sum(axis=1)


def jumps_vec(plan, u):
    """Jump vectors from ``u`` of shape (n_jumps, 2 + n_mag); rejected ones are 0."""
    n = u.shape[0]
    out = np.zeros((n, plan.m))
    if n == 0:
        return out
    comp = np.minimum(np.searchsorted(plan.cp_cum, u[:, 0], side="right"),
                      plan.cp_cum.shape[0] - 1)
    for c in np.unique(comp):
        sel = np.nonzero(comp == c)[0]
        kind = plan.cp_kind[c]
        if kind == KIND_POWERLAW:
            th = plan.cp_theta[c]
            a, bb = plan.cp_a[c], plan.cp_b[c]
            r = (a - u[sel, 2] * (a - bb)) ** (-1.0 / th)
            z = r[:, None] * plan.cp_vec[c]
            g = plan.cp_g[c]
            keep = np.ones(sel.size, dtype=bool)
            if g is not None:
                keep = u[sel, 1] * plan.cp_gbound[c] <= np.asarray(g(r), dtype=float)
        else:
            if kind == KIND_POINT:
                z = np.broadcast_to(plan.cp_vec[c], (sel.size, plan.m)).copy()
            elif kind == KIND_EXPONENTIAL:
                z = -np.log(u[sel, 2:2 + plan.m]) * plan.cp_vec[c]
            else:
                sj = plan.cp_sampler[c]
                z = np.asarray(sj.sampler(u[sel, 2:2 + sj.n_uniforms]),
                               dtype=float).reshape(sel.size, plan.m)
            nz = np.sqrt((z * z).sum(axis=1))
            keep = (nz > plan.cp_rlo[c]) & (nz <= plan.cp_rhi[c])
        out[sel] = z * keep[:, None]
    return out


def sample_subordinator_increment(levy, dt, rng, m=None, size=None, eps=None):
    """Increment J(dt) for any Levy-measure spec; shape (m,) or (size, m)."""
    if not dt > 0.0:
        raise DomainError("dt must be positive")
    table = levy if isinstance(levy, JumpTable) else jump_table(levy, _infer_dim(levy, m))
    plan = subordinator_plan(table, dt, eps)
    n = 1 if size is None else int(size)
    out = np.broadcast_to(plan.drift, (n, plan.m)).copy()
    n_ex = plan.ex_theta.shape[0]
    if n_ex:
        out += exact_part_vec(plan, rng.uniforms(2 * n_ex * n).reshape(n, 2 * n_ex))
    if plan.lam > 0.0:
        counts = poisson_counts_vec(plan, rng.uniforms(n * plan.n_chunks)
                                    .reshape(n, plan.n_chunks))
        total = int(counts.sum())
        if total:
            owner = np.repeat(np.arange(n), counts)
            u = rng.uniforms(total * plan.uniforms_per_jump).reshape(
                total, plan.uniforms_per_jump)
            jv = jumps_vec(plan, u)
            for i in range(plan.m):
                out[:, i] += np.bincount(owner, weights=jv[:, i], minlength=n)
    return out[0] if size is None else out


def _infer_dim(levy, m):
    if m is not None:
        return int(m)
    from .model import CompoundPoisson, CoordinateStable, Spherical, \
        TemperedCoordinate, Truncated
    if isinstance(levy, (CoordinateStable, TemperedCoordinate)):
        return len(levy.theta)
    if isinstance(levy, Spherical):
        return len(levy.directions[0])
    if isinstance(levy, Truncated):
        return _infer_dim(levy.inner, None)
    if isinstance(levy, CompoundPoisson):
        return levy.jump.dim
    raise DomainError("cannot infer the dimension of this Levy measure; pass m")


# -- density-derivative diagnostic ----------------------------------------------

@dataclass(frozen=True)
class DerivativeL1Row:
    t: float
    l1_derivative: float
    t_power: float           # t^(-1/alpha)
    ratio: float
    mass: float
    min_density: float


def stable_density_derivative_l1_check(alpha, t_list, dz=0.004, z_min=-15.0,
                                       z_max=12000.0, trunc_tol=1e-14):
    """L1 norm of d/dz of the density of Z(t), by Fourier inversion on a fixed grid.

    Returns one row per t with the ratio to t^(-1/alpha); self-similarity
    makes the ratio constant up to discretisation error.
    """
    if not 1.0 < alpha < 2.0:
        raise DomainError("alpha must lie in (1, 2)")
    n_z = int(round((z_max - z_min) / dz)) + 1
    rows = []
    for t in t_list:
        # |E exp(i xi Z(t))| = exp(t cos(pi alpha/2) xi^alpha)
        decay = -t * math.cos(0.5 * math.pi * alpha)
        xi_max = (-math.log(trunc_tol) / decay) ** (1.0 / alpha)
        if not math.isfinite(xi_max) or xi_max > 1e7:
            raise TruncationError("characteristic function does not decay below "
                                  f"{trunc_tol} within the cap")
        _, du = fft_plan(dz, math.pi / (1.1 * max(abs(z_min), abs(z_max))), n_z)
        xi = np.arange(int(math.ceil(xi_max / du)) + 1) * du
        chi = np.exp(t * (-1j * xi) ** alpha)
        f = invert_on_grid(chi, du, z_min, dz, n_z)
        df = np.gradient(f, dz)
        l1 = float(np.trapezoid(np.abs(df), dx=dz))
        tp = t ** (-1.0 / alpha)
        rows.append(DerivativeL1Row(float(t), l1, tp, l1 / tp,
                                    float(np.trapezoid(f, dx=dz)), float(f.min())))
    return rows
