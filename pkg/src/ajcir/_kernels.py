"""Elementwise numeric primitives shared by the numba and numpy backends.

Every function here is written so that the same source runs on scalars
inside compiled kernels and on whole arrays in the numpy fallback, unless
its name ends in ``_vec`` (array-only) or ``_scalar`` (compiled-only).
"""
import math

import numpy as np

from ._backend import jit

# Philox4x64-10 constants (Salmon et al. 2011); match numpy.random.Philox
_PH_M0 = np.uint64(0xD2E7470EE14C6C93)
_PH_M1 = np.uint64(0xCA5A826395121157)
_PH_W0 = np.uint64(0x9E3779B97F4A7C15)
_PH_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_SH11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
_HALF53 = 0.5 * _INV53


@jit
def _mulhilo(a, b):
    a_lo = a & _LO32
    a_hi = a >> _SH32
    b_lo = b & _LO32
    b_hi = b >> _SH32
    ll = a_lo * b_lo
    hl = a_hi * b_lo
    lh = a_lo * b_hi
    hh = a_hi * b_hi
    cross = (ll >> _SH32) + (hl & _LO32) + lh
    hi = hh + (hl >> _SH32) + (cross >> _SH32)
    return hi, a * b


@jit
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x64 bijection of a 256-bit counter under a 128-bit key.

    Arguments are uint64 scalars or equally shaped uint64 arrays.
    """
    for r in range(10):
        hi0, lo0 = _mulhilo(_PH_M0, c0)
        hi1, lo1 = _mulhilo(_PH_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        if r < 9:
            k0 = k0 + _PH_W0
            k1 = k1 + _PH_W1
    return c0, c1, c2, c3


@jit
def to_unit(x):
    """Map a uint64 to the open interval (0, 1) using its top 53 bits."""
    return (x >> _SH11) * _INV53 + _HALF53


@jit
def cms_standard(u1, u2, alpha, skew_shift, skew_scale):
    """Chambers-Mallows-Stuck draw of S_alpha(1, beta, 0), alpha != 1.

    ``skew_shift`` and ``skew_scale`` are the beta-dependent constants from
    :func:`cms_constants`.
    """
    v = math.pi * (u1 - 0.5)
    w = -np.log(u2)
    av = alpha * (v + skew_shift)
    return (skew_scale * np.sin(av) / np.cos(v) ** (1.0 / alpha)
            * (np.cos(v - av) / w) ** ((1.0 - alpha) / alpha))


def cms_constants(alpha, beta=1.0):
    t = beta * math.tan(0.5 * math.pi * alpha)
    return math.atan(t) / alpha, (1.0 + t * t) ** (0.5 / alpha)


def stable_scale(alpha, t):
    """Scale mapping S_alpha(1, 1, 0) onto E[exp(-xi Z(t))] = exp(t xi^alpha)."""
    return (t * abs(math.cos(0.5 * math.pi * alpha))) ** (1.0 / alpha)


def one_sided_scale(theta, scale):
    """Scale giving E[exp(-lam S)] = exp(-scale Gamma(1-theta)/theta lam^theta)."""
    c = scale * math.gamma(1.0 - theta) / theta * math.cos(0.5 * math.pi * theta)
    return c ** (1.0 / theta)


# -- Poisson inversion --------------------------------------------------------

POISSON_CHUNK = 500.0


@jit
def poisson_inv_scalar(lam, u):
    if lam <= 0.0:
        return 0
    p = math.exp(-lam)
    cdf = p
    k = 0
    kmax = int(lam + 40.0 * math.sqrt(lam) + 60.0)
    while u > cdf and k < kmax:
        k += 1
        p *= lam / k
        cdf += p
    return k


def poisson_inv_vec(lam, u):
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), np.shape(u))
    k = np.zeros(np.shape(u), dtype=np.int64)
    p = np.exp(-lam)
    cdf = p.copy()
    kmax = (lam + 40.0 * np.sqrt(lam) + 60.0).astype(np.int64)
    active = (u > cdf) & (lam > 0.0)
    while active.any():
        k = np.where(active, k + 1, k)
        p = np.where(active, p * lam / np.maximum(k, 1), p)
        cdf = np.where(active, cdf + p, cdf)
        active &= (u > cdf) & (k < kmax)
    return np.where(lam > 0.0, k, 0)


def poisson_chunks(lam):
    """Number of sub-draws used for a Poisson mean (keeps exp(-lam) > 0)."""
    return max(1, int(math.ceil(lam / POISSON_CHUNK)))


# -- generalised exponential integral and truncated stable functional -------

@jit
def _recip(z):
    zr = z.real
    zi = z.imag
    d = zr * zr + zi * zi
    return complex(zr / d, -zi / d)


@jit
def expint_p_scalar(p, x):
    """E_p(x) = int_1^inf exp(-x t) t^-p dt for complex x, Re x >= 0, p > 1."""
    return _expint_with_gamma(p, x, math.gamma(1.0 - p))


def expint_p_vec(p, x):
    """Vectorised :func:`expint_p_scalar`."""
    x = np.asarray(x, dtype=np.complex128)
    out = np.empty_like(x)
    zero = x == 0
    out[zero] = 1.0 / (p - 1.0)
    small = (np.abs(x) < 3.0) & ~zero
    if np.any(small):
        xs = x[small]
        acc = np.full(xs.shape, 1.0 / (1.0 - p), dtype=np.complex128)
        term = np.ones_like(xs)
        for k in range(1, 80):
            term = term * (-xs) / k
            acc += term / (1.0 - p + k)
        out[small] = math.gamma(1.0 - p) * xs ** (p - 1.0) - acc
    big = ~(small | zero)
    if np.any(big):
        xb = x[big]
        bb = xb + p
        c = np.full(xb.shape, 1e300, dtype=np.complex128)
        d = 1.0 / bb
        h = d.copy()
        live = np.ones(xb.shape, dtype=bool)
        for i in range(1, 600):
            an = -i * (p - 1.0 + i)
            bb = bb + 2.0
            d = np.where(live, 1.0 / (an * d + bb), d)
            c = np.where(live, bb + an / c, c)
            de = np.where(live, c * d, 1.0)
            h = h * de
            live &= np.abs(de - 1.0) > 1e-16
            if not live.any():
                break
        out[big] = h * np.exp(-xb)
    return out


# Packed Levy tables. Each row starts with the output slot ("part", 0 or 1).
# power-law rows: part, w, theta, lo, hi, lo^-theta, hi^-theta,
#                 Gamma(1-theta)/theta, Gamma(-theta), direction[m]
# point rows:     part, rate, vector[m]
# exponential:    part, rate, means[m]
PL_COLS = 9


@jit
def _tail_scalar(theta, radius, rt, gneg, s):
    """int_radius^inf (exp(s z) - 1) z^(-1-theta) dz + Gamma(1-theta)/theta (-s)^theta.

    Helper so that int_0^R = full + rt/theta - rt E_{1+theta}(-sR).
    """
    x = -s * radius
    return rt / theta - rt * _expint_with_gamma(1.0 + theta, x, gneg)


@jit
def _expint_with_gamma(p, x, g1p):
    if x == 0:
        return complex(1.0 / (p - 1.0))
    if x.real * x.real + x.imag * x.imag < 9.0:
        s = complex(1.0 / (1.0 - p))
        term = 1.0 + 0j
        for k in range(1, 200):
            term = term * (-x) * (1.0 / k)
            c = term * (1.0 / (1.0 - p + k))
            s += c
            cm = c.real * c.real + c.imag * c.imag
            sm = s.real * s.real + s.imag * s.imag
            if k > 3 and cm < 1e-34 * sm:
                break
        return g1p * x ** (p - 1.0) - s
    bb = x + p
    c = complex(1e300)
    d = _recip(bb)
    h = d
    for i in range(1, 600):
        an = -i * (p - 1.0 + i)
        bb = bb + 2.0
        d = _recip(an * d + bb)
        c = bb + an * _recip(c)
        de = c * d
        h *= de
        dr = de.real - 1.0
        if dr * dr + de.imag * de.imag < 1e-32:
            break
    return h * np.exp(-x)


@jit
def annulus_packed_scalar(row, s):
    """int_lo^hi (exp(s z) - 1) z^(-1-theta) dz from a packed power-law row."""
    if s == 0:
        return 0j
    theta = row[2]
    lo = row[3]
    hi = row[4]
    if lo == 0.0:
        acc = -row[7] * (-s) ** theta
    else:
        acc = -_tail_scalar(theta, lo, row[5], row[8], s)
    if hi < np.inf:
        acc += _tail_scalar(theta, hi, row[6], row[8], s)
    return acc


def trunc_stable_vec(theta, radius, s):
    """int_0^radius (exp(s z) - 1) z^(-1-theta) dz for Re s <= 0 (arrays)."""
    s = np.asarray(s, dtype=np.complex128)
    if radius <= 0.0:
        return np.zeros_like(s)
    w = -s
    full = -math.gamma(1.0 - theta) / theta * w ** theta
    if radius == np.inf:
        return full
    rt = radius ** (-theta)
    return full + rt / theta - rt * expint_p_vec(1.0 + theta, w * radius)


def annulus_stable_vec(theta, lo, hi, s):
    out = trunc_stable_vec(theta, hi, s) - trunc_stable_vec(theta, lo, s)
    return np.where(s == 0, 0j, out)


def trunc_stable_scalar(theta, radius, s):
    return complex(trunc_stable_vec(theta, radius, np.array([s]))[0])


# -- Levy exponent on a packed measure table ------------------------------------

@jit
def levy_exponent_packed(u, drift, pl, pm, ex):
    """Two-part <drift,u> + int (exp(<u,z>) - 1) nu(dz) for one complex u.

    The drift goes to part 0; table rows go to the part named in column 0.
    """
    m = u.shape[0]
    a = 0j
    b = 0j
    for k in range(m):
        a += drift[k] * u[k]
    for c in range(pl.shape[0]):
        if pl[c, 1] == 0.0:
            continue
        s = 0j
        for k in range(m):
            s += pl[c, PL_COLS + k] * u[k]
        v = pl[c, 1] * annulus_packed_scalar(pl[c], s)
        if pl[c, 0] == 0.0:
            a += v
        else:
            b += v
    for c in range(pm.shape[0]):
        s = 0j
        for k in range(m):
            s += pm[c, 2 + k] * u[k]
        v = pm[c, 1] * (np.exp(s) - 1.0)
        if pm[c, 0] == 0.0:
            a += v
        else:
            b += v
    for c in range(ex.shape[0]):
        mgf = 1.0 + 0j
        for k in range(m):
            mgf *= _recip(1.0 - ex[c, 2 + k] * u[k])
        v = ex[c, 1] * (mgf - 1.0)
        if ex[c, 0] == 0.0:
            a += v
        else:
            b += v
    return a, b


def levy_exponent_vec(u, drift, pl, pm, ex):
    """Vectorised :func:`levy_exponent_packed` over rows of ``u`` (n, m)."""
    u = np.asarray(u, dtype=np.complex128)
    parts = [u @ np.asarray(drift, dtype=np.complex128),
             np.zeros(u.shape[0], dtype=np.complex128)]
    for row in pl:
        if row[1] == 0.0:
            continue
        s = u @ row[PL_COLS:]
        parts[int(row[0])] = parts[int(row[0])] + row[1] * annulus_stable_vec(
            row[2], row[3], row[4], s)
    for row in pm:
        parts[int(row[0])] = parts[int(row[0])] + row[1] * (np.exp(u @ row[2:]) - 1.0)
    for row in ex:
        mgf = np.prod(1.0 / (1.0 - row[2:] * u), axis=-1)
        parts[int(row[0])] = parts[int(row[0])] + row[1] * (mgf - 1.0)
    return parts[0], parts[1]
