import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, linalg

from ajcir.errors import BranchError, DomainError, NotSubcriticalError
from ajcir.model import (CompoundPoisson, CoordinateStable, ExponentialJump, ModelParams,
                         Spherical, TemperedCoordinate, Truncated, Zero, spectral_abscissa)
from ajcir.presets import preset
from ajcir.riccati import (F_func, R_func, char_function, char_values, closed_form_psi_1d,
                           invariant_char, riccati_grid, solve_riccati, split_char)

REF2D = preset("reference2d")


def one_d(levy=Zero(), b=0.0, beta=-1.0, sigma=1.0, alpha=1.5):
    return ModelParams(1, [b], [[beta]], [sigma], [alpha], levy)


# -- F and R ------------------------------------------------------------------------

def test_F_at_zero_and_linear_part():
    assert F_func(REF2D, [0, 0]) == 0
    p = ModelParams(2, [1, 2], -np.eye(2), [1, 1], [1.5, 1.5], Zero())
    assert F_func(p, [-1, -3]) == pytest.approx(-7.0)


def _levy_quad(g, lo, hi, theta):
    """int_lo^hi g(z) z^(-1-theta) dz split at 1."""
    f = lambda z: g(z) * z ** (-1.0 - theta)
    pts = [lo, min(1.0, hi), hi] if lo < 1.0 < hi else [lo, hi]
    return sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=400)[0]
               for a, b in zip(pts[:-1], pts[1:]))


def test_F_coordinate_stable_value():
    p = one_d(CoordinateStable([0.5], [1.0]))
    val = F_func(p, [-4.0])
    assert val.real == pytest.approx(-7.0898, abs=5e-5)
    assert abs(val.imag) < 1e-14
    quad = _levy_quad(lambda z: math.expm1(-4 * z), 0, np.inf, 0.5)
    assert val.real == pytest.approx(quad, rel=1e-9)


@pytest.mark.parametrize("u", [-0.3, -2.0, -0.5 + 3j, 7j])
def test_F_truncated_matches_quadrature(u):
    p = one_d(Truncated(CoordinateStable([0.6], [0.5]), 5.0))
    re = _levy_quad(lambda z: (np.exp(u * z) - 1).real, 0, 5.0, 0.6)
    im = _levy_quad(lambda z: (np.exp(u * z) - 1).imag, 0, 5.0, 0.6)
    assert F_func(p, [u]) == pytest.approx(0.5 * complex(re, im), rel=1e-9, abs=1e-12)


def test_F_tempered_matches_quadrature():
    p = one_d(TemperedCoordinate.exponential([0.5], [2.0]))
    u = -0.5 + 2j
    re = _levy_quad(lambda z: ((np.exp(u * z) - 1) * np.exp(-2 * z)).real, 0, np.inf, 0.5)
    im = _levy_quad(lambda z: ((np.exp(u * z) - 1) * np.exp(-2 * z)).imag, 0, np.inf, 0.5)
    assert F_func(p, [u]) == pytest.approx(complex(re, im), rel=1e-7)


def test_F_compound_poisson_and_spherical():
    p = ModelParams(2, [0, 0], -np.eye(2), [1, 1], [1.5, 1.5],
                    CompoundPoisson(2.0, ExponentialJump([0.5, 2.0])))
    u = np.array([-1.0 + 1j, 0.5j])
    assert F_func(p, u) == pytest.approx(2.0 * (1 / ((1 - 0.5 * u[0]) * (1 - 2 * u[1])) - 1))
    d = (0.6, 0.8)
    p = ModelParams(2, [0, 0], -np.eye(2), [1, 1], [1.5, 1.5], Spherical(0.4, [d], [1.5]))
    s = -(0.6 * 2 + 0.8 * 1)
    expected = -1.5 * math.gamma(0.6) / 0.4 * (-s) ** 0.4
    assert F_func(p, [-2.0, -1.0]) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(u=st.floats(-50.0, 0.0), theta=st.floats(0.05, 0.95), b=st.floats(0, 3))
def test_F_is_real_and_nonpositive_on_the_negative_axis(u, theta, b):
    val = F_func(one_d(CoordinateStable([theta], [1.0]), b=b), [u])
    assert abs(val.imag) <= 1e-12 * max(1.0, abs(val))
    assert val.real <= 1e-14


def test_F_and_R_reject_positive_real_part():
    with pytest.raises(BranchError):
        F_func(REF2D, [1e-6, 0])
    with pytest.raises(BranchError):
        R_func(REF2D, [0, 0.1 + 1j])


def test_R_values():
    assert np.all(R_func(REF2D, [0, 0]) == 0)
    assert R_func(one_d(beta=-2.0), [-1.0])[0] == pytest.approx(2.0 + 1.0)
    for u in (-0.1, -3.0):
        assert R_func(one_d(beta=-1.3, alpha=1.7), [u])[0] == pytest.approx(
            -1.3 * u + (-u) ** 1.7)
    # sigma multiplies the stable power; beta enters transposed
    u = np.array([-0.5 + 1j, -2.0])
    expected = u @ REF2D.beta + REF2D.sigma * (-u) ** REF2D.alpha
    assert np.allclose(R_func(REF2D, u), expected, rtol=1e-14)


# -- closed form -------------------------------------------------------------------

def test_closed_form_initial_value_and_slope():
    assert closed_form_psi_1d(1.5, -1.0, 2.0, 0.0) == pytest.approx(-2.0, rel=1e-15)
    h = 1e-6
    d = (closed_form_psi_1d(1.5, -1.0, 2.0, h) - closed_form_psi_1d(1.5, -1.0, 2.0, -h)) / (2 * h)
    assert d == pytest.approx(-1.0 * -2.0 + 2.0 ** 1.5, abs=1e-6)


@pytest.mark.parametrize("alpha,kappa,rho", [(1.5, -1.0, 1.0), (1.2, -0.5, 3.0),
                                             (1.8, 2.0, 0.25), (1.5, 1.0, 1.0)])
def test_closed_form_matches_direct_integration(alpha, kappa, rho):
    s = np.linspace(0.0, 5.0, 41)
    sol = integrate.solve_ivp(lambda t, f: kappa * f + (-f) ** alpha, (0, 5), [-rho],
                              method="DOP853", t_eval=s, rtol=1e-13, atol=1e-15)
    cf = closed_form_psi_1d(alpha, kappa, rho, s)
    assert np.allclose(cf, sol.y[0], rtol=1e-8, atol=1e-14)


def test_closed_form_domain_guard():
    with pytest.raises(DomainError):
        closed_form_psi_1d(1.5, 0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        closed_form_psi_1d(1.5, -1.0, 0.0, 1.0)
    # bracket 2 exp(s/2) - 1 changes sign at s = -2 log 2
    with pytest.raises(DomainError):
        closed_form_psi_1d(1.5, -1.0, 1.0, -10.0)


# -- solver -------------------------------------------------------------------------

def test_solver_matches_closed_form_to_1e8():
    t = np.linspace(0, 5, 201)
    tr = solve_riccati(preset("pure1d"), [-1.0], 5.0, t_eval=t)
    cf = closed_form_psi_1d(1.5, -1.0, 1.0, t)
    assert np.max(np.abs(tr.psi[:, 0] - cf) / np.abs(cf)) < 1e-8
    assert np.all(tr.phi == 0)


def test_solver_zero_initial_value_is_a_fixed_point():
    tr = solve_riccati(REF2D, [0, 0], 2.0)
    assert np.all(tr.psi == 0) and np.all(tr.phi == 0)
    assert tr.t[0] == 0.0


def test_linear_flow_without_stable_term():
    # without the stable part (tiny sigma) psi solves psi' = beta^T psi
    p = REF2D.replace(sigma=np.array([1e-300, 1e-300]), levy=Zero(), b=np.zeros(2))
    u0 = np.array([-1.0 + 0.5j, -0.3 - 2j])
    t = np.linspace(0, 3, 7)
    tr = solve_riccati(p, u0, 3.0, t_eval=t)
    ref = np.array([linalg.expm(s * p.beta.T) @ u0 for s in t])
    assert np.allclose(tr.psi, ref, rtol=1e-9, atol=1e-12)


def test_initial_state_and_real_part_sign():
    u0 = np.array([-0.2 + 3j, 1.5j])
    tr = solve_riccati(REF2D, u0, 4.0, t_eval=np.linspace(0, 4, 81))
    assert np.allclose(tr.psi[0], u0) and tr.phi[0] == 0
    assert np.all(tr.psi.real <= 1e-10)


@settings(max_examples=8, deadline=None)
@given(t=st.floats(0.05, 1.5), s=st.floats(0.05, 1.5), y0=st.floats(-6, 6),
       y1=st.floats(-6, 6))
def test_flow_property(t, s, y0, y1):
    u = np.array([1j * y0, 1j * y1 - 0.1])
    phi_s, psi_s = riccati_grid(REF2D, u[None], [s])
    phi_ts, psi_ts = riccati_grid(REF2D, u[None], [t + s])
    phi_t2, psi_t2 = riccati_grid(REF2D, psi_s[:, 0], [t])
    assert np.allclose(psi_ts[0, 0], psi_t2[0, 0], rtol=1e-7, atol=1e-9)
    assert phi_ts[0, 0] == pytest.approx(phi_t2[0, 0] + phi_s[0, 0], rel=1e-7, abs=1e-9)


# -- characteristic function -----------------------------------------------------------

def test_char_function_trivial_cases():
    x = np.array([1.0, 2.0])
    assert char_function(REF2D, x, 1.0, [0, 0]).value == 1.0
    u = np.array([-0.5 + 1j, 2j])
    assert char_function(REF2D, x, 0.0, u).value == pytest.approx(np.exp(x @ u))


def test_char_function_bounded_on_imaginary_axis():
    rng = np.random.default_rng(0)
    Y = rng.normal(scale=3.0, size=(50, 2))
    vals = char_values(REF2D, [1.0, 2.0], 1.0, 1j * Y)
    assert np.all(np.abs(vals) <= 1.0 + 1e-12)
    cf = char_function(REF2D, [1.0, 2.0], 1.0, 1j * Y[0], with_trajectory=True)
    assert cf.error_estimate < 1e-6 and cf.trajectory is not None
    assert cf.value == pytest.approx(vals[0], abs=1e-9)


def test_split_char_product_and_small_jumps():
    x = np.array([1.0, 2.0])
    for y in ([1.0, -2.0], [0.5, 0.5], [-3.0, 1.0]):
        u = 1j * np.array(y)
        q0, q1 = split_char(REF2D, x, 1.0, u)
        assert abs(q0 * q1 - char_function(REF2D, x, 1.0, u).value) < 1e-8
    small = REF2D.replace(levy=Truncated(CoordinateStable([0.6, 0.6], [0.5, 0.5]), 0.9))
    assert split_char(small, x, 1.0, 1j * np.array([1.0, 2.0]))[1] == 1.0


def test_split_char_without_small_jumps_or_drift():
    p = ModelParams(2, [0, 0], REF2D.beta, [1, 1], [1.3, 1.7],
                    CompoundPoisson(1.0, ExponentialJump([3.0, 3.0])))
    x = np.array([0.7, 0.2])
    u = 1j * np.array([1.0, -1.0])
    # all jumps of this law have norm > 1 with prob. < 1: restrict to a point mass
    p = p.replace(levy=CompoundPoisson(1.0, ExponentialJump([0.0, 0.0])))
    q0, _ = split_char(p, x, 1.0, u)
    psi = riccati_grid(p, u[None], [1.0])[1][0, 0]
    assert q0 == pytest.approx(np.exp(psi @ x), rel=1e-12)


def test_invariant_char_limits():
    assert invariant_char(REF2D, [0, 0]) == 0
    y = np.array([0.7, -1.2])
    g = np.exp(invariant_char(REF2D, 1j * y))
    assert abs(g) <= 1.0
    t_long = 40.0 / abs(spectral_abscissa(REF2D.beta))
    cf = char_function(REF2D, [1.0, 2.0], t_long, 1j * y).value
    assert abs(g - cf) < 1e-4


def test_invariant_char_needs_subcritical_drift():
    p = one_d(b=1.0, beta=0.0)
    with pytest.raises(NotSubcriticalError):
        invariant_char(p, [1j])
