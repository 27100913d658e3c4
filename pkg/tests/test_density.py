import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from ajcir.density import (Axis, anisotropy, besov_norm, chapman_kolmogorov_defect,
                           function_grid, heat_kernel_1d, heat_kernel_derivative_1d,
                           holder_zygmund_norm, invariant_density_1d, rho_delta,
                           silverman_bandwidth, weighted_kde)
from ajcir.errors import DomainError, GridTooCoarseError
from ajcir.presets import preset
from ajcir.simulator import mean_formula, simulate_ensemble

REF1D = preset("reference1d")
WINDOW = (0.0, 0.02, 2001)


@pytest.fixture(scope="module")
def kernel():
    return heat_kernel_1d(REF1D, 1.0, 1.0, WINDOW)


# -- anisotropy and weight ----------------------------------------------------------

def test_anisotropy_examples():
    an = anisotropy([1.5, 1.5])
    assert an.alpha_bar == pytest.approx(1.5) and an.a == pytest.approx((1.0, 1.0))
    an = anisotropy([1.2, 1.8])
    assert an.alpha_bar == pytest.approx(1.44) and an.a == pytest.approx((1.2, 0.8))
    assert anisotropy([1.7]).a == (1.0,)
    with pytest.raises(DomainError):
        anisotropy([1.0, 1.5])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1.01, 1.99), min_size=1, max_size=5))
def test_anisotropy_weights_sum_to_dimension(alpha):
    assert sum(anisotropy(alpha).a) == pytest.approx(len(alpha), rel=1e-12)


def test_rho_delta_examples():
    assert rho_delta([0.25], 1.0, [1.5]) == pytest.approx(0.25 ** (2 / 3), rel=1e-14)
    assert rho_delta([0.25], 1.0, [1.5]) == pytest.approx(0.39685, abs=1e-5)
    assert rho_delta([1.0, 1.0], 0.3, [1.3, 1.7]) == 0.3
    assert rho_delta([2.0, -1e-9], 1.0, [1.3, 1.7]) == 0.0
    assert rho_delta([0.0, 4.0], 1.0, [1.3, 1.7]) == 0.0


@settings(max_examples=50, deadline=None)
@given(y=st.lists(st.floats(-5, 5), min_size=2, max_size=2), delta=st.floats(0.01, 3))
def test_rho_delta_range(y, delta):
    v = rho_delta(y, delta, [1.3, 1.7])
    assert 0.0 <= v <= delta


# -- heat kernel --------------------------------------------------------------------

def test_heat_kernel_mass_and_sign(kernel):
    # the window [0, 40] misses the power-law tail beyond it (about 1e-3)
    assert 0.998 < kernel.integral() <= 1.0 + 1e-4
    assert kernel.values.min() >= 0.0
    assert not kernel.suspect
    assert kernel.diagnostics["u_max"] > 0


def test_first_order_derivatives(kernel):
    dy = heat_kernel_derivative_1d(REF1D, 1.0, 1.0, WINDOW, n=0, k=1)
    # the density rises steeply at 0, so the difference oracle needs a fine step
    fine = (0.0, 0.0025, 8001)
    p = heat_kernel_1d(REF1D, 1.0, 1.0, fine).values
    d = heat_kernel_derivative_1d(REF1D, 1.0, 1.0, fine, n=0, k=1).values
    fd = np.gradient(p, fine[1])
    assert np.max(np.abs(d[1:-1] - fd[1:-1])) < 1e-3
    # int d/dy p over the line is 0; the window carries p(0) - p(40) with p(0) ~ 0
    assert abs(dy.integral() + kernel.values[-1] - kernel.values[0]) < 1e-4


def test_x_derivative_matches_finite_difference():
    h = 1e-3
    ax = (0.0, 0.02, 1001)
    d = heat_kernel_derivative_1d(REF1D, 1.0, 1.0, ax, n=1, k=0).values
    up = heat_kernel_1d(REF1D, 1.0 + h, 1.0, ax).values
    dn = heat_kernel_1d(REF1D, 1.0 - h, 1.0, ax).values
    assert np.max(np.abs(d - (up - dn) / (2 * h))) < 1e-4


def test_derivative_orders_are_capped():
    with pytest.raises(DomainError):
        heat_kernel_derivative_1d(REF1D, 1.0, 1.0, WINDOW, n=3, k=2)


def test_heat_kernel_matches_simulation(kernel):
    ens = simulate_ensemble(REF1D, [1.0], 1.0, 5e-3, 20000, 11)
    x = ens.terminal[:, 0]
    edges = np.arange(0.0, 10.5, 0.5)
    cdf = integrate.cumulative_trapezoid(kernel.values, dx=WINDOW[1], initial=0.0)
    at = np.interp(edges, kernel.points(), cdf)
    p_bins = np.diff(at)
    emp = np.histogram(x, edges)[0] / x.size
    l1 = np.abs(emp - p_bins).sum() + abs((x >= edges[-1]).mean() - (1 - at[-1]))
    assert l1 < 0.03


def test_chapman_kolmogorov_on_a_coarse_grid():
    assert chapman_kolmogorov_defect(REF1D, 1.0, 0.5, 0.5, (0.0, 0.05, 401)) < 0.02


def test_heat_kernel_rejects_bad_input():
    with pytest.raises(DomainError):
        heat_kernel_1d(REF1D, 1.0, 0.0, WINDOW)
    with pytest.raises(DomainError):
        heat_kernel_1d(preset("reference2d"), 1.0, 1.0, WINDOW)
    with pytest.raises(DomainError):
        Axis.coerce([0.0, 0.1, 0.3])


def test_first_moment_matches_mean_formula():
    # a small stable coefficient keeps the tail inside the window
    p = REF1D.replace(sigma=np.array([0.02]))
    g = heat_kernel_1d(p, 1.0, 1.0, (0.0, 0.01, 20001))
    m1 = np.trapezoid(g.points() * g.values, dx=0.01)
    assert m1 == pytest.approx(mean_formula(p, [1.0], 1.0)[0], rel=1e-3)


def test_invariant_density():
    g = invariant_density_1d(REF1D, (-1.0, 0.02, 1501))
    y = g.points()
    assert g.integral() > 0.995
    assert np.all(g.values[y < 0] < 1e-4 * g.values.max())


# -- norms ----------------------------------------------------------------------

AX = Axis(-8.0, 0.01, 1601)
ONE = anisotropy([1.5])


def test_norms_of_zero_and_constants():
    z = function_grid(np.zeros(AX.count), [AX])
    assert besov_norm(z, 0.5, ONE) == 0.0
    assert holder_zygmund_norm(z, 0.5, ONE) == 0.0
    c = function_grid(np.full(AX.count, 2.5), [AX])
    val, info = holder_zygmund_norm(c, 0.5, ONE, return_terms=True)
    assert val == pytest.approx(2.5) and info["terms"][0]["sup"] == 0.0


def test_besov_of_gaussian_against_quadrature():
    f = stats.norm.pdf(AX.points)
    val, info = besov_norm(function_grid(f, [AX]), 0.5, ONE, return_terms=True)
    assert info["terms"][0]["argmax_h"] in (-1.0, 1.0)
    # ||Delta_1 f||_L1 = 2 (2 Phi(1/2) - 1) for the standard normal
    oracle = 1.0 + 2 * (2 * stats.norm.cdf(0.5) - 1)
    assert val == pytest.approx(oracle, rel=1e-2)


def test_besov_translation_invariance():
    f = stats.norm.pdf(AX.points, loc=0.3)
    g = stats.norm.pdf(AX.points, loc=0.3 + AX.step)
    a = besov_norm(function_grid(f, [AX]), 0.5, ONE)
    b = besov_norm(function_grid(g, [AX]), 0.5, ONE)
    assert a == pytest.approx(b, rel=1e-6)


def test_holder_zygmund_of_sine_per_h():
    ax = Axis(0.0, 0.01, 2001)
    f = np.sin(ax.points)
    h = np.array([0.01, 0.05, 0.2, 0.5, 1.0])
    val, info = holder_zygmund_norm(function_grid(f, [ax]), 0.5, ONE, h_set=h,
                                    return_terms=True)
    for hh, size, weighted in info["terms"][0]["per_h"]:
        assert size == pytest.approx(2 * abs(math.sin(hh / 2)), abs=1e-6)
        assert weighted <= abs(hh) ** 0.5 + 1e-6
    assert val == pytest.approx(1.0 + 2 * math.sin(0.5), abs=1e-6)


def test_grid_too_coarse():
    g = function_grid(np.ones(11), [Axis(0.0, 0.1, 11)])
    with pytest.raises(GridTooCoarseError):
        besov_norm(g, 0.5, ONE, h_set=[0.05, 0.5])
    with pytest.raises(DomainError):
        besov_norm(g, 1.2, ONE)


_vals = st.lists(st.floats(-10, 10), min_size=60, max_size=60)


@settings(max_examples=30, deadline=None)
@given(f=_vals, g=_vals, c=st.floats(-5, 5))
def test_norms_are_homogeneous_and_subadditive(f, g, c):
    an = anisotropy([1.3, 1.7])
    F = np.array(f).reshape(6, 10)
    G = np.array(g).reshape(6, 10)
    axes = [Axis(0.0, 0.2, 6), Axis(0.0, 0.1, 10)]
    for norm, lam in ((besov_norm, 0.1), (holder_zygmund_norm, 0.3)):
        nf = norm(function_grid(F, axes), lam, an)
        ng = norm(function_grid(G, axes), lam, an)
        assert norm(function_grid(c * F, axes), lam, an) == pytest.approx(
            abs(c) * nf, rel=1e-8, abs=1e-12)
        assert norm(function_grid(F + G, axes), lam, an) <= nf + ng + 1e-8 * (nf + ng)


# -- kernel density estimate ------------------------------------------------------------

def test_kde_of_zero_samples_is_zero_at_the_origin():
    with pytest.warns(RuntimeWarning):
        g = weighted_kde(np.zeros((100, 2)), 1.0, [1.3, 1.7])
    assert g.values[0, 0] == 0.0


def test_kde_integral_below_delta():
    rng = np.random.default_rng(1)
    x = rng.gamma(2.0, 1.0, size=(20000, 2))
    for delta in (0.2, 1.0):
        g = weighted_kde(x, delta, [1.3, 1.7])
        assert g.integral() <= delta * (1 + 1e-3)
        assert g.weight["rho_delta"] == delta


def test_silverman_bandwidth_scales_with_axis_weights():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(10000, 2))
    an = anisotropy([1.2, 1.8])
    assert silverman_bandwidth(x, an) == pytest.approx(silverman_bandwidth(x) * an.a)


def test_kde_matches_weighted_heat_kernel(kernel):
    ens = simulate_ensemble(REF1D, [1.0], 1.0, 5e-3, 100000, 6)
    ax = Axis(0.0, 0.02, 1001)
    g = weighted_kde(ens.terminal, 1.0, [1.5], axes=[ax])
    ref = kernel.values[:ax.count] * rho_delta(ax.points[:, None], 1.0, [1.5])
    assert np.trapezoid(np.abs(g.values - ref), dx=ax.step) < 0.03
