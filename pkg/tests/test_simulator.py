import math

import numpy as np
import pytest
from scipy import integrate

from ajcir.errors import DomainError, MomentError
from ajcir.levy_rng import RngStream
from ajcir.model import CompoundPoisson, CoordinateStable, ModelParams, PointMassJump, Zero
from ajcir.presets import preset
from ajcir.riccati import char_values
from ajcir.simulator import (boundary_hit_probability, empirical_char, euler_step,
                             kappa_rates, load_terminal, mean_formula,
                             simulate_comparison_diagonal, simulate_ensemble,
                             weak_error_rate_experiment, wilson_interval)

REF2D = preset("reference2d")
TINY = 1e-300   # validated models need sigma > 0; this makes the stable term vanish


def _mean_ode(beta, btil, x, t):
    sol = integrate.solve_ivp(lambda s, y: btil + beta @ y, (0, t), x, method="DOP853",
                              rtol=1e-13, atol=1e-14)
    return sol.y[:, -1]


# -- euler step -----------------------------------------------------------------------

def test_euler_step_without_coefficients_keeps_the_state():
    p = ModelParams(1, [0], [[0]], [0], [1.5], Zero())
    assert euler_step(p, [3.0], 0.1, RngStream(0, 0)) == pytest.approx([3.0], abs=0)


def test_euler_step_from_zero_moves_by_the_drift_only():
    p = ModelParams(1, [1.0], [[0]], [2.0], [1.5], Zero())
    assert euler_step(p, [0.0], 0.1, RngStream(4, 0))[0] == pytest.approx(0.1, rel=1e-15)


def test_euler_step_is_nonnegative_and_deterministic():
    x = np.full((5000, 2), 0.05)
    a = euler_step(REF2D, x, 0.1, RngStream(1, 0))
    b = euler_step(REF2D, x, 0.1, RngStream(1, 0))
    assert np.array_equal(a, b) and a.shape == (5000, 2)
    assert a.min() >= 0.0 and (a == 0.0).any()


def test_euler_step_rejects_bad_input():
    with pytest.raises(DomainError):
        euler_step(REF2D, [1.0, 1.0], 0.0, RngStream(0, 0))
    with pytest.raises(DomainError):
        euler_step(REF2D, [-1.0, 1.0], 0.1, RngStream(0, 0))


def test_euler_step_one_step_mean():
    # the clamp is inactive from x = 5; alpha near 2 keeps the sample-mean SE meaningful
    p = REF2D.replace(alpha=np.array([1.9, 1.9]))
    x = np.array([5.0, 5.0])
    dt = 0.01
    X = euler_step(p, np.tile(x, (10 ** 6, 1)), dt, RngStream(21, 0))
    target = x + (p.b + p.beta @ x) * dt + dt * p.jump_table().first_moment()
    se = X.std(axis=0, ddof=1) / 1e3
    assert np.all(np.abs(X.mean(axis=0) - target) < 4 * se)


# -- ensembles ----------------------------------------------------------------------

def test_single_path_is_reproducible():
    a = simulate_ensemble(REF2D, [1, 2], 0.5, 0.01, 1, master_seed=3, keep="full")
    b = simulate_ensemble(REF2D, [1, 2], 0.5, 0.01, 1, master_seed=3, keep="full")
    assert np.array_equal(a.states, b.states)
    assert a.states.shape == (1, 51, 2)
    assert np.array_equal(a.states[0, 0], [1.0, 2.0])
    assert a.path(0).stream_id == 0


def test_stream_offset_selects_the_same_paths():
    a = simulate_ensemble(REF2D, [1, 2], 0.3, 0.01, 8, master_seed=9)
    b = simulate_ensemble(REF2D, [1, 2], 0.3, 0.01, 3, master_seed=9, stream_offset=5)
    assert np.array_equal(a.terminal[5:], b.terminal)


def test_record_times_and_positivity():
    ens = simulate_ensemble(REF2D, [0.01, 0.01], 1.0, 0.01, 2000, 1,
                            record_times=[0.0, 0.25, 1.0])
    assert np.allclose(ens.times, [0.0, 0.25, 1.0])
    assert ens.states.min() >= 0.0
    assert ens.at(0.25).shape == (2000, 2)
    with pytest.raises(DomainError):
        ens.at(0.5)
    with pytest.raises(DomainError):
        simulate_ensemble(REF2D, [1, 1], 1.0, 0.01, 10, record_times=[0.125])


def test_deterministic_limit_follows_the_ode_flow():
    p = REF2D.replace(sigma=np.array([TINY, TINY]), levy=Zero())
    ens = simulate_ensemble(p, [1, 2], 1.0, 1e-3, 4, 0)
    # Euler on a linear ODE: (I + beta dt)^n x + sum (I + beta dt)^k b dt
    A = np.eye(2) + p.beta * 1e-3
    x = np.array([1.0, 2.0])
    for _ in range(1000):
        x = A @ x + p.b * 1e-3
    assert np.allclose(ens.terminal, x, rtol=1e-12)
    assert np.allclose(x, _mean_ode(p.beta, p.b, [1.0, 2.0], 1.0), rtol=2e-3)


def test_terminal_dump_round_trip(tmp_path):
    ens = simulate_ensemble(REF2D, [1, 2], 0.2, 0.01, 7, 0)
    ens.dump_terminal(tmp_path / "x.bin")
    assert np.array_equal(load_terminal(tmp_path / "x.bin"), ens.terminal)


def test_summary_csv_has_provenance(tmp_path):
    ens = simulate_ensemble(REF2D, [1, 2], 0.2, 0.01, 50, 0)
    ens.write_summary_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("# ") and any(l.startswith("t,mean_0,se_0") for l in lines)


# -- moment formula --------------------------------------------------------------------

def test_mean_formula_trivial_cases():
    p = ModelParams(2, [0, 0], [[-1, 0], [1, -2]], [1, 1], [1.5, 1.5], Zero())
    x = np.array([1.0, 3.0])
    from scipy.linalg import expm
    assert np.allclose(mean_formula(p, x, 0.7), expm(0.7 * p.beta) @ x, rtol=1e-13)
    q = ModelParams(1, [0.5], [[0.0]], [1], [1.5], CompoundPoisson(2.0, PointMassJump([0.25])))
    assert mean_formula(q, [1.0], 2.0) == pytest.approx([1.0 + 2.0 * (0.5 + 0.5)])


def test_mean_formula_matches_rk_oracle():
    p = ModelParams(2, [1, 0], [[-1, 0], [1, -2]], [1, 1], [1.5, 1.5], Zero())
    ref = _mean_ode(p.beta, p.b, [1.0, 1.0], 1.0)
    assert np.allclose(mean_formula(p, [1, 1], 1.0), ref, rtol=1e-10, atol=1e-12)


def test_mean_formula_uses_the_truncated_first_moment():
    # 0.5 * int_0^5 z^(-0.6) dz = 0.5 * 5^0.4 / 0.4
    m1 = 0.5 * 5 ** 0.4 / 0.4
    assert np.allclose(REF2D.jump_table().first_moment(), m1, rtol=1e-10)
    ref = _mean_ode(REF2D.beta, REF2D.b + m1, [1.0, 2.0], 1.0)
    assert np.allclose(mean_formula(REF2D, [1, 2], 1.0), ref, rtol=1e-10)


def test_mean_formula_needs_a_first_moment():
    with pytest.raises(MomentError, match="Truncated"):
        mean_formula(REF2D.replace(levy=CoordinateStable([0.6, 0.6], [0.5, 0.5])), [1, 2], 1)


def test_terminal_mean_close_to_formula():
    ens = simulate_ensemble(REF2D, [1, 2], 1.0, 5e-3, 20000, 12)
    mu, se = ens.mean()
    target = mean_formula(REF2D, [1, 2], 1.0)
    # 4 SE plus the O(dt) Euler bias of the linear drift
    assert np.all(np.abs(mu[-1] - target) < 4 * se[-1] + 5e-3 * np.abs(target))


# -- characteristic function ------------------------------------------------------------

def test_empirical_char_at_zero_is_exact():
    ens = simulate_ensemble(REF2D, [1, 2], 0.2, 0.01, 100, 0)
    vals, se = empirical_char(ens, [[0, 0], [1j, -2j]])
    assert vals[0] == 1.0 and se[0] == 0.0
    assert abs(vals[1]) <= 1.0 + 1e-12 and se[1] > 0


def test_empirical_char_jackknife_equals_plain_se():
    rng = np.random.default_rng(0)
    X = rng.exponential(size=(500, 1))
    vals, se = empirical_char(X, [[0.7j]])
    e = np.exp(0.7j * X[:, 0])
    plain = math.sqrt((np.var(e.real, ddof=1) + np.var(e.imag, ddof=1)) / 500)
    assert se[0] == pytest.approx(plain, rel=1e-10)
    assert vals[0] == pytest.approx(e.mean())


def test_empirical_char_agrees_with_riccati_small_sample():
    ens = simulate_ensemble(REF2D, [1, 2], 1.0, 5e-3, 20000, 8)
    y = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 2.0], [2.0, -2.0]])
    vals, se = empirical_char(ens, 1j * y)
    ref = char_values(REF2D, [1, 2], 1.0, 1j * y)
    assert np.all(np.abs(vals - ref) < 4 * se + 0.01)


# -- comparison process ----------------------------------------------------------------

def test_diagonal_drift_is_identical_when_beta_is_diagonal():
    p = REF2D.replace(beta=np.diag([-1.0, -1.5]))
    a = simulate_ensemble(p, [1, 2], 0.5, 0.01, 50, 4)
    b = simulate_comparison_diagonal(p, [1, 2], 0.5, 0.01, 50, 4)
    assert np.array_equal(a.terminal, b.terminal)


def test_comparison_with_common_noise():
    full, diag = simulate_comparison_diagonal(REF2D, [1, 2], 1.0, 0.01, 2000, 5,
                                              keep="full", paired=True)
    assert np.all(full.states >= diag.states - 1e-12)
    assert np.any(full.states > diag.states)


def test_comparison_from_zero_without_forcing():
    p = ModelParams(2, [0, 0], REF2D.beta, [TINY, TINY], [1.3, 1.7], Zero())
    full, diag = simulate_comparison_diagonal(p, [0, 0], 0.5, 0.01, 5, 0, paired=True)
    assert np.all(full.terminal == 0.0) and np.all(diag.terminal == 0.0)


# -- boundary ----------------------------------------------------------------------

def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and hi == pytest.approx(0.03699, abs=1e-4)
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)


def test_boundary_table_extremes():
    p = preset("boundary2d")
    tab = boundary_hit_probability(p, [1, 2], 0.5, [0.0, 1e6], n_paths=2000, seed=1)
    assert tab.estimate[0] == 0.0 and tab.estimate[1] == 1.0
    assert tab.ci_low[1] <= 1.0 <= tab.ci_high[1]


def test_boundary_warns_without_condition_a():
    p = ModelParams(1, [0], [[-1]], [1], [1.7], CoordinateStable([0.3], [1.0]))
    with pytest.warns(RuntimeWarning, match="condition"):
        boundary_hit_probability(p, [1], 0.1, [0.1], n_paths=100)


# -- rate experiment ----------------------------------------------------------------

def test_kappa_rates():
    assert kappa_rates([1.5, 1.5]) == pytest.approx([10 / 9, 10 / 9])
    k = kappa_rates([1.3, 1.7])
    assert k == pytest.approx([min(1 + 1 / 1.7, 1 / 1.3 + 1 / 1.69),
                               min(1 + 1 / 1.7, 1 / 1.7 + 1 / 2.89)])


def test_rate_experiment_degenerate_data_notice():
    p = ModelParams(1, [0.5], [[0.0]], [TINY], [1.5], Zero())
    with pytest.warns(RuntimeWarning, match="degenerate"):
        res = weak_error_rate_experiment(p, [1.0], 1.0, [0.2, 0.1], n_paths=20)
    assert np.all(res.moment == 0.0) and np.isnan(res.fitted[0])
    assert res.target[0] == pytest.approx(0.5 * kappa_rates([1.5])[0])


def test_rate_experiment_rejects_bad_grids():
    with pytest.raises(DomainError):
        weak_error_rate_experiment(REF2D, [1, 2], 1.0, [0.1, 0.2])
    with pytest.raises(DomainError):
        weak_error_rate_experiment(REF2D, [1, 2], 1.0, [0.2, 0.1], eta=1.0)
