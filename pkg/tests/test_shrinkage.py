"""Path exactness (KKT certificates), selection, and restricted refits."""

import itertools

import numpy as np
import numpy.testing as npt
import pytest

from dlsa.exceptions import ZeroCoefficientPinned
from dlsa.families import ModelFamily, ParamVector
from dlsa.fitting import fit_local
from dlsa.shrinkage import LassoPath, dbic, lasso_path, refit_on_support
from dlsa.simulate import ScenarioSpec, generate
from dlsa.combine import combine_wlse

from conftest import make_fit


def kkt_violation(fit, path, i):
    """Largest violation of the stationarity certificate at knot ``i``."""
    lam = path.knots[i]
    grad2 = 2.0 * fit.precision @ (path.theta_at_knot(i)
                                   - fit.theta_tilde.as_array())
    worst = 0.0
    active = set(path.active_sets[i])
    for j in path.penalized:
        bound = lam * path.weights[j]
        if j in active:
            worst = max(worst, abs(abs(grad2[j]) - bound))
        else:
            worst = max(worst, max(0.0, abs(grad2[j]) - bound))
    return worst


def brute_force_selection(fit, frozen_cutpoints=None):
    """Exhaustive criterion minimization over every support with exact refits."""
    p = fit.theta_tilde.n_coef
    theta = fit.theta_tilde.as_array()
    n = fit.total_n
    best, best_support = np.inf, None
    for size in range(p + 1):
        for support in itertools.combinations(range(p), size):
            if support:
                cand = refit_on_support(fit, support).as_array()
            else:
                cand = np.zeros(theta.size)
                if theta.size > p:
                    # profile the unconstrained tail block at zero coefficients
                    tail = slice(p, theta.size)
                    om = fit.precision
                    cand[tail] = np.linalg.solve(
                        om[tail, tail], (om @ theta)[tail])
            delta = cand - theta
            value = delta @ fit.precision @ delta + np.log(n) * size / n
            if value < best - 1e-15:
                best, best_support = value, support
    return best_support, best


def test_path_endpoints(rng):
    fit = make_fit(rng, np.array([2.0, -1.0, 0.4, 0.05]))
    path = lasso_path(fit)
    assert path.knots[-1] == 0.0
    npt.assert_allclose(path.coefficients_at_knots[-1],
                        fit.theta_tilde.coefficients, atol=1e-9)
    assert np.all(path.coefficients_at_knots[0] == 0.0)
    assert np.all(np.diff(path.knots) < 0)
    npt.assert_array_equal(path.df_at_knots,
                           [len(a) for a in path.active_sets])


def test_soft_threshold_closed_form_on_identity_metric():
    fit = make_fit(np.random.default_rng(0), np.array([3.0, 1.0, 0.1]),
                   precision=np.eye(3), n_total=10000)
    path = lasso_path(fit)
    npt.assert_allclose(path.knots, [18.0, 2.0, 0.02, 0.0], rtol=1e-12)
    for lam in list(path.knots) + [11.0, 1.3, 0.01, 0.003]:
        got = path.coefficients_at(lam)
        theta = fit.theta_tilde.coefficients
        expected = np.sign(theta) * np.maximum(
            np.abs(theta) - lam / (2.0 * np.abs(theta)), 0.0)
        npt.assert_allclose(got, expected, atol=1e-9)


def test_kkt_certificates_on_random_problems(rng):
    for _ in range(10):
        theta = np.concatenate([rng.normal(0, 1, 4), rng.normal(0, 0.02, 4)])
        fit = make_fit(rng, theta)
        path = lasso_path(fit)
        for i in range(path.n_knots):
            assert kkt_violation(fit, path, i) < 1e-7


def test_interpolated_path_satisfies_kkt(rng):
    theta = np.array([1.5, -0.8, 0.3, 0.03, -0.01])
    fit = make_fit(rng, theta)
    path = lasso_path(fit)
    for i in range(path.n_knots - 1):
        lam = 0.5 * (path.knots[i] + path.knots[i + 1])
        coef = path.theta_at(lam)
        grad2 = 2.0 * fit.precision @ (coef - fit.theta_tilde.as_array())
        for j in path.penalized:
            bound = lam * path.weights[j]
            if coef[j] != 0.0:
                assert abs(abs(grad2[j]) - bound) < 1e-6
            else:
                assert abs(grad2[j]) < bound + 1e-6


def test_scaling_precision_scales_knots_not_active_sets(rng):
    theta = np.array([1.2, -0.5, 0.2, 0.04])
    precision = make_fit(rng, theta).precision
    fit1 = make_fit(rng, theta, precision=precision)
    fit4 = make_fit(rng, theta, precision=4.0 * precision)
    path1, path4 = lasso_path(fit1), lasso_path(fit4)
    assert path1.active_sets == path4.active_sets
    npt.assert_allclose(path4.knots, 4.0 * path1.knots, rtol=1e-12)


def test_dbic_on_single_knot_path():
    fit = make_fit(np.random.default_rng(3), np.array([1.0, 2.0, 3.0]),
                   precision=np.eye(3), n_total=5000)
    path = LassoPath(
        knots=np.array([0.0]),
        coefficients_at_knots=fit.theta_tilde.coefficients[None, :],
        active_sets=((0, 1, 2),),
        df_at_knots=np.array([3]),
        weights=1.0 / np.abs(fit.theta_tilde.coefficients),
        penalized=(0, 1, 2),
    )
    result = dbic(path, fit)
    npt.assert_allclose(result.dbic_min, np.log(5000) * 3 / 5000, rtol=1e-12)
    assert result.support == (0, 1, 2)


def test_dbic_identity_fixture_agrees_with_brute_force():
    # at N = 10000 the metric puts the standard error at 0.01, so even the
    # 0.1 coefficient is a strong signal and every coefficient is kept;
    # shrinking the third one to 0.02 puts it below the selection threshold
    fit_keep = make_fit(np.random.default_rng(0), np.array([3.0, 1.0, 0.1]),
                        precision=np.eye(3), n_total=10000)
    sel_keep = dbic(lasso_path(fit_keep), fit_keep)
    assert brute_force_selection(fit_keep)[0] == (0, 1, 2)
    assert sel_keep.support == (0, 1, 2)

    fit_drop = make_fit(np.random.default_rng(0), np.array([3.0, 1.0, 0.02]),
                        precision=np.eye(3), n_total=10000)
    sel_drop = dbic(lasso_path(fit_drop), fit_drop)
    assert brute_force_selection(fit_drop)[0] == (0, 1)
    assert sel_drop.support == (0, 1)
    npt.assert_allclose(sel_drop.theta_selected, [3.0, 1.0, 0.0], atol=1e-12)


def test_dbic_matches_brute_force_on_random_problems(rng):
    agree = 0
    for _ in range(20):
        signal = np.sign(rng.normal(0, 1, 3)) * (0.5 + np.abs(rng.normal(0, 1, 3)))
        noise = rng.normal(0, 0.005, 5)
        theta = np.concatenate([signal, noise])
        fit = make_fit(rng, theta, n_total=10000)
        sel = dbic(lasso_path(fit), fit)
        expected, _ = brute_force_selection(fit)
        agree += sel.support == expected
    assert agree == 20


def test_refit_full_support_returns_estimate_exactly(rng):
    fit = make_fit(rng, np.array([1.0, -2.0, 0.5]))
    refit = refit_on_support(fit, (0, 1, 2))
    npt.assert_array_equal(refit.as_array(), fit.theta_tilde.as_array())


def test_refit_diagonal_metric_zeroes_complement(rng):
    fit = make_fit(rng, np.array([1.0, -2.0, 0.5, 3.0]),
                   precision=np.diag([1.0, 2.0, 3.0, 4.0]))
    refit = refit_on_support(fit, (1, 3))
    npt.assert_allclose(refit.coefficients, [0.0, -2.0, 0.0, 3.0], atol=1e-12)


def test_refit_matches_equality_constrained_solve(rng):
    fit = make_fit(rng, rng.normal(0, 1, 6))
    support = (0, 2)
    refit = refit_on_support(fit, support).as_array()
    # oracle: full KKT system for min (x-t)'O(x-t) s.t. x_j = 0 off support
    omega = fit.precision
    theta = fit.theta_tilde.as_array()
    fixed = [j for j in range(6) if j not in support]
    kkt = np.zeros((6 + len(fixed), 6 + len(fixed)))
    kkt[:6, :6] = 2.0 * omega
    for r, j in enumerate(fixed):
        kkt[6 + r, j] = 1.0
        kkt[j, 6 + r] = 1.0
    rhs = np.concatenate([2.0 * omega @ theta, np.zeros(len(fixed))])
    oracle = np.linalg.solve(kkt, rhs)[:6]
    npt.assert_allclose(refit, oracle, atol=1e-10)


def test_selected_estimate_is_restricted_refit_on_true_support():
    spec = ScenarioSpec(example="linear", setting="iid", n_total=4000, k=4,
                        r=1, seed=23)
    family = ModelFamily.linear()
    hits = 0
    for rep in range(10):
        partitions, params = generate(spec, rep)
        fit = combine_wlse([fit_local(family, p) for p in partitions])
        sel = dbic(lasso_path(fit), fit)
        if sel.support == params.support:
            hits += 1
            refit = refit_on_support(fit, params.support)
            npt.assert_allclose(sel.theta_selected, refit.coefficients,
                                atol=1e-8)
            assert np.all(sel.theta_selected[list(set(range(8))
                                                  - set(params.support))] == 0.0)
    assert hits >= 8


def test_no_false_positive_rate_nondecreasing_in_n():
    family = ModelFamily.linear()
    rates = []
    for n_total in (2000, 10000, 50000):
        spec = ScenarioSpec(example="linear", setting="iid", n_total=n_total,
                            k=5, r=40, seed=6)
        clean = 0
        for rep in range(spec.r):
            partitions, params = generate(spec, rep)
            fit = combine_wlse([fit_local(family, p) for p in partitions])
            sel = dbic(lasso_path(fit), fit)
            clean += set(sel.support) <= set(params.support)
        rates.append(clean / spec.r)
    assert rates[0] <= rates[1] <= rates[2]


def test_exact_zero_estimate_is_pinned(rng):
    fit = make_fit(rng, np.array([1.0, 0.0, -0.7]))
    with pytest.warns(ZeroCoefficientPinned):
        path = lasso_path(fit)
    assert np.all(path.coefficients_at_knots[:, 1] == 0.0)
    assert all(1 not in s for s in path.active_sets)
    assert np.isinf(path.weights[1])
    npt.assert_allclose(path.coefficients_at_knots[-1][[0, 2]],
                        fit.theta_tilde.coefficients[[0, 2]], atol=1e-9)


def test_unpenalized_coefficient_is_profiled_not_shrunk(rng):
    fit = make_fit(rng, np.array([1.5, -0.9, 0.4, 0.02]))
    path = lasso_path(fit, penalize=(0, 1, 2))
    assert all(3 in s for s in path.active_sets)
    assert path.weights[3] == 0.0
    assert np.all(path.coefficients_at_knots[:, 3] != 0.0)
    for i in range(path.n_knots):
        assert kkt_violation(fit, path, i) < 1e-7
        # stationarity in the unpenalized coordinate is exact
        grad2 = 2.0 * fit.precision @ (path.theta_at_knot(i)
                                       - fit.theta_tilde.as_array())
        assert abs(grad2[3]) < 1e-9


def test_cutpoints_ride_along_unpenalized(rng):
    spec = ScenarioSpec(example="ordered-probit", setting="iid", n_total=3000,
                        k=3, r=1, seed=9)
    partitions, params = generate(spec, 0)
    family = ModelFamily.ordered_probit(3)
    fit = combine_wlse([fit_local(family, p) for p in partitions])
    path = lasso_path(fit)
    assert path.cutpoints_at_knots is not None
    assert path.cutpoints_at_knots.shape == (path.n_knots, 3)
    for i in range(path.n_knots):
        assert kkt_violation(fit, path, i) < 1e-7
        grad2 = 2.0 * fit.precision @ (path.theta_at_knot(i)
                                       - fit.theta_tilde.as_array())
        assert np.max(np.abs(grad2[8:])) < 1e-9
    sel = dbic(path, fit)
    assert sel.support == params.support
    assert sel.params_selected.cutpoints is not None
