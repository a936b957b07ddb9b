"""Newton fitting on single partitions."""

import numpy as np
import numpy.testing as npt
import pytest

from dlsa.exceptions import NonConvergence, SingularHessian
from dlsa.families import DataPartition, ModelFamily, ParamVector, hessian
from dlsa.fitting import fit_local, fit_pooled
from dlsa.simulate import ScenarioSpec, generate

from conftest import ALL_KINDS, random_probe


def test_linear_fit_matches_normal_equations(rng):
    X = rng.standard_normal((50, 4))
    y = X @ np.array([1.0, -2.0, 0.5, 0.0]) + rng.standard_normal(50)
    summary = fit_local(ModelFamily.linear(), DataPartition(X, y))
    expected = np.linalg.solve(X.T @ X, X.T @ y)
    npt.assert_allclose(summary.theta_hat.coefficients, expected, atol=1e-10)


def test_logistic_symmetric_design_gives_zero(rng):
    base = rng.standard_normal((10, 3))
    X = np.vstack([base, base, -base, -base])
    y = np.concatenate([np.zeros(10), np.ones(10), np.zeros(10), np.ones(10)])
    summary = fit_local(ModelFamily.logistic(), DataPartition(X, y))
    assert np.max(np.abs(summary.theta_hat.coefficients)) <= 1e-8


def test_poisson_partition_recovers_truth_within_sampling_bound():
    spec = ScenarioSpec(example="poisson", setting="iid", n_total=2000, k=2,
                        r=1, seed=99)
    partitions, params = generate(spec, 0)
    summary = fit_local(ModelFamily.poisson(), partitions[0])  # 1000 x 8
    assert np.max(np.abs(summary.theta_hat.coefficients - params.theta0)) < 0.15


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_fit_invariant_to_row_permutation(kind, rng):
    family, _, data = random_probe(kind, rng, n=120)
    perm = rng.permutation(data.n)
    shuffled = DataPartition(data.covariates[perm], data.response[perm])
    a = fit_local(family, data).theta_hat.as_array()
    b = fit_local(family, shuffled).theta_hat.as_array()
    npt.assert_allclose(a, b, atol=1e-9)


def test_probit_fit_keeps_cutpoints_increasing(rng):
    family, _, data = random_probe("ordered-probit", rng, n=300)
    summary = fit_local(family, data)
    assert np.all(np.diff(summary.theta_hat.cutpoints) > 0)


def test_precision_is_scaled_hessian_at_optimum(rng):
    family, _, data = random_probe("logistic", rng, n=100)
    summary = fit_local(family, data)
    npt.assert_allclose(summary.precision,
                        data.n * hessian(family, summary.theta_hat, data),
                        rtol=1e-12)
    np.linalg.cholesky(summary.precision)  # positive definite


def test_iteration_cap_raises_nonconvergence(rng):
    family, _, data = random_probe("logistic", rng, n=100)
    with pytest.raises(NonConvergence):
        fit_local(family, data, max_iter=1)


def test_collinear_covariates_raise_singular_hessian(rng):
    X = rng.standard_normal((30, 2))
    X = np.column_stack([X, X[:, 0]])  # exact copy of column 0
    y = rng.standard_normal(30)
    with pytest.raises(SingularHessian):
        fit_local(ModelFamily.linear(), DataPartition(X, y))


def test_fit_pooled_equals_fit_on_stacked_rows(rng):
    spec = ScenarioSpec(example="logistic", setting="iid", n_total=800, k=4,
                        r=1, seed=1)
    partitions, _ = generate(spec, 0)
    pooled = fit_pooled(ModelFamily.logistic(), partitions)
    stacked = DataPartition(
        np.vstack([p.covariates for p in partitions]),
        np.concatenate([p.response for p in partitions]), partition_id=-1)
    direct = fit_local(ModelFamily.logistic(), stacked)
    npt.assert_array_equal(pooled.theta_hat.coefficients,
                           direct.theta_hat.coefficients)
    assert pooled.n_k == 800
