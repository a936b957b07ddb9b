"""Shared fixtures and independent numerical oracles."""

from __future__ import annotations

import numpy as np
import pytest

from dlsa.combine import CombinedFit
from dlsa.families import DataPartition, ModelFamily, ParamVector, gradient, loss

ALL_KINDS = ("linear", "logistic", "poisson", "cox", "ordered-probit")


def family_of(kind: str) -> ModelFamily:
    if kind == "ordered-probit":
        return ModelFamily.ordered_probit(3)
    return ModelFamily(kind)


def fd_gradient(family, theta, data, h=1e-6):
    """Central finite differences of the loss."""
    values = theta.as_array()
    ncut = 0 if theta.cutpoints is None else theta.cutpoints.size
    out = np.zeros_like(values)
    for i in range(values.size):
        up, dn = values.copy(), values.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (loss(family, ParamVector.from_array(up, ncut), data)
                  - loss(family, ParamVector.from_array(dn, ncut), data)) / (2 * h)
    return out


def fd_hessian(family, theta, data, h=1e-6):
    """Central finite differences of the analytic gradient."""
    values = theta.as_array()
    ncut = 0 if theta.cutpoints is None else theta.cutpoints.size
    q = values.size
    out = np.zeros((q, q))
    for i in range(q):
        up, dn = values.copy(), values.copy()
        up[i] += h
        dn[i] -= h
        out[:, i] = (gradient(family, ParamVector.from_array(up, ncut), data)
                     - gradient(family, ParamVector.from_array(dn, ncut), data)) / (2 * h)
    return out


def random_probe(kind: str, rng: np.random.Generator, n: int = 25, p: int = 4):
    """Random (family, theta, partition) triple with a moderate signal."""
    family = family_of(kind)
    X = rng.standard_normal((n, p))
    truth = rng.normal(0.0, 0.5, p)
    eta = X @ truth
    if kind == "linear":
        y = eta + rng.standard_normal(n)
    elif kind == "logistic":
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    elif kind == "poisson":
        y = rng.poisson(np.exp(eta)).astype(float)
    elif kind == "cox":
        t = rng.exponential(np.exp(-eta))
        t[1] = t[0]  # keep at least one tie in every probe
        d = (rng.random(n) < 0.7).astype(float)
        d[:2] = 1.0
        y = np.column_stack([t, d])
    else:
        cuts = np.array([-0.8, 0.0, 0.9])
        z = eta + rng.standard_normal(n)
        y = (np.digitize(z, cuts) + 1).astype(float)
    data = DataPartition(covariates=X, response=y, partition_id=0)
    coef = rng.normal(0.0, 0.4, p)
    if kind == "ordered-probit":
        theta = ParamVector(coef, np.sort(rng.normal(0.0, 0.8, 3))
                            + np.array([0.0, 0.4, 0.8]))
    else:
        theta = ParamVector(coef)
    return family, theta, data


def random_pd_matrix(rng: np.random.Generator, p: int) -> np.ndarray:
    A = rng.standard_normal((p, p))
    M = A @ A.T / p + 0.3 * np.eye(p)
    return 0.5 * (M + M.T)


def make_fit(rng: np.random.Generator, theta: np.ndarray, *, n_total: int = 10000,
             k: int = 5, precision: np.ndarray | None = None,
             cutpoints: np.ndarray | None = None) -> CombinedFit:
    """Synthetic combined fit with a given estimate and random PD precision."""
    theta = np.asarray(theta, dtype=float)
    q = theta.size + (0 if cutpoints is None else len(cutpoints))
    if precision is None:
        precision = random_pd_matrix(rng, q)
    cov = np.linalg.inv(precision)
    return CombinedFit(
        theta_tilde=ParamVector(theta, cutpoints),
        precision=precision,
        covariance=0.5 * (cov + cov.T),
        total_n=n_total,
        k=k,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
