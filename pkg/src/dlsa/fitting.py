"""Local estimation on one data partition by damped Newton iteration."""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg

from .exceptions import NonConvergence, NonPositiveDefinite, SingularHessian
from .families import (
    DataPartition,
    LocalSummary,
    ModelFamily,
    ParamVector,
    _split_params,
    gradient,
    hessian,
    initial_params,
    loss,
)

MAX_ITER = 100
GRAD_TOL = 1e-8
MAX_HALVINGS = 30
ARMIJO_SLOPE = 1e-4


def newton_minimize(
    value: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    hess: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    valid: Callable[[np.ndarray], bool] = lambda x: True,
    max_iter: int = MAX_ITER,
    grad_tol: float = GRAD_TOL,
    label: str = "newton",
) -> np.ndarray:
    """Damped Newton with step halving on a smooth convex objective.

    ``valid`` rejects trial points outside the parameter domain (used to keep
    ordered-probit cutpoints increasing); a rejected point is treated like a
    failed decrease and the step is halved.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    current = value(x)
    for _ in range(max_iter):
        g = grad(x)
        if np.max(np.abs(g)) <= grad_tol:
            return x
        H = hess(x)
        try:
            factor = scipy.linalg.cho_factor(H, lower=True)
            direction = -scipy.linalg.cho_solve(factor, g)
        except scipy.linalg.LinAlgError:
            raise SingularHessian(
                f"{label}: Newton step unsolvable (collinear covariates?)")
        slope = float(g @ direction)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = x + t * direction
            if valid(trial):
                trial_value = value(trial)
                if trial_value <= current + ARMIJO_SLOPE * t * slope:
                    break
            t *= 0.5
        else:
            reason = ("step breaks cutpoint ordering"
                      if not valid(x + direction) else "line search exhausted")
            raise NonConvergence(f"{label}: {reason} after {MAX_HALVINGS} halvings")
        x, current = trial, trial_value
    raise NonConvergence(
        f"{label}: gradient norm {np.max(np.abs(grad(x))):.2e} > {grad_tol:g} "
        f"after {max_iter} iterations")


def _cutpoint_validator(family: ModelFamily) -> Callable[[np.ndarray], bool]:
    if family.kind != "ordered-probit":
        return lambda x: True
    m = family.num_cutpoints

    def _valid(x: np.ndarray) -> bool:
        return bool(np.all(np.diff(x[-m:]) > 0))

    return _valid


def fit_local(
    family: ModelFamily,
    data: DataPartition,
    init: ParamVector | None = None,
    *,
    max_iter: int = MAX_ITER,
    grad_tol: float = GRAD_TOL,
) -> LocalSummary:
    """Minimize the partition loss and package the result for the master.

    Returns the estimate together with ``n_k`` times the Hessian at the
    optimum (the scaled inverse covariance the master needs) and the sample
    count.  Raises :class:`NonConvergence` when the iteration or line-search
    budget runs out and :class:`SingularHessian` when a Newton system cannot
    be solved.
    """
    data.validate_for(family)
    theta0 = initial_params(family, data) if init is None else init
    solution = newton_minimize(
        lambda x: loss(family, _split_params(family, x), data),
        lambda x: gradient(family, _split_params(family, x), data),
        lambda x: hessian(family, _split_params(family, x), data),
        theta0.as_array(),
        valid=_cutpoint_validator(family),
        max_iter=max_iter,
        grad_tol=grad_tol,
        label=f"partition {data.partition_id}",
    )
    theta = _split_params(family, solution)
    precision = data.n * hessian(family, theta, data)
    try:
        return LocalSummary(
            theta_hat=theta,
            precision=0.5 * (precision + precision.T),
            n_k=data.n,
            partition_id=data.partition_id,
        )
    except NonPositiveDefinite:
        raise SingularHessian(
            f"partition {data.partition_id}: curvature at the optimum is "
            "singular (collinear covariates?)")


def fit_pooled(family: ModelFamily, partitions: list[DataPartition],
               init: ParamVector | None = None) -> LocalSummary:
    """Newton fit on the concatenation of all partitions (the centralized
    baseline the distributed estimators are measured against)."""
    X = np.vstack([p.covariates for p in partitions])
    if partitions[0].response.ndim == 2:
        y = np.vstack([p.response for p in partitions])
    else:
        y = np.concatenate([p.response for p in partitions])
    pooled = DataPartition(covariates=X, response=y, partition_id=-1)
    return fit_local(family, pooled, init=init)
