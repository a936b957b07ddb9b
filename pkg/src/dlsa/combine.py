"""Master-side aggregation of worker summaries.

``combine_wlse`` is the headline estimator: the precision-weighted average of
local estimates, solved from the summed local precisions.  ``combine_one_shot``
(the simple sample-size-weighted average) and ``combine_csl`` (a one-step
surrogate-Newton update that borrows a single worker's Hessian) are the
standard one-round competitors used in the benchmark harness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DimensionMismatch
from .families import (
    DataPartition,
    LocalSummary,
    ModelFamily,
    ParamVector,
    gradient,
    hessian,
    loss,
)
from .fitting import _cutpoint_validator, newton_minimize
from .linalg import psd_inverse, psd_solve


@dataclass(frozen=True, eq=False)
class CombinedFit:
    """Combined estimate plus its precision/covariance on the master.

    ``precision`` is the sample-size-weighted average of local precisions
    (sum of worker precisions divided by the total sample count) and
    ``covariance`` its inverse.
    """

    theta_tilde: ParamVector
    precision: np.ndarray
    covariance: np.ndarray
    total_n: int
    k: int

    @property
    def dim(self) -> int:
        return self.theta_tilde.dim


def _canonical(summaries: Sequence[LocalSummary]) -> list[LocalSummary]:
    """Validate and order summaries by partition id.

    The fixed ordering makes the floating-point reduction independent of the
    order the caller happened to receive the summaries in.
    """
    if len(summaries) == 0:
        raise DimensionMismatch("need at least one worker summary")
    q = summaries[0].dim
    ncut = 0 if summaries[0].theta_hat.cutpoints is None \
        else summaries[0].theta_hat.cutpoints.size
    for s in summaries:
        s_ncut = 0 if s.theta_hat.cutpoints is None else s.theta_hat.cutpoints.size
        if s.dim != q or s_ncut != ncut:
            raise DimensionMismatch("worker summaries have mismatched dimensions")
    order = np.argsort([s.partition_id for s in summaries], kind="stable")
    return [summaries[i] for i in order]


def combine_wlse(summaries: Sequence[LocalSummary]) -> CombinedFit:
    """Precision-weighted combination of local estimates.

    Sums the (already sample-size scaled) worker precisions and solves the
    normal equations by Cholesky; dividing by the total count only at the end
    avoids forming tiny per-worker weights.
    """
    summaries = _canonical(summaries)
    q = summaries[0].dim
    ncut = 0 if summaries[0].theta_hat.cutpoints is None \
        else summaries[0].theta_hat.cutpoints.size
    total = np.zeros((q, q))
    rhs = np.zeros(q)
    n = 0
    for s in summaries:
        total += s.precision
        rhs += s.precision @ s.theta_hat.as_array()
        n += s.n_k
    theta = psd_solve(total, rhs, context="combine")
    precision = total / n
    covariance = n * psd_inverse(total, context="combine")
    return CombinedFit(
        theta_tilde=ParamVector.from_array(theta, ncut),
        precision=0.5 * (precision + precision.T),
        covariance=covariance,
        total_n=n,
        k=len(summaries),
    )


def combine_one_shot(summaries: Sequence[LocalSummary]) -> ParamVector:
    """Sample-size weighted simple average of the local estimates."""
    summaries = _canonical(summaries)
    ncut = 0 if summaries[0].theta_hat.cutpoints is None \
        else summaries[0].theta_hat.cutpoints.size
    acc = np.zeros(summaries[0].dim)
    n = 0
    for s in summaries:
        acc += s.n_k * s.theta_hat.as_array()
        n += s.n_k
    return ParamVector.from_array(acc / n, ncut)


def combine_csl(
    summaries: Sequence[LocalSummary],
    partitions: Sequence[DataPartition],
    family: ModelFamily,
) -> ParamVector:
    """Surrogate-likelihood estimator anchored at the first partition.

    The designated partition's estimate is broadcast, every worker returns
    its gradient there (one extra message per worker), and the master
    minimizes the designated partition's loss tilted by the difference
    between its own gradient and the global one.  Only the designated
    partition's curvature ever enters, which is exactly why this estimator
    degrades when that partition's covariate distribution is
    unrepresentative.
    """
    if len(partitions) != len(summaries):
        raise DimensionMismatch(
            f"{len(summaries)} summaries for {len(partitions)} partitions")
    _canonical(summaries)  # dimension checks only; lists stay aligned
    anchor = summaries[0].theta_hat
    ncut = 0 if anchor.cutpoints is None else anchor.cutpoints.size
    acc = np.zeros(anchor.dim)
    n = 0
    for part in partitions:
        acc += part.n * gradient(family, anchor, part)
        n += part.n
    master = partitions[0]
    # tilt = local gradient at the anchor minus the global one
    tilt = gradient(family, anchor, master) - acc / n

    def _params(x: np.ndarray) -> ParamVector:
        return ParamVector.from_array(x, ncut)

    solution = newton_minimize(
        lambda x: loss(family, _params(x), master) - float(x @ tilt),
        lambda x: gradient(family, _params(x), master) - tilt,
        lambda x: hessian(family, _params(x), master),
        anchor.as_array(),
        valid=_cutpoint_validator(family),
        label="surrogate step",
    )
    return _params(solution)
