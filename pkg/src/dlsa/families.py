"""Loss families with analytic gradients and Hessians.

Five regression families share one interface: a scalar ``loss`` (per-sample
negative log-likelihood averaged over the partition, except for the linear
family which uses half the mean squared error so that its Hessian is the
scaled Gram matrix), its analytic ``gradient`` and its analytic ``hessian``
with respect to the full parameter vector.  The ordered-probit family carries
``L - 1`` strictly increasing cutpoints in addition to the regression
coefficients, so its parameter dimension is ``p + L - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, log_ndtr, ndtri

from .exceptions import DimensionMismatch, NonPositiveDefinite

FAMILY_KINDS = ("linear", "logistic", "poisson", "cox", "ordered-probit")

# |x'theta| is clamped to this value inside logistic / poisson / probit link
# evaluation; derivatives are taken at the clamped value.
LINPRED_CLAMP = 30.0

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ModelFamily:
    """Tagged choice of loss family plus family-specific metadata.

    ``num_cutpoints`` is required (and only allowed) for ``ordered-probit``;
    ``tie_method`` only for ``cox`` (Breslow is the single supported choice).
    """

    kind: str
    num_cutpoints: int | None = None
    tie_method: str | None = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.kind == "ordered-probit":
            if self.num_cutpoints is None or self.num_cutpoints < 1:
                raise ValueError("ordered-probit requires num_cutpoints >= 1")
        elif self.num_cutpoints is not None:
            raise ValueError(f"num_cutpoints is not valid for {self.kind}")
        if self.kind == "cox":
            if self.tie_method is None:
                object.__setattr__(self, "tie_method", "breslow")
            elif self.tie_method != "breslow":
                raise ValueError(f"unsupported tie method {self.tie_method!r}")
        elif self.tie_method is not None:
            raise ValueError(f"tie_method is not valid for {self.kind}")

    @classmethod
    def linear(cls) -> "ModelFamily":
        return cls("linear")

    @classmethod
    def logistic(cls) -> "ModelFamily":
        return cls("logistic")

    @classmethod
    def poisson(cls) -> "ModelFamily":
        return cls("poisson")

    @classmethod
    def cox(cls) -> "ModelFamily":
        return cls("cox")

    @classmethod
    def ordered_probit(cls, num_cutpoints: int) -> "ModelFamily":
        return cls("ordered-probit", num_cutpoints=num_cutpoints)

    @property
    def num_levels(self) -> int:
        if self.kind != "ordered-probit":
            raise ValueError("num_levels only defined for ordered-probit")
        return self.num_cutpoints + 1

    def param_dim(self, n_features: int) -> int:
        """Total parameter dimension q for a design with ``n_features`` columns."""
        extra = self.num_cutpoints if self.kind == "ordered-probit" else 0
        return n_features + extra


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Regression coefficients plus (for ordered-probit) increasing cutpoints."""

    coefficients: np.ndarray
    cutpoints: np.ndarray | None = None

    def __post_init__(self):
        coef = _readonly(np.atleast_1d(self.coefficients))
        if coef.ndim != 1:
            raise DimensionMismatch("coefficients must be a 1-d vector")
        object.__setattr__(self, "coefficients", coef)
        if self.cutpoints is not None:
            cuts = _readonly(np.atleast_1d(self.cutpoints))
            if cuts.ndim != 1 or cuts.size < 1:
                raise DimensionMismatch("cutpoints must be a non-empty 1-d vector")
            if not np.all(np.diff(cuts) > 0):
                raise ValueError("cutpoints must be strictly increasing")
            object.__setattr__(self, "cutpoints", cuts)

    @property
    def n_coef(self) -> int:
        return self.coefficients.size

    @property
    def dim(self) -> int:
        return self.coefficients.size + (0 if self.cutpoints is None else self.cutpoints.size)

    def as_array(self) -> np.ndarray:
        if self.cutpoints is None:
            return self.coefficients.copy()
        return np.concatenate([self.coefficients, self.cutpoints])

    @classmethod
    def from_array(cls, values: np.ndarray, num_cutpoints: int = 0) -> "ParamVector":
        values = np.asarray(values, dtype=np.float64)
        if num_cutpoints == 0:
            return cls(values)
        return cls(values[:-num_cutpoints], values[-num_cutpoints:])

    @classmethod
    def zeros(cls, family: ModelFamily, n_features: int,
              cutpoints: np.ndarray | None = None) -> "ParamVector":
        coef = np.zeros(n_features)
        if family.kind != "ordered-probit":
            return cls(coef)
        if cutpoints is None:
            cutpoints = np.arange(family.num_cutpoints, dtype=np.float64)
        return cls(coef, cutpoints)


@dataclass(frozen=True, eq=False)
class DataPartition:
    """One worker's share of the data.

    ``response`` is a plain vector except for the cox family, where it is an
    ``(n, 2)`` array with columns (time, event flag).
    """

    covariates: np.ndarray
    response: np.ndarray
    partition_id: int = 0

    def __post_init__(self):
        X = _readonly(np.atleast_2d(self.covariates))
        y = _readonly(self.response)
        if X.ndim != 2:
            raise DimensionMismatch("covariates must be a 2-d matrix")
        if y.shape[0] != X.shape[0]:
            raise DimensionMismatch(
                f"response length {y.shape[0]} != number of rows {X.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("covariates and response must be finite")
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "response", y)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def n_features(self) -> int:
        return self.covariates.shape[1]

    def validate_for(self, family: ModelFamily) -> None:
        """Check the family-specific response constraints and the minimum size."""
        y = self.response
        q = family.param_dim(self.n_features)
        if self.n < q + 1:
            raise DimensionMismatch(
                f"partition {self.partition_id}: {self.n} rows cannot identify "
                f"{q} parameters")
        kind = family.kind
        if kind == "cox":
            if y.ndim != 2 or y.shape[1] != 2:
                raise DimensionMismatch("cox response must be an (n, 2) array")
            if not np.all(y[:, 0] > 0):
                raise ValueError("cox event times must be strictly positive")
            if not np.all(np.isin(y[:, 1], (0.0, 1.0))):
                raise ValueError("cox event flags must be 0 or 1")
            return
        if y.ndim != 1:
            raise DimensionMismatch(f"{kind} response must be a vector")
        if kind == "logistic" and not np.all(np.isin(y, (0.0, 1.0))):
            raise ValueError("logistic response must be 0/1")
        if kind == "poisson" and (np.any(y < 0) or np.any(y != np.round(y))):
            raise ValueError("poisson response must be nonnegative counts")
        if kind == "ordered-probit":
            levels = family.num_levels
            if np.any(y != np.round(y)) or np.any(y < 1) or np.any(y > levels):
                raise ValueError(f"ordinal response must lie in 1..{levels}")


@dataclass(frozen=True, eq=False)
class LocalSummary:
    """What one worker sends to the master: its estimate, the scaled inverse
    covariance ``n_k * H(theta_hat)``, and the local sample count."""

    theta_hat: ParamVector
    precision: np.ndarray
    n_k: int
    partition_id: int = 0

    def __post_init__(self):
        P = np.array(self.precision, dtype=np.float64, copy=True)
        q = self.theta_hat.dim
        if P.shape != (q, q):
            raise DimensionMismatch(f"precision must be {q}x{q}, got {P.shape}")
        if np.max(np.abs(P - P.T)) > 1e-10 * max(1.0, np.max(np.abs(P))):
            raise ValueError("precision is not symmetric")
        P = 0.5 * (P + P.T)
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError:
            raise NonPositiveDefinite(
                f"partition {self.partition_id}: local precision is not positive definite")
        P.setflags(write=False)
        object.__setattr__(self, "precision", P)

    @property
    def dim(self) -> int:
        return self.theta_hat.dim


# ---------------------------------------------------------------------------
# family internals


def _check_args(family: ModelFamily, theta: ParamVector, data: DataPartition) -> None:
    if theta.n_coef != data.n_features:
        raise DimensionMismatch(
            f"{theta.n_coef} coefficients for {data.n_features} covariate columns")
    if family.kind == "ordered-probit":
        if theta.cutpoints is None or theta.cutpoints.size != family.num_cutpoints:
            raise DimensionMismatch("parameter cutpoints do not match the family")
    elif theta.cutpoints is not None:
        raise DimensionMismatch(f"{family.kind} parameters cannot carry cutpoints")
    if family.kind == "cox" and (data.response.ndim != 2 or data.response.shape[1] != 2):
        raise DimensionMismatch("cox response must be an (n, 2) array")
    if family.kind != "cox" and data.response.ndim != 1:
        raise DimensionMismatch("response must be a vector")


def _clamped_eta(theta: ParamVector, X: np.ndarray) -> np.ndarray:
    eta = X @ theta.coefficients
    return np.clip(eta, -LINPRED_CLAMP, LINPRED_CLAMP)


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class _Linear:
    @staticmethod
    def loss(family, theta, data):
        r = data.covariates @ theta.coefficients - data.response
        return 0.5 * float(r @ r) / data.n

    @staticmethod
    def gradient(family, theta, data):
        X = data.covariates
        r = X @ theta.coefficients - data.response
        return (X.T @ r) / data.n

    @staticmethod
    def hessian(family, theta, data):
        X = data.covariates
        return (X.T @ X) / data.n


class _Logistic:
    @staticmethod
    def loss(family, theta, data):
        eta = _clamped_eta(theta, data.covariates)
        # mean of softplus(eta) - y*eta
        return float(np.mean(np.logaddexp(0.0, eta) - data.response * eta))

    @staticmethod
    def gradient(family, theta, data):
        X = data.covariates
        p = _sigmoid(_clamped_eta(theta, X))
        return (X.T @ (p - data.response)) / data.n

    @staticmethod
    def hessian(family, theta, data):
        X = data.covariates
        p = _sigmoid(_clamped_eta(theta, X))
        w = p * (1.0 - p)
        return (X.T * w) @ X / data.n


class _Poisson:
    @staticmethod
    def loss(family, theta, data):
        eta = _clamped_eta(theta, data.covariates)
        y = data.response
        return float(np.mean(np.exp(eta) - y * eta + gammaln(y + 1.0)))

    @staticmethod
    def gradient(family, theta, data):
        X = data.covariates
        lam = np.exp(_clamped_eta(theta, X))
        return (X.T @ (lam - data.response)) / data.n

    @staticmethod
    def hessian(family, theta, data):
        X = data.covariates
        lam = np.exp(_clamped_eta(theta, X))
        return (X.T * lam) @ X / data.n


class _Cox:
    """Negative log partial likelihood, Breslow convention for tied times."""

    @staticmethod
    def _risk_sums(theta, data, order):
        """Sorted-by-time views plus risk-set sums shared by loss/grad/hess.

        ``order`` ∈ {0, 1, 2} caps which suffix sums are computed.
        Returns (events mask, shifted eta, S0, S1, S2, X sorted) where each
        S* is already expanded to tie groups (same value for equal times).
        """
        X = data.covariates
        times = data.response[:, 0]
        flags = data.response[:, 1]
        idx = np.argsort(times, kind="stable")
        t_s, d_s, X_s = times[idx], flags[idx], X[idx]
        eta = X_s @ theta.coefficients
        shift = float(np.max(eta))
        w = np.exp(eta - shift)
        first = np.searchsorted(t_s, t_s, side="left")  # start of each tie group
        S0 = np.cumsum(w[::-1])[::-1][first]
        S1 = S2 = None
        if order >= 1:
            S1 = np.cumsum((w[:, None] * X_s)[::-1], axis=0)[::-1][first]
        if order >= 2:
            outer = np.einsum("ij,ik->ijk", X_s, X_s)
            S2 = np.cumsum((w[:, None, None] * outer)[::-1], axis=0)[::-1][first]
        return d_s == 1.0, eta - shift, S0, S1, S2, X_s

    @staticmethod
    def loss(family, theta, data):
        ev, eta_c, S0, _, _, _ = _Cox._risk_sums(theta, data, order=0)
        return -float(np.sum(eta_c[ev] - np.log(S0[ev]))) / data.n

    @staticmethod
    def gradient(family, theta, data):
        ev, _, S0, S1, _, X_s = _Cox._risk_sums(theta, data, order=1)
        diff = X_s[ev] - S1[ev] / S0[ev, None]
        return -np.sum(diff, axis=0) / data.n

    @staticmethod
    def hessian(family, theta, data):
        ev, _, S0, S1, S2, _ = _Cox._risk_sums(theta, data, order=2)
        mu = S1[ev] / S0[ev, None]
        H = S2[ev] / S0[ev, None, None] - np.einsum("ij,ik->ijk", mu, mu)
        return np.sum(H, axis=0) / data.n


class _OrderedProbit:
    """Ordinal probit likelihood with cutpoints as free parameters.

    Per-sample terms use the interval bounds a = c_upper - eta and
    b = c_lower - eta (±inf at the extreme levels).  All probability ratios
    are evaluated in log space to stay finite far into the tails.
    """

    @staticmethod
    def _terms(family, theta, data):
        cuts = theta.cutpoints
        levels = family.num_levels
        y = data.response.astype(np.int64)
        eta = _clamped_eta(theta, data.covariates)
        n = data.n

        has_upper = y < levels       # a finite
        has_lower = y > 1            # b finite
        a = np.full(n, np.inf)
        b = np.full(n, -np.inf)
        a[has_upper] = cuts[y[has_upper] - 1] - eta[has_upper]
        b[has_lower] = cuts[y[has_lower] - 2] - eta[has_lower]

        # log P(Y = y | eta): branch so the subtraction happens in the tail
        # where the two normal cdf values differ, not where both are near 1.
        log_p = np.empty(n)
        only_upper = has_upper & ~has_lower
        only_lower = has_lower & ~has_upper
        both = has_upper & has_lower
        log_p[only_upper] = log_ndtr(a[only_upper])
        log_p[only_lower] = log_ndtr(-b[only_lower])
        if np.any(both):
            ab, bb = a[both], b[both]
            lo_side = (ab + bb) <= 0
            hi, lo = np.where(lo_side, ab, -bb), np.where(lo_side, bb, -ab)
            l_hi, l_lo = log_ndtr(hi), log_ndtr(lo)
            delta = np.minimum(l_lo - l_hi, -1e-300)   # < 0; guard exact ties
            log_p[both] = l_hi + np.log(-np.expm1(delta))

        # ratio of the normal density at each finite bound to P (0 at ±inf)
        r_a = np.zeros(n)
        r_b = np.zeros(n)
        r_a[has_upper] = np.exp(-0.5 * a[has_upper] ** 2 - _LOG_SQRT_2PI - log_p[has_upper])
        r_b[has_lower] = np.exp(-0.5 * b[has_lower] ** 2 - _LOG_SQRT_2PI - log_p[has_lower])
        a_ra = np.zeros(n)
        b_rb = np.zeros(n)
        a_ra[has_upper] = a[has_upper] * r_a[has_upper]
        b_rb[has_lower] = b[has_lower] * r_b[has_lower]
        return y, log_p, r_a, r_b, a_ra, b_rb, has_upper, has_lower

    @staticmethod
    def loss(family, theta, data):
        _, log_p, *_ = _OrderedProbit._terms(family, theta, data)
        return -float(np.mean(log_p))

    @staticmethod
    def gradient(family, theta, data):
        y, _, r_a, r_b, _, _, has_upper, has_lower = \
            _OrderedProbit._terms(family, theta, data)
        X = data.covariates
        n = data.n
        g_eta = r_a - r_b
        g_coef = (X.T @ g_eta) / n
        g_cut = np.zeros(family.num_cutpoints)
        np.add.at(g_cut, y[has_upper] - 1, -r_a[has_upper])
        np.add.at(g_cut, y[has_lower] - 2, r_b[has_lower])
        return np.concatenate([g_coef, g_cut / n])

    @staticmethod
    def hessian(family, theta, data):
        y, _, r_a, r_b, a_ra, b_rb, has_upper, has_lower = \
            _OrderedProbit._terms(family, theta, data)
        X = data.covariates
        n, p = X.shape
        m = family.num_cutpoints
        g_eta = r_a - r_b
        h_eta = (a_ra - b_rb) + g_eta ** 2

        q = p + m
        H = np.zeros((q, q))
        H[:p, :p] = (X.T * h_eta) @ X / n

        # mixed coefficient/cutpoint block: per-sample d2/deta dc terms
        S = np.zeros((n, m))
        up = has_upper
        lo = has_lower
        np.add.at(S, (np.nonzero(up)[0], y[up] - 1),
                  -a_ra[up] - r_a[up] ** 2 + r_a[up] * r_b[up])
        np.add.at(S, (np.nonzero(lo)[0], y[lo] - 2),
                  b_rb[lo] + r_a[lo] * r_b[lo] - r_b[lo] ** 2)
        H[:p, p:] = X.T @ S / n
        H[p:, :p] = H[:p, p:].T

        C = np.zeros((m, m))
        np.add.at(C, (y[up] - 1, y[up] - 1), a_ra[up] + r_a[up] ** 2)
        np.add.at(C, (y[lo] - 2, y[lo] - 2), -b_rb[lo] + r_b[lo] ** 2)
        both = up & lo
        np.add.at(C, (y[both] - 2, y[both] - 1), -r_a[both] * r_b[both])
        np.add.at(C, (y[both] - 1, y[both] - 2), -r_a[both] * r_b[both])
        H[p:, p:] = C / n
        return H


_EVALUATORS = {
    "linear": _Linear,
    "logistic": _Logistic,
    "poisson": _Poisson,
    "cox": _Cox,
    "ordered-probit": _OrderedProbit,
}


def loss(family: ModelFamily, theta: ParamVector, data: DataPartition) -> float:
    """Average per-sample loss of ``theta`` on one partition."""
    _check_args(family, theta, data)
    return _EVALUATORS[family.kind].loss(family, theta, data)


def gradient(family: ModelFamily, theta: ParamVector, data: DataPartition) -> np.ndarray:
    """Analytic gradient of :func:`loss`, length ``q``."""
    _check_args(family, theta, data)
    return _EVALUATORS[family.kind].gradient(family, theta, data)


def hessian(family: ModelFamily, theta: ParamVector, data: DataPartition) -> np.ndarray:
    """Analytic Hessian of :func:`loss`, ``q x q`` and exactly symmetric."""
    _check_args(family, theta, data)
    H = _EVALUATORS[family.kind].hessian(family, theta, data)
    return 0.5 * (H + H.T)


def initial_params(family: ModelFamily, data: DataPartition) -> ParamVector:
    """Default starting point: zero coefficients; ordered-probit cutpoints at
    the probit transform of the empirical cumulative level frequencies."""
    p = data.n_features
    if family.kind != "ordered-probit":
        return ParamVector(np.zeros(p))
    y = data.response
    n = data.n
    cum = np.array([np.mean(y <= l) for l in range(1, family.num_levels)])
    cum = np.clip(cum, 1.0 / (n + 1.0), 1.0 - 1.0 / (n + 1.0))
    cuts = ndtri(cum)
    # absent levels give tied cumulative counts; nudge to keep strict order
    for i in range(1, cuts.size):
        if cuts[i] <= cuts[i - 1]:
            cuts[i] = cuts[i - 1] + 1e-6
    return ParamVector(np.zeros(p), cuts)


def _split_params(family: ModelFamily, values: np.ndarray) -> ParamVector:
    ncut = family.num_cutpoints if family.kind == "ordered-probit" else 0
    return ParamVector.from_array(values, ncut)
