"""Adaptive-lasso shrinkage of a combined fit, solved exactly on the master.

The penalized objective is the combined quadratic form plus a weighted L1
term whose per-coefficient weight is the reciprocal of the combined estimate,
so one global knob ``lambda0`` scales all penalties.  Because the quadratic
is exact, the whole solution path in ``lambda0`` is piecewise linear and is
computed knot by knot with a homotopy (least-angle) sweep: at each knot a
coefficient either joins the active set or is dropped when it crosses zero.
Model selection evaluates a BIC-type criterion at the knots and refits the
chosen support without penalty.

Evaluating the criterion at knots only is enough: within one segment the
active set is fixed, the quadratic term is convex and increasing in
``lambda0``, and the nonzero count cannot increase toward the segment's lower
endpoint, so every interior point is dominated by the knot below it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .combine import CombinedFit
from .exceptions import DimensionMismatch, NonConvergence, ZeroCoefficientPinned
from .families import ParamVector
from .linalg import psd_solve

_REL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LassoPath:
    """Exact solution path over the penalty scale.

    ``knots`` is strictly decreasing and ends at 0, where the coefficients
    equal the unpenalized combined estimate.  ``weights`` holds the adaptive
    weight of each coefficient: ``1/|estimate|`` where penalized, ``inf``
    where the estimate is exactly zero (pinned), and 0 where the caller
    excluded the coefficient from the penalty.  ``cutpoints_at_knots`` tracks
    the unpenalized cutpoint block (ordered-probit fits) along the path.
    """

    knots: np.ndarray
    coefficients_at_knots: np.ndarray
    active_sets: tuple[tuple[int, ...], ...]
    df_at_knots: np.ndarray
    weights: np.ndarray
    penalized: tuple[int, ...]
    pinned: tuple[int, ...] = ()
    cutpoints_at_knots: np.ndarray | None = None

    @property
    def n_knots(self) -> int:
        return self.knots.size

    @property
    def n_coef(self) -> int:
        return self.coefficients_at_knots.shape[1]

    def theta_at_knot(self, i: int) -> np.ndarray:
        """Full parameter vector (coefficients plus cutpoints) at knot ``i``."""
        coef = self.coefficients_at_knots[i]
        if self.cutpoints_at_knots is None:
            return coef.copy()
        return np.concatenate([coef, self.cutpoints_at_knots[i]])

    def _interp(self, values: np.ndarray, lambda0: float) -> np.ndarray:
        lams = self.knots[::-1]
        return np.array([
            np.interp(min(lambda0, self.knots[0]), lams, values[::-1, j])
            for j in range(values.shape[1])
        ])

    def coefficients_at(self, lambda0: float) -> np.ndarray:
        """Coefficients at an arbitrary penalty level by linear interpolation
        (exact: the path is linear between knots and constant above the top)."""
        if lambda0 < 0:
            raise ValueError("lambda0 must be nonnegative")
        return self._interp(self.coefficients_at_knots, lambda0)

    def theta_at(self, lambda0: float) -> np.ndarray:
        coef = self.coefficients_at(lambda0)
        if self.cutpoints_at_knots is None:
            return coef
        return np.concatenate([coef, self._interp(self.cutpoints_at_knots, lambda0)])


@dataclass(frozen=True, eq=False)
class SelectionResult:
    """Outcome of criterion-based selection along a path."""

    chosen_lambda0: float
    theta_selected: np.ndarray
    params_selected: ParamVector
    support: tuple[int, ...]
    dbic_values: np.ndarray
    dbic_min: float


def _homotopy(Q: np.ndarray, m: np.ndarray, w: np.ndarray) -> list[tuple[float, np.ndarray]]:
    """Knots of argmin_x (x-m)' Q (x-m) + lambda0 * sum_j w_j |x_j|.

    Returns ``[(lambda_max, 0), ..., (0, m)]``. ``Q`` must be positive
    definite and every ``w_j`` finite positive.
    """
    nA = m.size
    Qm = Q @ m
    crit = np.abs(2.0 * Qm) / w
    lam = float(np.max(crit))
    knots = [(lam, np.zeros(nA))]
    if lam <= 0.0:
        return knots
    active = list(np.nonzero(crit >= lam * (1.0 - _REL_TOL))[0])
    signs = {j: float(np.sign(2.0 * Qm[j])) for j in active}

    for _ in range(40 * nA + 20):
        act = np.array(sorted(active), dtype=np.intp)
        s = np.array([signs[j] for j in act])
        Qaa = Q[np.ix_(act, act)]
        u = np.linalg.solve(Qaa, Qm[act])
        v = np.linalg.solve(Qaa, 0.5 * w[act] * s)

        cutoff = lam * (1.0 - _REL_TOL)
        candidates: list[tuple[float, str, int, float]] = []

        inact = np.setdiff1d(np.arange(nA), act, assume_unique=False)
        if inact.size:
            Qia = Q[np.ix_(inact, act)]
            a_i = 2.0 * (Qm[inact] - Qia @ u)
            b_i = 2.0 * (Qia @ v)
            for pos, j in enumerate(inact):
                for sign in (1.0, -1.0):
                    denom = sign * w[j] - b_i[pos]
                    if denom != 0.0:
                        cand = a_i[pos] / denom
                        if 0.0 < cand < cutoff:
                            candidates.append((cand, "join", int(j), sign))
        for pos, j in enumerate(act):
            if v[pos] != 0.0:
                cand = u[pos] / v[pos]
                if 0.0 < cand < cutoff:
                    candidates.append((cand, "drop", int(j), 0.0))

        if not candidates:
            x = np.zeros(nA)
            x[act] = u
            knots.append((0.0, x))
            return knots

        lam_next = max(c[0] for c in candidates)
        x = np.zeros(nA)
        x[act] = u - lam_next * v
        for cand, event, j, sign in candidates:
            if cand >= lam_next * (1.0 - _REL_TOL):
                if event == "join":
                    active.append(j)
                    signs[j] = sign
                    x[j] = 0.0
                else:
                    active.remove(j)
                    del signs[j]
                    x[j] = 0.0
        knots.append((lam_next, x))
        lam = lam_next

    raise NonConvergence("homotopy sweep did not terminate")


def lasso_path(fit: CombinedFit, penalize: tuple[int, ...] | None = None) -> LassoPath:
    """Exact adaptive-lasso path of a combined fit.

    ``penalize`` lists the 0-based coefficient indices that carry the L1
    penalty (default: all regression coefficients).  Cutpoints are never
    penalized.  Unpenalized coordinates are profiled out of the quadratic
    exactly, which leaves a reduced positive-definite problem over the
    penalized block; their values along the path are recovered afterwards
    from the profile identity.
    """
    theta_full = fit.theta_tilde.as_array()
    p = fit.theta_tilde.n_coef
    q = theta_full.size
    if penalize is None:
        penalize = tuple(range(p))
    else:
        penalize = tuple(sorted(set(int(j) for j in penalize)))
        if penalize and (penalize[0] < 0 or penalize[-1] >= p):
            raise DimensionMismatch("penalized indices out of range")

    pinned = tuple(j for j in penalize if theta_full[j] == 0.0)
    if pinned:
        warnings.warn(
            f"coefficients {pinned} are exactly zero in the combined fit; "
            "they stay at zero along the whole path",
            ZeroCoefficientPinned,
        )
    path_idx = np.array([j for j in penalize if theta_full[j] != 0.0], dtype=np.intp)
    free_idx = np.array(
        [j for j in range(q) if j not in set(penalize)], dtype=np.intp)

    Omega = fit.precision
    m = theta_full[path_idx]
    w = 1.0 / np.abs(m) if path_idx.size else np.zeros(0)

    if free_idx.size:
        Off = Omega[np.ix_(free_idx, free_idx)]
        Ofa = Omega[np.ix_(free_idx, path_idx)]
        W = psd_solve(Off, Ofa, context="profile")
        Q = Omega[np.ix_(path_idx, path_idx)] - Omega[np.ix_(path_idx, free_idx)] @ W
        Q = 0.5 * (Q + Q.T)
    else:
        W = np.zeros((0, path_idx.size))
        Q = Omega[np.ix_(path_idx, path_idx)]

    if path_idx.size:
        raw = _homotopy(Q, m, w)
    else:
        raw = [(0.0, np.zeros(0))]

    n_knots = len(raw)
    coef = np.zeros((n_knots, p))
    cuts = np.zeros((n_knots, q - p)) if q > p else None
    active_sets: list[tuple[int, ...]] = []
    for i, (_, x) in enumerate(raw):
        full = np.zeros(q)
        full[path_idx] = x
        free_vals = theta_full[free_idx] - W @ (x - m) if free_idx.size else \
            np.zeros(0)
        full[free_idx] = free_vals
        coef[i] = full[:p]
        if cuts is not None:
            cuts[i] = full[p:]
        active_sets.append(tuple(int(j) for j in range(p) if coef[i, j] != 0.0))

    weights = np.zeros(p)
    weights[list(path_idx)] = w
    weights[list(pinned)] = np.inf

    return LassoPath(
        knots=np.array([k for k, _ in raw]),
        coefficients_at_knots=coef,
        active_sets=tuple(active_sets),
        df_at_knots=np.array([len(a) for a in active_sets], dtype=np.intp),
        weights=weights,
        penalized=tuple(int(j) for j in path_idx),
        pinned=pinned,
        cutpoints_at_knots=cuts,
    )


def refit_on_support(fit: CombinedFit, support: tuple[int, ...]) -> ParamVector:
    """Unpenalized minimizer of the combined quadratic with the coefficients
    outside ``support`` constrained to zero (cutpoints always stay free)."""
    support = tuple(sorted(set(int(j) for j in support)))
    if not support:
        raise ValueError("support must be nonempty")
    theta_full = fit.theta_tilde.as_array()
    p = fit.theta_tilde.n_coef
    q = theta_full.size
    if support[0] < 0 or support[-1] >= p:
        raise DimensionMismatch("support indices out of range")
    if len(support) == p:
        return fit.theta_tilde
    keep = np.array(list(support) + list(range(p, q)), dtype=np.intp)
    Omega = fit.precision
    rhs = (Omega @ theta_full)[keep]
    sol = psd_solve(Omega[np.ix_(keep, keep)], rhs, context="refit")
    full = np.zeros(q)
    full[keep] = sol
    return ParamVector.from_array(full, q - p)


def dbic(path: LassoPath, fit: CombinedFit) -> SelectionResult:
    """Select a knot by the distributed BIC and refit its support.

    The criterion at each knot is the quadratic distance of the shrunken
    solution from the combined estimate, measured in the combined precision,
    plus ``log(N) * df / N``.  Ties are broken toward the sparser (larger
    penalty) knot.  The reported estimate is the exact unpenalized refit on
    the chosen support, which coincides with the restricted combined fit.
    """
    N = fit.total_n
    theta_full = fit.theta_tilde.as_array()
    Omega = fit.precision
    values = np.empty(path.n_knots)
    for i in range(path.n_knots):
        delta = path.theta_at_knot(i) - theta_full
        values[i] = float(delta @ Omega @ delta) + np.log(N) * path.df_at_knots[i] / N
    best = int(np.argmin(values))  # first occurrence = largest lambda0
    support = path.active_sets[best]
    p = path.n_coef
    if support:
        params = refit_on_support(fit, support)
    else:
        coef = np.zeros(p)
        if path.cutpoints_at_knots is not None:
            params = ParamVector(coef, path.cutpoints_at_knots[best])
        else:
            params = ParamVector(coef)
    return SelectionResult(
        chosen_lambda0=float(path.knots[best]),
        theta_selected=params.coefficients.copy(),
        params_selected=params,
        support=support,
        dbic_values=values,
        dbic_min=float(values[best]),
    )
