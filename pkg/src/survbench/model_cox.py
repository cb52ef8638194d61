"""Cox proportional hazards fitted by Newton-Raphson on the Breslow partial likelihood."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .core import Dataset
from .metrics import StepFunction

__all__ = [
    "CoxModel",
    "CoxConvergenceWarning",
    "cox_partial_loglik",
    "cox_fit",
    "cox_risk",
    "breslow_baseline",
]

log = logging.getLogger(__name__)

SCORE_TOL = 1e-6
LOGLIK_TOL = 1e-9
MAX_ITER = 100
FALLBACK_PENALTY = 0.1


class CoxConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class CoxModel:
    beta: np.ndarray
    baseline: StepFunction
    penalty: float
    converged: bool
    n_iterations: int

    def risk(self, x) -> np.ndarray:
        return cox_risk(self, x)


def _tie_groups(time_sorted):
    """For times sorted descending, index of the last row of each tie block per row."""
    n = time_sorted.size
    last = np.empty(n, dtype=int)
    # blocks of equal times; the risk set of a row ends at the block's last row
    boundaries = np.flatnonzero(np.diff(time_sorted) != 0)
    ends = np.append(boundaries, n - 1)
    starts = np.insert(boundaries + 1, 0, 0)
    for s, e in zip(starts, ends):
        last[s : e + 1] = e
    return last


class _Prepared:
    """Rows sorted by descending time with risk-set bookkeeping for Breslow ties."""

    def __init__(self, x, time, event):
        order = np.argsort(-time, kind="stable")
        self.x = x[order]
        self.time = time[order]
        self.event = event[order]
        self.last = _tie_groups(self.time)
        # one representative row per distinct event time: the last row of its block
        ev_blocks = np.unique(self.last[self.event])
        self.block_end = ev_blocks
        self.block_deaths = np.bincount(self.last[self.event], minlength=x.shape[0])[ev_blocks]
        self.xsum_events = self.x[self.event].sum(axis=0)

    def evaluate(self, beta, penalty, need_hessian=True):
        eta = self.x @ beta
        shift = eta.max() if eta.size else 0.0
        w = np.exp(eta - shift)
        s0 = np.cumsum(w)[self.block_end]
        s1 = np.cumsum(w[:, None] * self.x, axis=0)[self.block_end]
        dk = self.block_deaths
        loglik = eta[self.event].sum() - np.sum(dk * (np.log(s0) + shift))
        loglik -= 0.5 * penalty * beta @ beta
        mean = s1 / s0[:, None]
        score = self.xsum_events - (dk[:, None] * mean).sum(axis=0) - penalty * beta
        if not need_hessian:
            return loglik, score, None
        xx = self.x[:, :, None] * self.x[:, None, :]
        s2 = np.cumsum(w[:, None, None] * xx, axis=0)[self.block_end]
        cov = s2 / s0[:, None, None] - mean[:, :, None] * mean[:, None, :]
        info = (dk[:, None, None] * cov).sum(axis=0) + penalty * np.eye(beta.size)
        return loglik, score, info


def cox_partial_loglik(beta, x, time, event, penalty: float = 0.0) -> float:
    """Breslow log partial likelihood minus ``penalty/2 * ||beta||^2``."""
    x = np.asarray(x, dtype=float).reshape(len(time), -1)
    prep = _Prepared(x, np.asarray(time, float), np.asarray(event, bool))
    return float(prep.evaluate(np.atleast_1d(np.asarray(beta, float)), penalty, False)[0])


def _newton(prep: _Prepared, d: int, penalty: float):
    beta = np.zeros(d)
    loglik, score, info = prep.evaluate(beta, penalty)
    history = [loglik]
    for it in range(1, MAX_ITER + 1):
        if np.max(np.abs(score), initial=0.0) < SCORE_TOL:
            return beta, True, it - 1, history
        # raises LinAlgError when the information matrix is not positive definite
        step = cho_solve(cho_factor(info), score)
        scale = 1.0
        while True:
            cand = beta + scale * step
            new_ll, new_score, new_info = prep.evaluate(cand, penalty)
            if np.isfinite(new_ll) and new_ll >= loglik - 1e-12:
                break
            scale *= 0.5
            if scale < 1e-10:
                # no ascent available at machine precision
                return beta, np.max(np.abs(score)) < SCORE_TOL, it, history
        delta = new_ll - loglik
        beta, loglik, score, info = cand, new_ll, new_score, new_info
        history.append(loglik)
        if not np.all(np.isfinite(beta)):
            raise FloatingPointError("Cox coefficients diverged to non-finite values")
        # a flat objective only counts as convergence once the score is small too
        if abs(delta) < LOGLIK_TOL and np.max(np.abs(score)) < SCORE_TOL:
            return beta, True, it, history
    return beta, np.max(np.abs(score)) < SCORE_TOL, MAX_ITER, history


def cox_fit(train: Dataset, penalty: float = 0.0) -> CoxModel:
    """Maximise the (optionally ridge-penalised) Breslow partial likelihood.

    Starts at ``beta = 0`` and takes Newton steps with step halving so the
    objective never decreases. If the information matrix cannot be factored
    at ``penalty == 0`` the fit restarts once with ``penalty = 0.1``.
    """
    if not train.is_complete:
        raise ValueError("cox_fit requires a dataset without missing covariates")
    if not train.event.any():
        raise ValueError("cox_fit requires at least one observed event")
    x = np.asarray(train.x, dtype=float)
    # centring leaves beta unchanged and keeps exp() well scaled
    prep = _Prepared(x - x.mean(axis=0), train.time, train.event)
    try:
        beta, converged, n_iter, _ = _newton(prep, train.d, penalty)
    except LinAlgError:
        if penalty != 0:
            raise
        log.info("information matrix not positive definite; refitting with penalty %s", FALLBACK_PENALTY)
        penalty = FALLBACK_PENALTY
        beta, converged, n_iter, _ = _newton(prep, train.d, penalty)
    if not converged:
        warnings.warn(
            f"Cox Newton-Raphson did not converge in {MAX_ITER} iterations",
            CoxConvergenceWarning,
            stacklevel=2,
        )
    baseline = _breslow(beta, x, train.time, train.event)
    return CoxModel(beta=beta, baseline=baseline, penalty=penalty,
                    converged=bool(converged), n_iterations=n_iter)


def cox_risk(model: CoxModel, x) -> np.ndarray | float:
    """Linear predictor ``beta . x``; larger means shorter expected survival."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.beta.size:
        raise ValueError(f"expected {model.beta.size} covariates, got {x.shape[-1]}")
    out = x @ model.beta
    return float(out) if np.ndim(out) == 0 else out


def _breslow(beta, x, time, event) -> StepFunction:
    uniq = np.unique(time[event])
    if uniq.size == 0:
        return StepFunction(np.zeros(0), np.zeros(0), initial=0.0)
    eta = x @ beta
    order = np.argsort(time, kind="stable")
    t_sorted = time[order]
    # log of the risk-set sums, stable for extreme linear predictors
    log_tail = np.logaddexp.accumulate(eta[order][::-1])[::-1]
    log_denom = log_tail[np.searchsorted(t_sorted, uniq, side="left")]
    deaths = np.bincount(np.searchsorted(uniq, time[event]), minlength=uniq.size)
    # a risk set whose sum underflows has an infinite hazard increment
    with np.errstate(over="ignore"):
        increments = deaths * np.exp(-log_denom)
    return StepFunction(uniq, np.cumsum(increments), initial=0.0)


def breslow_baseline(model_or_beta, train: Dataset) -> StepFunction:
    """Breslow estimate of the cumulative baseline hazard for coefficients ``beta``."""
    beta = getattr(model_or_beta, "beta", model_or_beta)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    return _breslow(beta, np.asarray(train.x, float), train.time, train.event)
