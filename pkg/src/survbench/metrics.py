"""Censoring-aware evaluation: concordance indices and nonparametric estimators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoComparablePairsError",
    "StepFunction",
    "event_table",
    "kaplan_meier",
    "nelson_aalen",
    "censoring_kaplan_meier",
    "harrell_c",
    "uno_c",
    "logrank_test",
    "write_km_csv",
]


class NoComparablePairsError(ValueError):
    """The evaluation fold has no comparable pair; its concordance is undefined."""


def _as_arrays(outcomes) -> tuple[np.ndarray, np.ndarray]:
    """Accept a list of SurvivalOutcome, a Dataset, or a ``(time, event)`` pair."""
    if hasattr(outcomes, "time") and hasattr(outcomes, "event") and not isinstance(outcomes, tuple):
        return np.asarray(outcomes.time, dtype=float), np.asarray(outcomes.event, dtype=bool)
    if isinstance(outcomes, tuple) and len(outcomes) == 2:
        return np.asarray(outcomes[0], dtype=float), np.asarray(outcomes[1], dtype=bool)
    outcomes = list(outcomes)
    return (
        np.array([o.time for o in outcomes], dtype=float),
        np.array([o.event for o in outcomes], dtype=bool),
    )


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function.

    ``f(t) = values[k]`` for the last ``k`` with ``times[k] <= t``, and
    ``initial`` before the first breakpoint.
    """

    times: np.ndarray
    values: np.ndarray
    initial: float = 0.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.times, t, side="right") - 1
        padded = np.concatenate([[self.initial], self.values])
        out = padded[k + 1]
        return float(out) if out.ndim == 0 else out


def event_table(time, event) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct event times with their event counts and at-risk counts.

    A row is at risk at ``t`` when its observed time is ``>= t``.
    """
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    uniq = np.unique(time[event])
    if uniq.size == 0:
        return uniq, np.zeros(0), np.zeros(0)
    sorted_t = np.sort(time)
    at_risk = time.size - np.searchsorted(sorted_t, uniq, side="left")
    deaths = np.bincount(np.searchsorted(uniq, time[event]), minlength=uniq.size)
    return uniq, deaths.astype(float), at_risk.astype(float)


def kaplan_meier(outcomes) -> StepFunction:
    """Product-limit estimate of the survival function.

    Rows censored at an event time stay in that time's risk set.
    """
    time, event = _as_arrays(outcomes)
    t, d, r = event_table(time, event)
    return StepFunction(t, np.cumprod((r - d) / r), initial=1.0)


def nelson_aalen(outcomes) -> StepFunction:
    time, event = _as_arrays(outcomes)
    t, d, r = event_table(time, event)
    return StepFunction(t, np.cumsum(d / r), initial=0.0)


def censoring_kaplan_meier(outcomes) -> StepFunction:
    """Kaplan-Meier estimate of the censoring survival function G(t) = P(C > t)."""
    time, event = _as_arrays(outcomes)
    return kaplan_meier((time, ~event))


def _comparable(time, event) -> np.ndarray:
    # [i, j] True when i is known to fail before j
    ti, tj = time[:, None], time[None, :]
    ei, ej = event[:, None], event[None, :]
    return ei & ((ti < tj) | ((ti == tj) & ~ej))


def _concordance_credit(risk) -> np.ndarray:
    ri, rj = risk[:, None], risk[None, :]
    return (ri > rj).astype(float) + 0.5 * (ri == rj)


def harrell_c(risks, outcomes) -> float:
    """Harrell's concordance index; higher risk should mean earlier failure.

    A pair ``(i, j)`` is comparable when ``i`` has an event and either
    ``t_i < t_j``, or ``t_i == t_j`` with ``j`` censored. Tied risks earn
    half credit.
    """
    time, event = _as_arrays(outcomes)
    risk = np.asarray(risks, dtype=float).reshape(-1)
    if risk.shape != time.shape:
        raise ValueError("one risk score per outcome is required")
    if not np.all(np.isfinite(risk)):
        raise ValueError("risk scores must be finite")
    comp = _comparable(time, event)
    n_pairs = comp.sum()
    if n_pairs == 0:
        raise NoComparablePairsError("no comparable pairs: concordance is undefined")
    return float((_concordance_credit(risk) * comp).sum() / n_pairs)


def uno_c(risks, outcomes, train_outcomes, tau: float | None = None) -> float:
    """Uno's inverse-probability-of-censoring weighted concordance.

    Comparable pairs are those of :func:`harrell_c` with ``t_i < tau``; each
    is weighted by ``1 / G(t_i)^2`` where ``G`` is the censoring survival
    function estimated on ``train_outcomes``. ``tau`` defaults to the largest
    training time.
    """
    time, event = _as_arrays(outcomes)
    tr_time, tr_event = _as_arrays(train_outcomes)
    risk = np.asarray(risks, dtype=float).reshape(-1)
    if risk.shape != time.shape:
        raise ValueError("one risk score per outcome is required")
    if not np.all(np.isfinite(risk)):
        raise ValueError("risk scores must be finite")
    if tau is None:
        tau = float(tr_time.max())
    if not tau > 0:
        raise ValueError("tau must be positive")
    g = censoring_kaplan_meier((tr_time, tr_event))
    comp = _comparable(time, event) & (time < tau)[:, None]
    rows = comp.any(axis=1)
    if not rows.any():
        raise NoComparablePairsError("no comparable pairs below tau")
    g_at = np.ones_like(time)
    g_at[rows] = g(time[rows])
    if np.any(g_at[rows] <= 0):
        bad = time[rows][g_at[rows] <= 0][0]
        raise ValueError(f"censoring survival estimate is zero at t={bad}; lower tau")
    w = np.where(rows, 1.0 / g_at**2, 0.0)[:, None] * comp
    # correctly rounded sums: the result does not depend on row order
    return math.fsum((_concordance_credit(risk) * w).ravel()) / math.fsum(w.ravel())


def logrank_test(time, event, groups) -> tuple[float, float]:
    """Two-sample log-rank chi-square statistic and its p-value (1 dof)."""
    from scipy.stats import chi2

    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    g = np.asarray(groups).astype(bool)
    t, d, r = event_table(time, event)
    _, d1, r1 = _aligned_table(time[g], event[g], t)
    expected = d * r1 / r
    with np.errstate(invalid="ignore", divide="ignore"):
        var = np.where(r > 1, d * (r1 / r) * (1 - r1 / r) * (r - d) / (r - 1), 0.0)
    stat = (d1.sum() - expected.sum()) ** 2 / var.sum()
    return float(stat), float(chi2.sf(stat, 1))


def _aligned_table(time, event, grid):
    """Event and at-risk counts of a subsample on a fixed grid of times."""
    sorted_t = np.sort(time)
    at_risk = (time.size - np.searchsorted(sorted_t, grid, side="left")).astype(float)
    ev = np.sort(time[event])
    deaths = (np.searchsorted(ev, grid, side="right") - np.searchsorted(ev, grid, side="left"))
    return grid, deaths.astype(float), at_risk


def write_km_csv(path, ds, by_group: bool = False) -> None:
    """Kaplan-Meier curves as ``group,time,survival,at_risk`` rows for plotting."""
    if by_group and ds.groups is None:
        raise ValueError("dataset has no group column")
    labels = sorted(set(ds.groups.tolist())) if by_group else [None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "time", "survival", "at_risk"])
        for lab in labels:
            sel = np.ones(ds.n, bool) if lab is None else ds.groups == lab
            t, d, r = event_table(ds.time[sel], ds.event[sel])
            s = np.cumprod((r - d) / r)
            tag = "all" if lab is None else str(lab)
            w.writerow([tag, repr(0.0), repr(1.0), int(sel.sum())])
            for ti, si, ri in zip(t, s, r):
                w.writerow([tag, repr(float(ti)), repr(float(si)), int(ri)])
