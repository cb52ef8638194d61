"""Amputation: MCAR and self-masking (MNAR) missingness on covariates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, DegenerateColumnError, SeededRng, column_stats

__all__ = [
    "AmputationSpec",
    "ampute_mcar",
    "ampute_self_masking",
    "ampute",
    "missing_fraction",
]


@dataclass(frozen=True)
class AmputationSpec:
    mechanism: str  # "mcar" or "selfmask"
    p: float | None = None
    tau: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mechanism == "mcar":
            if self.p is None or self.tau is not None:
                raise ValueError("MCAR takes p and no tau")
            if not 0.0 <= self.p <= 1.0:
                raise ValueError(f"p must be in [0, 1], got {self.p}")
        elif self.mechanism == "selfmask":
            if self.tau is None or self.p is not None:
                raise ValueError("self-masking takes tau and no p")
            if not self.tau > 0:
                raise ValueError(f"tau must be positive, got {self.tau}")
        else:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")

    @property
    def rate_param(self) -> float:
        return self.p if self.mechanism == "mcar" else self.tau


def ampute_mcar(ds: Dataset, p: float, rng: SeededRng) -> Dataset:
    """Mask every observed covariate cell independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    drop = rng.random(ds.x.shape) < p
    return ds.with_covariates(ds.x, ds.mask | drop)


def ampute_self_masking(ds: Dataset, tau: float) -> Dataset:
    """Mask cells lying more than ``tau`` standard deviations from their column mean.

    Column mean and (population) sd come from the currently observed entries
    of ``ds``; no randomness is involved.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    drop = np.zeros(ds.x.shape, dtype=bool)
    for j in range(ds.d):
        mean, sd, _ = column_stats(ds, j)
        if sd == 0:
            raise DegenerateColumnError(f"column {j} has zero standard deviation")
        obs = ~ds.mask[:, j]
        drop[obs, j] = np.abs(ds.x[obs, j] - mean) > tau * sd
    return ds.with_covariates(ds.x, ds.mask | drop)


def ampute(ds: Dataset, spec: AmputationSpec) -> Dataset:
    if spec.mechanism == "mcar":
        return ampute_mcar(ds, spec.p, SeededRng(spec.seed, SeededRng.AMPUTATION))
    return ampute_self_masking(ds, spec.tau)


def missing_fraction(ds: Dataset) -> float:
    if ds.mask.size == 0:
        raise ValueError("missing fraction of an empty dataset is undefined")
    return float(ds.mask.mean())
