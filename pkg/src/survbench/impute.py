"""Imputers fitted on training rows only and applied to any fold.

All imputers share the ``fit(train) -> self`` / ``transform(ds) -> Dataset``
protocol. ``transform`` never touches observed cells and returns a dataset
with an all-false mask.
"""

from __future__ import annotations

import logging

import numpy as np

from .core import Dataset

__all__ = [
    "NotFittedError",
    "Imputer",
    "MedianImputer",
    "KNNImputer",
    "IterativeImputer",
    "make_imputer",
    "iterative_cycle",
]

log = logging.getLogger(__name__)


class NotFittedError(RuntimeError):
    pass


class Imputer:
    strategy = "base"

    def __init__(self):
        self._fitted = False

    def fit(self, train: Dataset) -> "Imputer":
        raise NotImplementedError

    def transform(self, ds: Dataset) -> Dataset:
        raise NotImplementedError

    def fit_transform(self, train: Dataset) -> Dataset:
        return self.fit(train).transform(train)

    def state(self) -> dict:
        """Fitted parameters as plain arrays (used by leakage checks)."""
        raise NotImplementedError

    def _check(self, ds: Dataset):
        if not self._fitted:
            raise NotFittedError(f"{type(self).__name__} must be fitted before transform")
        if ds.d != self.n_features_:
            raise ValueError(f"expected {self.n_features_} columns, got {ds.d}")

    @staticmethod
    def _check_columns(train: Dataset):
        if train.n == 0:
            raise ValueError("cannot fit an imputer on an empty dataset")
        empty = np.flatnonzero(train.mask.all(axis=0))
        if empty.size:
            raise ValueError(f"column {int(empty[0])} has no observed training entry")


class MedianImputer(Imputer):
    strategy = "median"

    def fit(self, train):
        self._check_columns(train)
        self.n_features_, self.n_train_ = train.d, train.n
        self.medians_ = np.array(
            [np.median(train.x[~train.mask[:, j], j]) for j in range(train.d)]
        )
        self._fitted = True
        return self

    def transform(self, ds):
        self._check(ds)
        filled = np.where(ds.mask, self.medians_[None, :], ds.x)
        return ds.with_covariates(filled)

    def state(self):
        return {"medians": self.medians_.copy()}


class KNNImputer(Imputer):
    """Fill a cell with the mean of its column over the ``k`` nearest training donors.

    Distance between two rows is Euclidean over the coordinates observed in
    both, scaled by ``sqrt(d / n_shared)``. Donors for column ``j`` are the
    training rows with ``j`` observed. With ``standardize`` the distance is
    computed on columns centred and scaled by training mean and sd (the
    imputed value itself stays on the original scale). Equal distances go to
    the lower training index.
    """

    strategy = "knn"

    def __init__(self, k: int = 10, standardize: bool = True):
        super().__init__()
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = k
        self.standardize = standardize

    def fit(self, train):
        self._check_columns(train)
        self.n_features_, self.n_train_ = train.d, train.n
        self.train_x_ = train.x.copy()
        self.train_mask_ = train.mask.copy()
        self.col_means_ = np.array(
            [train.x[~train.mask[:, j], j].mean() for j in range(train.d)]
        )
        if self.standardize:
            sd = np.array([train.x[~train.mask[:, j], j].std() for j in range(train.d)])
            self.scale_ = np.where(sd > 0, sd, 1.0)
        else:
            self.scale_ = np.ones(train.d)
        self._fitted = True
        return self

    def _scaled(self, x, mask):
        return np.where(mask, 0.0, (np.where(mask, 0.0, x) - self.col_means_) / self.scale_)

    def distances(self, x, mask) -> np.ndarray:
        """Partial distances from each query row to every training row (inf if nothing shared)."""
        q = self._scaled(x, mask)
        r = self._scaled(self.train_x_, self.train_mask_)
        qo = (~mask).astype(float)
        ro = (~self.train_mask_).astype(float)
        shared = qo @ ro.T
        # sum over shared coords of (q - r)^2, expanded to keep it matrix-only
        sq = (q**2) @ ro.T + qo @ (r**2).T - 2.0 * q @ r.T
        sq = np.maximum(sq, 0.0)
        d = self.n_features_
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.sqrt(sq * d / shared)
        dist[shared == 0] = np.inf
        return dist

    def transform(self, ds):
        self._check(ds)
        out = np.where(ds.mask, 0.0, ds.x)
        rows = np.flatnonzero(ds.mask.any(axis=1))
        if rows.size == 0:
            return ds.with_covariates(out)
        dist = self.distances(ds.x[rows], ds.mask[rows])
        fallback = 0
        for a, i in enumerate(rows):
            for j in np.flatnonzero(ds.mask[i]):
                donors = np.flatnonzero(~self.train_mask_[:, j] & np.isfinite(dist[a]))
                if donors.size == 0:
                    out[i, j] = self.col_means_[j]
                    fallback += 1
                    continue
                order = np.argsort(dist[a, donors], kind="stable")[: self.k]
                out[i, j] = self.train_x_[donors[order], j].mean()
        if fallback:
            log.warning("%d cells had no donor sharing a coordinate; filled with column means", fallback)
        return ds.with_covariates(out)

    def state(self):
        return {"train_x": np.where(self.train_mask_, 0.0, self.train_x_),
                "train_mask": self.train_mask_.copy(), "means": self.col_means_.copy(),
                "scale": self.scale_.copy()}


def _ridge(z: np.ndarray, y: np.ndarray, alpha: float) -> tuple[float, np.ndarray]:
    """Intercept and slopes of a ridge fit; the intercept is not penalised."""
    zm, ym = z.mean(axis=0), y.mean()
    zc = z - zm
    gram = zc.T @ zc + alpha * np.eye(z.shape[1])
    try:
        coef = np.linalg.solve(gram, zc.T @ (y - ym))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular ridge normal equations") from exc
    return ym - zm @ coef, coef


def iterative_cycle(filled: np.ndarray, mask: np.ndarray, alpha: float):
    """One round-robin sweep of chained ridge regressions.

    For each column in turn, regress its observed entries on the current
    values of all other columns and overwrite its missing entries with the
    predictions. Returns the updated matrix and the per-column
    ``(intercept, slopes)`` fitted during the sweep.
    """
    filled = filled.copy()
    n, d = filled.shape
    coefs = []
    for j in range(d):
        others = np.delete(np.arange(d), j)
        obs = ~mask[:, j]
        if obs.sum() == 0:
            raise ValueError(f"column {j} has no observed entry")
        b0, b = _ridge(filled[obs][:, others], filled[obs, j], alpha)
        coefs.append((b0, b))
        miss = mask[:, j]
        if miss.any():
            filled[miss, j] = b0 + filled[miss][:, others] @ b
    return filled, coefs


class IterativeImputer(Imputer):
    """Chained-equation imputation with ridge regressions.

    ``fit`` mean-initialises the training matrix and runs up to ``max_iter``
    sweeps of :func:`iterative_cycle`, stopping once the largest change in an
    imputed value is at most ``tol`` times the range of observed training
    values. ``transform`` mean-initialises the new rows and replays every
    training sweep with its frozen coefficients, so new rows follow the
    same trajectory as the training rows. ``single_pass=True`` applies only
    the last sweep's coefficients once.
    """

    strategy = "iterative"

    def __init__(self, max_iter: int = 30, tol: float = 1e-2, ridge_alpha: float = 1e-3,
                 single_pass: bool = False):
        super().__init__()
        if max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        self.max_iter = max_iter
        self.tol = tol
        self.ridge_alpha = ridge_alpha
        self.single_pass = single_pass

    def fit(self, train):
        self._check_columns(train)
        self.n_features_, self.n_train_ = train.d, train.n
        mask = train.mask
        self.means_ = np.array([train.x[~mask[:, j], j].mean() for j in range(train.d)])
        filled = np.where(mask, self.means_[None, :], train.x)
        observed = train.x[~mask]
        threshold = self.tol * (observed.max() - observed.min())
        self.n_iter_ = 0
        self.converged_ = False
        self.sweeps_ = []
        for it in range(1, self.max_iter + 1):
            new, coefs = iterative_cycle(filled, mask, self.ridge_alpha)
            self.sweeps_.append(coefs)
            change = np.max(np.abs(new - filled)[mask]) if mask.any() else 0.0
            filled = new
            self.n_iter_ = it
            if change <= threshold:
                self.converged_ = True
                break
        if not self.converged_:
            log.warning("iterative imputer stopped after %d sweeps without reaching tol", self.max_iter)
        self.coefs_ = coefs
        self.train_filled_ = filled
        self._fitted = True
        return self

    def transform(self, ds):
        self._check(ds)
        mask = ds.mask
        filled = np.where(mask, self.means_[None, :], ds.x)
        d = ds.d
        sweeps = [self.coefs_] if self.single_pass else self.sweeps_
        for coefs in sweeps:
            for j in range(d):
                miss = mask[:, j]
                if miss.any():
                    others = np.delete(np.arange(d), j)
                    b0, b = coefs[j]
                    filled[miss, j] = b0 + filled[miss][:, others] @ b
        return ds.with_covariates(filled)

    def state(self):
        out = {"means": self.means_.copy()}
        for k, coefs in enumerate(self.sweeps_):
            for j, (b0, b) in enumerate(coefs):
                out[f"sweep{k}_coef{j}"] = np.concatenate([[b0], b])
        return out


def make_imputer(strategy: str, **kwargs) -> Imputer:
    """Build an imputer by name: ``median``, ``knn`` or ``iterative``."""
    table = {"median": MedianImputer, "knn": KNNImputer, "iterative": IterativeImputer}
    try:
        cls = table[strategy]
    except KeyError:
        raise ValueError(f"unknown imputation strategy {strategy!r}") from None
    return cls(**kwargs)
