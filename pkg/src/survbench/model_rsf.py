"""Random survival forest with log-rank splitting and Nelson-Aalen leaves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, SeededRng
from .metrics import nelson_aalen

__all__ = [
    "RsfConfig",
    "SurvivalTree",
    "RandomSurvivalForest",
    "logrank_split_stat",
    "rsf_fit",
    "rsf_risk",
]


@dataclass(frozen=True)
class RsfConfig:
    tree_count: int = 100
    min_split: int = 10
    min_leaf: int = 15
    mtry: int | None = None  # None -> ceil(sqrt(d))
    seed: int = 0

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("tree_count must be at least 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        if self.min_split < 2:
            raise ValueError("min_split must be at least 2")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be at least 1")


def logrank_split_stat(left, right) -> float:
    """Absolute standardized two-sample log-rank statistic.

    ``left`` and ``right`` are ``(time, event)`` array pairs. Returns 0 when
    the variance vanishes (e.g. no events).
    """
    lt, le = (np.asarray(a) for a in left)
    rt, re_ = (np.asarray(a) for a in right)
    if lt.size == 0 or rt.size == 0:
        raise ValueError("both sides of a split must be nonempty")
    time = np.concatenate([lt, rt]).astype(float)
    event = np.concatenate([le, re_]).astype(bool)
    is_left = np.arange(time.size) < lt.size
    grid = np.unique(time[event])
    if grid.size == 0:
        return 0.0
    at_risk = (time[None, :] >= grid[:, None])
    dies = (time[None, :] == grid[:, None]) & event[None, :]
    y, d = at_risk.sum(1).astype(float), dies.sum(1).astype(float)
    y1, d1 = at_risk[:, is_left].sum(1).astype(float), dies[:, is_left].sum(1).astype(float)
    return float(_logrank_from_counts(y, d, y1[None, :], d1[None, :])[0])


def _logrank_from_counts(y, d, y1, d1) -> np.ndarray:
    """Vectorised statistic; ``y, d`` per time, ``y1, d1`` per (candidate, time)."""
    num = (d1 - y1 * d / y).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = y1 / y
        tie = np.where(y > 1, (y - d) / (y - 1), 0.0)
        var = (frac * (1 - frac) * tie * d).sum(axis=-1)
        stat = np.abs(num) / np.sqrt(var)
    return np.where(var > 1e-12, stat, 0.0)


class SurvivalTree:
    """Binary tree in flat arrays; leaves carry a cumulative hazard on a time grid."""

    def __init__(self, grid: np.ndarray):
        self.grid = grid
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.n_samples: list[int] = []
        self.chf: list[np.ndarray | None] = []
        self.bootstrap_indices = np.zeros(0, dtype=int)

    def _add(self, n):
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.n_samples.append(n)
        self.chf.append(None)
        return len(self.feature) - 1

    def finalize(self):
        self.feature = np.asarray(self.feature, dtype=int)
        self.threshold = np.asarray(self.threshold, dtype=float)
        self.left = np.asarray(self.left, dtype=int)
        self.right = np.asarray(self.right, dtype=int)
        self.n_samples = np.asarray(self.n_samples, dtype=int)
        self.leaf_ids = np.flatnonzero(self.feature < 0)
        self.leaf_chf = np.zeros((len(self.feature), self.grid.size))
        for k in self.leaf_ids:
            self.leaf_chf[k] = self.chf[k]

    def apply(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            f = self.feature[node[idx]]
            go_left = x[idx, f] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
            active = self.feature[node] >= 0
        return node

    @property
    def leaf_sizes(self) -> np.ndarray:
        return self.n_samples[self.leaf_ids]

    @property
    def internal_sizes(self) -> np.ndarray:
        return self.n_samples[self.feature >= 0]


def _best_split(x, time, event, features, min_leaf):
    """Exhaustive midpoint search; returns (stat, feature, threshold) or None."""
    m = time.size
    grid = np.unique(time[event])
    at_risk = time[:, None] >= grid[None, :]
    dies = (time[:, None] == grid[None, :]) & event[:, None]
    y = at_risk.sum(0).astype(float)
    d = dies.sum(0).astype(float)
    best = None
    for f in sorted(features):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        # candidate cut after position s-1 (left = first s rows) where values change
        s = np.arange(min_leaf, m - min_leaf + 1)
        s = s[xs[s - 1] < xs[np.minimum(s, m - 1)]] if s.size else s
        if s.size == 0:
            continue
        y1 = np.cumsum(at_risk[order], axis=0)[s - 1].astype(float)
        d1 = np.cumsum(dies[order], axis=0)[s - 1].astype(float)
        stats = _logrank_from_counts(y, d, y1, d1)
        k = int(np.argmax(stats))  # first maximum -> lowest threshold
        thr = 0.5 * (xs[s[k] - 1] + xs[s[k]])
        if stats[k] > 0 and (best is None or stats[k] > best[0]):
            best = (float(stats[k]), f, thr)
    return best


def _grow(x, time, event, cfg: RsfConfig, mtry: int, rng: SeededRng, grid: np.ndarray) -> SurvivalTree:
    tree = SurvivalTree(grid)
    stack = [(np.arange(time.size), tree._add(time.size))]
    d = x.shape[1]
    while stack:
        rows, node = stack.pop()
        split = None
        if rows.size >= cfg.min_split and rows.size >= 2 * cfg.min_leaf and event[rows].any():
            features = rng.choice(d, size=mtry, replace=False)
            split = _best_split(x[rows], time[rows], event[rows], features, cfg.min_leaf)
        if split is None:
            tree.chf[node] = nelson_aalen((time[rows], event[rows]))(grid)
            continue
        _, f, thr = split
        go_left = x[rows, f] <= thr
        lnode, rnode = tree._add(int(go_left.sum())), tree._add(int((~go_left).sum()))
        tree.feature[node], tree.threshold[node] = int(f), float(thr)
        tree.left[node], tree.right[node] = lnode, rnode
        stack.append((rows[~go_left], rnode))
        stack.append((rows[go_left], lnode))
    tree.finalize()
    return tree


class RandomSurvivalForest:
    """Bagged log-rank survival trees.

    The risk score of a row is the ensemble cumulative hazard summed over the
    distinct training event times.
    """

    def __init__(self, cfg: RsfConfig | None = None):
        self.cfg = cfg or RsfConfig()
        self.trees: list[SurvivalTree] = []

    def fit(self, train: Dataset) -> "RandomSurvivalForest":
        if not train.is_complete:
            raise ValueError("the forest requires a dataset without missing covariates")
        if not train.event.any():
            raise ValueError("cannot grow survival trees without any observed event")
        cfg = self.cfg
        if train.n < 2 * cfg.min_leaf:
            raise ValueError(f"need at least {2 * cfg.min_leaf} rows, got {train.n}")
        x, time, event = np.asarray(train.x), train.time, train.event
        self.n_features_ = train.d
        mtry = cfg.mtry or math.ceil(math.sqrt(train.d))
        self.mtry_ = min(mtry, train.d)
        self.grid_ = np.unique(time[event])
        root = SeededRng(cfg.seed, SeededRng.MODEL)
        self.trees = []
        for b in range(cfg.tree_count):
            rng = root.child(b)
            boot = rng.integers(0, train.n, size=train.n)
            tree = _grow(x[boot], time[boot], event[boot], cfg, self.mtry_, rng, self.grid_)
            tree.bootstrap_indices = boot
            self.trees.append(tree)
        return self

    def cumulative_hazard(self, x) -> np.ndarray:
        """Ensemble cumulative hazard of each row on the training event-time grid."""
        x = self._check_x(x)
        total = np.zeros((x.shape[0], self.grid_.size))
        for tree in self.trees:
            total += tree.leaf_chf[tree.apply(x)]
        return total / len(self.trees)

    def risk(self, x) -> np.ndarray:
        return self.cumulative_hazard(x).sum(axis=1)

    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.n_features_:
            raise ValueError(f"expected {self.n_features_} covariates, got {x.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariates must be finite")
        return x


def rsf_fit(train: Dataset, cfg: RsfConfig | None = None) -> RandomSurvivalForest:
    return RandomSurvivalForest(cfg).fit(train)


def rsf_risk(forest: RandomSurvivalForest, x) -> np.ndarray | float:
    out = forest.risk(x)
    return float(out[0]) if np.ndim(x) == 1 else out
