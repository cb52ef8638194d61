"""Shared data model: censored outcomes, masked covariate matrices, seeded streams."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DegenerateColumnError",
    "SurvivalOutcome",
    "Dataset",
    "SeededRng",
    "dataset_split",
    "concat_datasets",
    "column_stats",
    "read_dataset_csv",
    "write_dataset_csv",
]


class DegenerateColumnError(ValueError):
    """A column has too few observed entries (or zero spread) for the requested statistic."""


@dataclass(frozen=True)
class SurvivalOutcome:
    time: float
    event: bool

    def __post_init__(self):
        if not self.time > 0:
            raise ValueError(f"survival time must be positive, got {self.time!r}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariates with an explicit missingness mask and a censored outcome per row.

    Parameters
    ----------
    x : array of shape (n, d)
        Covariates. Cells under ``mask`` are overwritten with NaN on
        construction, so any code that reads them poisons its own output.
    mask : bool array of shape (n, d)
        True where the covariate is missing.
    time : array of shape (n,)
        Observed time ``min(T, C)``, strictly positive.
    event : bool array of shape (n,)
        True if the event was observed, False if censored.
    groups : int array of shape (n,), optional
        Ground-truth mixture labels. Kept for diagnostics only; never part of
        the feature view returned by :attr:`x`.
    """

    x: np.ndarray
    mask: np.ndarray
    time: np.ndarray
    event: np.ndarray
    groups: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1 and x.size == 0:
            x = x.reshape(0, 0)
        if x.ndim != 2:
            raise ValueError(f"x must be 2-D, got shape {x.shape}")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != x.shape:
            raise ValueError(f"mask shape {mask.shape} does not match x shape {x.shape}")
        time = np.asarray(self.time, dtype=float).reshape(-1)
        event = np.asarray(self.event, dtype=bool).reshape(-1)
        n = x.shape[0]
        if time.shape != (n,) or event.shape != (n,):
            raise ValueError("time and event must have one entry per row of x")
        if np.any(~(time > 0)):
            raise ValueError("all observed times must be positive")
        x = np.where(mask, np.nan, x)
        if np.any(~np.isfinite(x[~mask])):
            raise ValueError("observed covariates must be finite")
        groups = self.groups
        if groups is not None:
            groups = np.asarray(groups, dtype=int).reshape(-1)
            if groups.shape != (n,):
                raise ValueError("groups must have one entry per row")
            groups = _readonly(groups)
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "mask", _readonly(mask))
        object.__setattr__(self, "time", _readonly(time))
        object.__setattr__(self, "event", _readonly(event))
        object.__setattr__(self, "groups", groups)

    @classmethod
    def complete(cls, x, time, event, groups=None) -> "Dataset":
        x = np.asarray(x, dtype=float)
        return cls(x, np.zeros(x.shape, dtype=bool), time, event, groups)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def outcomes(self) -> list[SurvivalOutcome]:
        return [SurvivalOutcome(float(t), bool(e)) for t, e in zip(self.time, self.event)]

    @property
    def is_complete(self) -> bool:
        return not self.mask.any()

    def with_covariates(self, x, mask=None) -> "Dataset":
        """Same outcomes and labels, new covariate matrix (and mask)."""
        x = np.asarray(x, dtype=float)
        if mask is None:
            mask = np.zeros(x.shape, dtype=bool)
        return Dataset(x, mask, self.time, self.event, self.groups)

    def equals(self, other: "Dataset") -> bool:
        """Bitwise equality, treating masked cells as equal regardless of payload."""
        same_groups = (self.groups is None and other.groups is None) or (
            self.groups is not None
            and other.groups is not None
            and np.array_equal(self.groups, other.groups)
        )
        return (
            self.x.shape == other.x.shape
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.x[~self.mask], other.x[~other.mask])
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.event, other.event)
            and same_groups
        )


class SeededRng:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Backed by numpy's counter-based Philox generator keyed through a
    ``SeedSequence`` whose spawn key carries the stream path, so distinct
    stream ids (and children) are independent and replay bit-identically.
    """

    # named stream ids used across the package
    SIMULATION = 1
    AMPUTATION = 2
    FOLDS = 3
    MODEL = 4
    VALIDATION = 5

    def __init__(self, seed: int, stream_id: int = 0, _path: tuple[int, ...] = ()):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = (self.stream_id,) + tuple(_path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self._path)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def child(self, *ids: int) -> "SeededRng":
        """Derive an independent sub-stream, e.g. per tree or per fold."""
        return SeededRng(self.seed, self.stream_id, self._path[1:] + tuple(int(i) for i in ids))

    def random(self, size=None):
        return self.generator.random(size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def permutation(self, x):
        return self.generator.permutation(x)

    def choice(self, a, size=None, replace=True):
        return self.generator.choice(a, size=size, replace=replace)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, path={self._path})"


def dataset_split(ds: Dataset, indices: Sequence[int]) -> Dataset:
    """Row subset of ``ds`` in the given order."""
    idx = np.asarray(indices, dtype=int).reshape(-1)
    bad = idx[(idx < 0) | (idx >= ds.n)]
    if bad.size:
        raise IndexError(f"row index {int(bad[0])} out of range for dataset with {ds.n} rows")
    if np.unique(idx).size != idx.size:
        raise ValueError("row indices must be unique")
    groups = None if ds.groups is None else ds.groups[idx]
    return Dataset(ds.x[idx].reshape(idx.size, ds.d), ds.mask[idx].reshape(idx.size, ds.d),
                   ds.time[idx], ds.event[idx], groups)


def concat_datasets(parts: Iterable[Dataset]) -> Dataset:
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to concatenate")
    groups = None
    if all(p.groups is not None for p in parts):
        groups = np.concatenate([p.groups for p in parts])
    return Dataset(
        np.vstack([p.x for p in parts]),
        np.vstack([p.mask for p in parts]),
        np.concatenate([p.time for p in parts]),
        np.concatenate([p.event for p in parts]),
        groups,
    )


def column_stats(ds: Dataset, j: int) -> tuple[float, float, int]:
    """Mean, population standard deviation and count of the observed entries of column ``j``."""
    if not 0 <= j < ds.d:
        raise IndexError(f"column {j} out of range for {ds.d} columns")
    values = ds.x[~ds.mask[:, j], j]
    if values.size < 2:
        raise DegenerateColumnError(
            f"column {j} has {values.size} observed entries; at least 2 are needed"
        )
    mean = values.mean()
    # population convention (ddof=0); switch to ddof=1 for the sample sd
    sd = values.std(ddof=0)
    return float(mean), float(sd), int(values.size)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_dataset_csv(ds: Dataset, path) -> None:
    """Write ``x0..x{d-1},time,event[,group]``; missing cells are empty fields.

    Floats are written with ``repr`` (shortest round-tripping form, at most 17
    significant digits), so reading back is bit-exact.
    """
    header = [f"x{j}" for j in range(ds.d)] + ["time", "event"]
    if ds.groups is not None:
        header.append("group")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(ds.n):
            row = ["" if ds.mask[i, j] else _fmt(ds.x[i, j]) for j in range(ds.d)]
            row += [_fmt(ds.time[i]), "1" if ds.event[i] else "0"]
            if ds.groups is not None:
                row.append(str(int(ds.groups[i])))
            w.writerow(row)


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    xcols = [k for k, h in enumerate(header) if h.startswith("x")]
    try:
        it, ie = header.index("time"), header.index("event")
    except ValueError:
        raise ValueError(f"{path}: header must contain 'time' and 'event' columns") from None
    ig = header.index("group") if "group" in header else None
    n, d = len(body), len(xcols)
    x = np.zeros((n, d))
    mask = np.zeros((n, d), dtype=bool)
    time = np.empty(n)
    event = np.empty(n, dtype=bool)
    groups = np.empty(n, dtype=int) if ig is not None else None
    for i, row in enumerate(body):
        for j, k in enumerate(xcols):
            if row[k] == "":
                mask[i, j] = True
            else:
                x[i, j] = float(row[k])
        time[i] = float(row[it])
        if row[ie] not in ("0", "1"):
            raise ValueError(f"{path}: row {i + 1}: event must be 0 or 1, got {row[ie]!r}")
        event[i] = row[ie] == "1"
        if groups is not None:
            groups[i] = int(row[ig])
    return Dataset(x, mask, time, event, groups)
