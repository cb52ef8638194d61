"""Cross-validated grid of {missingness scenario x imputer x learner}.

Amputation is applied once to the full simulated cohort; every fold then fits
its imputer on training rows only, fits the learner, and scores the held-out
rows with Harrell's and Uno's concordance.
"""

from __future__ import annotations

import csv
import logging
import math
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np

from .core import Dataset, SeededRng, dataset_split
from .impute import make_imputer
from .metrics import harrell_c, uno_c
from .missingness import AmputationSpec, ampute, missing_fraction
from .model_cox import cox_fit
from .model_neural import MlpConfig, train as train_mlp
from .model_rsf import RsfConfig, rsf_fit
from .simulate import SimConfig, generate_dataset

__all__ = [
    "BASELINE",
    "RESULT_COLUMNS",
    "BenchConfig",
    "ScenarioResult",
    "Cell",
    "kfold_indices",
    "fit_model",
    "grid_cells",
    "run_scenario",
    "run_grid",
    "summarize",
    "write_results_csv",
    "read_results_csv",
    "write_summary_csv",
    "write_plot_data_csv",
    "load_bench_config",
]

log = logging.getLogger(__name__)

BASELINE = "none"
MODELS = ("cox", "rsf", "mlp_cox")
IMPUTERS = ("median", "iterative", "knn", "neumiss")
RESULT_COLUMNS = (
    "mechanism", "rate_param", "imputer", "model", "fold",
    "c_harrell", "c_uno", "fit_seconds", "achieved_missing_fraction", "error",
)


@dataclass(frozen=True)
class BenchConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    scenarios: tuple[AmputationSpec, ...] = (
        AmputationSpec("mcar", p=0.4), AmputationSpec("mcar", p=0.6), AmputationSpec("mcar", p=0.8),
        AmputationSpec("selfmask", tau=0.62), AmputationSpec("selfmask", tau=0.82),
        AmputationSpec("selfmask", tau=1.03),
    )
    imputers: tuple[str, ...] = IMPUTERS
    models: tuple[str, ...] = MODELS
    folds: int = 5
    val_fraction: float = 0.2
    metric: str = "both"
    seed: int = 0
    include_baseline: bool = True
    rsf: RsfConfig = field(default_factory=RsfConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    neumiss_depth: int = 30
    knn_k: int = 10
    knn_standardize: bool = True
    iterative_max_iter: int = 30
    iterative_tol: float = 1e-2
    ridge_alpha: float = 1e-3
    strict_validation: bool = False
    record_timing: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie strictly between 0 and 1")
        if self.metric not in ("harrell", "uno", "both"):
            raise ValueError("metric must be 'harrell', 'uno' or 'both'")
        for m in self.models:
            if m not in MODELS:
                raise ValueError(f"unknown model {m!r}")
        for s in self.imputers:
            if s not in IMPUTERS:
                raise ValueError(f"unknown imputation strategy {s!r}")


@dataclass(frozen=True)
class Cell:
    mechanism: str
    rate_param: float
    imputer: str
    model: str

    def __post_init__(self):
        if self.imputer == "neumiss" and self.model != "mlp_cox":
            raise ValueError("the neumiss strategy only pairs with the mlp_cox model")


@dataclass(frozen=True)
class ScenarioResult:
    mechanism: str
    rate_param: float
    imputer: str
    model: str
    fold: int
    c_harrell: float
    c_uno: float
    fit_seconds: float
    achieved_missing_fraction: float
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def kfold_indices(n: int, folds: int, rng: SeededRng) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled partition into ``folds`` contiguous test blocks.

    The first ``n % folds`` blocks get one extra row.
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if n < folds:
        raise ValueError(f"cannot split {n} rows into {folds} folds")
    perm = rng.permutation(n)
    sizes = np.full(folds, n // folds)
    sizes[: n % folds] += 1
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    out = []
    for k in range(folds):
        test = np.sort(perm[bounds[k] : bounds[k + 1]])
        train = np.sort(np.concatenate([perm[: bounds[k]], perm[bounds[k + 1] :]]))
        out.append((train, test))
    return out


class _FittedModel:
    def __init__(self, scorer):
        self._scorer = scorer

    def risk(self, ds: Dataset) -> np.ndarray:
        return self._scorer(ds)


def fit_model(name: str, train: Dataset, val: Dataset | None, cfg: BenchConfig, seed: int,
              neumiss: bool = False):
    """Fit one learner; the returned object scores a Dataset via ``risk(ds)``."""
    if name == "cox":
        model = cox_fit(train)
        return _FittedModel(lambda ds: model.risk(ds.x))
    if name == "rsf":
        forest = rsf_fit(train, replace(cfg.rsf, seed=seed))
        return _FittedModel(lambda ds: forest.risk(ds.x))
    if name == "mlp_cox":
        mcfg = replace(cfg.mlp, seed=seed, neumiss_depth=cfg.neumiss_depth if neumiss else None)
        net = train_mlp(train, val, mcfg)
        return _FittedModel(lambda ds: net.risk(ds.x, ds.mask))
    raise ValueError(f"unknown model {name!r}")


def _imputer_kwargs(cfg: BenchConfig, strategy: str) -> dict:
    if strategy == "knn":
        return {"k": cfg.knn_k, "standardize": cfg.knn_standardize}
    if strategy == "iterative":
        return {"max_iter": cfg.iterative_max_iter, "tol": cfg.iterative_tol,
                "ridge_alpha": cfg.ridge_alpha}
    return {}


def _fold_seed(cfg: BenchConfig, fold: int) -> int:
    return int(SeededRng(cfg.seed, SeededRng.MODEL).child(fold).integers(0, 2**62))


def run_scenario(
    cfg: BenchConfig,
    data: Dataset,
    cell: Cell,
    folds: list | None = None,
    model_factory: Callable | None = None,
    perturb_test: Callable | None = None,
    inspect_imputer: Callable | None = None,
) -> list[ScenarioResult]:
    """Cross-validate one cell on an already amputed dataset.

    ``model_factory(train, val, fold) -> model with risk(ds)`` substitutes the
    learner (test doubles). ``perturb_test(fold, test) -> Dataset`` rewrites a
    fold's test rows after splitting, and ``inspect_imputer(fold, imputer)``
    receives every fitted imputer; both exist for leakage audits.
    """
    if folds is None:
        folds = kfold_indices(data.n, cfg.folds, SeededRng(cfg.seed, SeededRng.FOLDS))
    achieved = missing_fraction(data) if data.mask.size else 0.0
    needs_val = cell.model == "mlp_cox"
    results = []
    for k, (train_idx, test_idx) in enumerate(folds):
        t0 = _time.perf_counter()
        c_h = c_u = math.nan
        error = ""
        try:
            if np.intersect1d(train_idx, test_idx).size:
                raise RuntimeError("train and test rows overlap")
            train = dataset_split(data, train_idx)
            test = dataset_split(data, test_idx)
            if perturb_test is not None:
                test = perturb_test(k, test)
            fit_rows = np.arange(train.n)
            val_rows = np.zeros(0, dtype=int)
            if needs_val:
                perm = SeededRng(cfg.seed, SeededRng.VALIDATION).child(k).permutation(train.n)
                n_val = max(1, int(round(cfg.val_fraction * train.n)))
                val_rows, fit_rows = np.sort(perm[:n_val]), np.sort(perm[n_val:])
            if cell.imputer in (BASELINE, "neumiss"):
                train_c, test_c = train, test
            else:
                imputer = make_imputer(cell.imputer, **_imputer_kwargs(cfg, cell.imputer))
                imputer.fit(dataset_split(train, fit_rows) if cfg.strict_validation else train)
                if inspect_imputer is not None:
                    inspect_imputer(k, imputer)
                train_c, test_c = imputer.transform(train), imputer.transform(test)
            fit_part = dataset_split(train_c, fit_rows)
            val_part = dataset_split(train_c, val_rows) if needs_val else None
            seed = _fold_seed(cfg, k)
            if model_factory is not None:
                model = model_factory(fit_part, val_part, k)
            else:
                model = fit_model(cell.model, fit_part, val_part, cfg, seed,
                                  neumiss=cell.imputer == "neumiss")
            risk = np.asarray(model.risk(test_c), dtype=float)
            if cfg.metric in ("harrell", "both"):
                c_h = harrell_c(risk, test)
            if cfg.metric in ("uno", "both"):
                c_u = uno_c(risk, test, train, tau=float(train.time.max()))
        except Exception as exc:  # a failing fold must not abort the grid
            log.warning("%s fold %d failed: %s", cell, k, exc)
            error = f"{type(exc).__name__}: {exc}"
        elapsed = _time.perf_counter() - t0 if cfg.record_timing else math.nan
        results.append(ScenarioResult(cell.mechanism, cell.rate_param, cell.imputer, cell.model,
                                      k, c_h, c_u, elapsed, achieved, error))
    return results


def grid_cells(cfg: BenchConfig) -> list[tuple[AmputationSpec | None, Cell]]:
    cells = []
    if cfg.include_baseline:
        for m in cfg.models:
            cells.append((None, Cell(BASELINE, 0.0, BASELINE, m)))
    for spec in cfg.scenarios:
        for imp in cfg.imputers:
            for m in cfg.models:
                if imp == "neumiss" and m != "mlp_cox":
                    continue
                cells.append((spec, Cell(spec.mechanism, spec.rate_param, imp, m)))
    return cells


def _run_cell(args):
    cfg, data, cell, folds = args
    return run_scenario(cfg, data, cell, folds)


def run_grid(cfg: BenchConfig, workers: int = 1, data: Dataset | None = None) -> list[ScenarioResult]:
    """Run every cell of the grid; results come back in (cell, fold) order."""
    if data is None:
        data = generate_dataset(cfg.sim)
    folds = kfold_indices(data.n, cfg.folds, SeededRng(cfg.seed, SeededRng.FOLDS))
    amputed = {}
    jobs = []
    for spec, cell in grid_cells(cfg):
        if spec is None:
            cell_data = data
        else:
            key = (spec.mechanism, spec.rate_param)
            if key not in amputed:
                amputed[key] = ampute(data, replace(spec, seed=cfg.seed))
            cell_data = amputed[key]
        jobs.append((cfg, cell_data, cell, folds))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell, jobs))
    else:
        chunks = [_run_cell(j) for j in jobs]
    return [r for chunk in chunks for r in chunk]


# ---------------------------------------------------------------- persistence


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_results_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in results:
            w.writerow([_fmt(getattr(r, c)) for c in RESULT_COLUMNS])


def read_results_csv(path) -> list[ScenarioResult]:
    def num(s):
        return math.nan if s == "" else float(s)

    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ScenarioResult(
                row["mechanism"], float(row["rate_param"]), row["imputer"], row["model"],
                int(row["fold"]), num(row["c_harrell"]), num(row["c_uno"]),
                num(row["fit_seconds"]), num(row["achieved_missing_fraction"]), row["error"],
            ))
    return out


def summarize(results) -> list[dict]:
    """Median, min and max of each metric per cell, over successful folds."""
    cells: dict[tuple, list[ScenarioResult]] = {}
    for r in results:
        cells.setdefault((r.mechanism, r.rate_param, r.imputer, r.model), []).append(r)
    rows = []
    for key, rs in cells.items():
        ok = [r for r in rs if r.ok]
        row = dict(zip(("mechanism", "rate_param", "imputer", "model"), key))
        row["n_folds"] = len(rs)
        row["n_ok"] = len(ok)
        for metric in ("c_harrell", "c_uno"):
            vals = np.array([getattr(r, metric) for r in ok], dtype=float)
            vals = vals[~np.isnan(vals)]
            if vals.size:
                row[f"{metric}_median"] = float(np.median(vals))
                row[f"{metric}_min"] = float(vals.min())
                row[f"{metric}_max"] = float(vals.max())
            else:
                row[f"{metric}_median"] = row[f"{metric}_min"] = row[f"{metric}_max"] = math.nan
        row["achieved_missing_fraction"] = rs[0].achieved_missing_fraction
        row["errors"] = "; ".join(sorted({r.error for r in rs if r.error}))
        rows.append(row)
    return rows


_SUMMARY_COLUMNS = (
    "mechanism", "rate_param", "imputer", "model", "n_folds", "n_ok",
    "c_harrell_median", "c_harrell_min", "c_harrell_max",
    "c_uno_median", "c_uno_min", "c_uno_max", "achieved_missing_fraction", "errors",
)
_PLOT_COLUMNS = (
    "mechanism", "rate_param", "imputer", "model",
    "c_harrell_median", "c_harrell_min", "c_harrell_max",
    "c_uno_median", "c_uno_min", "c_uno_max",
)


def _write_rows(rows, columns, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def write_summary_csv(summary, path) -> None:
    _write_rows(summary, _SUMMARY_COLUMNS, path)


def write_plot_data_csv(summary, path) -> None:
    _write_rows(summary, _PLOT_COLUMNS, path)


# ---------------------------------------------------------------- config file


def _floats(raw):
    return tuple(float(v) for v in raw.split(",") if v.strip())


def _names(raw):
    return tuple(v.strip() for v in raw.split(",") if v.strip())


def _bool(raw):
    if raw.lower() in ("1", "true", "yes", "on"):
        return True
    if raw.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def load_bench_config(path, **overrides) -> BenchConfig:
    """Read a flat ``key = value`` bench file.

    Keys: ``mcar_p`` and ``selfmask_tau`` (comma lists), ``imputers``,
    ``models``, the scalar :class:`BenchConfig` fields, ``sim.<field>`` for
    simulation parameters, ``rsf.<field>`` and ``mlp.<field>`` for learners.
    """
    from .simulate import _parse_value

    top, sim, rsf, mlp = {}, {}, {}, {}
    mcar, selfmask = None, None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key.startswith("sim."):
                sim[key[4:]] = _parse_value(key[4:], raw)
            elif key.startswith("rsf."):
                rsf[key[4:]] = int(raw)
            elif key.startswith("mlp."):
                k = key[4:]
                if k == "hidden_sizes":
                    mlp[k] = tuple(int(v) for v in raw.split(","))
                elif k == "learning_rate":
                    mlp[k] = float(raw)
                elif k == "standardize":
                    mlp[k] = _bool(raw)
                else:
                    mlp[k] = int(raw)
            elif key == "mcar_p":
                mcar = _floats(raw)
            elif key == "selfmask_tau":
                selfmask = _floats(raw)
            elif key in ("imputers", "models"):
                top[key] = _names(raw)
            elif key in ("folds", "seed", "neumiss_depth", "knn_k", "iterative_max_iter"):
                top[key] = int(raw)
            elif key in ("val_fraction", "iterative_tol", "ridge_alpha"):
                top[key] = float(raw)
            elif key in ("include_baseline", "knn_standardize", "strict_validation", "record_timing"):
                top[key] = _bool(raw)
            elif key == "metric":
                top[key] = raw
            else:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    if mcar is not None or selfmask is not None:
        top["scenarios"] = tuple(
            [AmputationSpec("mcar", p=p) for p in (mcar or ())]
            + [AmputationSpec("selfmask", tau=t) for t in (selfmask or ())]
        )
    if sim:
        if sim.get("mu_mode") == "random" and "mu" not in sim:
            sim["mu"] = None
        top["sim"] = SimConfig(**sim)
    if rsf:
        top["rsf"] = RsfConfig(**rsf)
    if mlp:
        top["mlp"] = MlpConfig(**mlp)
    known = {f.name for f in fields(BenchConfig)}
    top.update({k: v for k, v in overrides.items() if v is not None and k in known})
    return BenchConfig(**top)
