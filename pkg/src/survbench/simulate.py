"""Clustered covariates, Weibull survival under a nonlinear interaction, uniform censoring."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .core import Dataset, SeededRng, SurvivalOutcome

__all__ = [
    "PAPER_MU",
    "SimConfig",
    "build_covariance",
    "sample_covariates",
    "interaction_f",
    "sample_survival_time",
    "apply_censoring",
    "generate_dataset",
    "load_sim_config",
]

# frozen draws of the two cluster means
PAPER_MU = (
    (0.55, -1.46, -1.29, -1.51, 1.57),
    (-0.98, 0.48, 0.63, 0.72, 0.91),
)

# (row, col) pairs, 0-based, carrying the off-diagonal coefficient
_CORR_PATTERN = ((0, 1), (0, 2), (2, 3), (3, 4))


def build_covariance(corr_c: float, d: int = 5) -> np.ndarray:
    """Unit-diagonal covariance with ``corr_c`` on the fixed sparse pattern.

    The pattern couples coordinates (1,2), (1,3), (3,4), (4,5) (1-based); for
    ``d`` other than 5 only the pairs that fit are used. Raises ``ValueError``
    if the result is not positive definite.
    """
    if d < 1:
        raise ValueError("d must be positive")
    sigma = np.eye(d)
    for i, j in _CORR_PATTERN:
        if i < d and j < d:
            sigma[i, j] = sigma[j, i] = corr_c
    lam_min = np.linalg.eigvalsh(sigma)[0]
    if lam_min <= 1e-12:
        raise ValueError(
            f"covariance with corr_c={corr_c} is not positive definite "
            f"(smallest eigenvalue {lam_min:.6g})"
        )
    return sigma


@dataclass(frozen=True)
class SimConfig:
    """Generative parameters of the simulated cohort.

    ``mu`` holds the two cluster means; set ``mu=None`` together with
    ``mu_mode="random"`` to draw them from N(0, I) with the config seed.
    """

    n: int = 500
    d: int = 5
    mixture_p: float = 0.5
    mu: tuple | None = PAPER_MU
    mu_mode: str = "fixed"
    corr_c: float = 0.5
    weibull_shape: float = 2.0
    weibull_scale: float = 100.0
    censor_lo: float = 30.0
    censor_hi: float = 150.0
    seed: int = 0
    sigma: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if self.d < 4:
            raise ValueError("the interaction function needs d >= 4")
        if not 0 < self.mixture_p < 1:
            raise ValueError("mixture_p must lie strictly between 0 and 1")
        if not self.censor_lo < self.censor_hi:
            raise ValueError("censor_lo must be smaller than censor_hi")
        if self.censor_lo < 0:
            raise ValueError("censoring bounds must be non-negative")
        if not (self.weibull_shape > 0 and self.weibull_scale > 0):
            raise ValueError("Weibull shape and scale must be positive")
        if self.mu_mode not in ("fixed", "random"):
            raise ValueError("mu_mode must be 'fixed' or 'random'")
        if self.mu_mode == "fixed":
            mu = np.asarray(self.mu, dtype=float)
            if mu.shape != (2, self.d):
                raise ValueError(f"mu must have shape (2, {self.d}), got {mu.shape}")
            object.__setattr__(self, "mu", tuple(tuple(float(v) for v in row) for row in mu))
        object.__setattr__(self, "sigma", build_covariance(self.corr_c, self.d))

    def means(self) -> np.ndarray:
        if self.mu_mode == "random":
            rng = SeededRng(self.seed, SeededRng.SIMULATION).child(0)
            return rng.standard_normal((2, self.d))
        return np.asarray(self.mu, dtype=float)


def sample_covariates(cfg: SimConfig, rng: SeededRng) -> tuple[np.ndarray, np.ndarray]:
    """Two-component Gaussian mixture with shared covariance.

    Draws ``G ~ Bernoulli(mixture_p)`` then ``x ~ N(mu[G], Sigma)`` through the
    Cholesky factor of ``Sigma``.
    """
    groups = (rng.random(cfg.n) < cfg.mixture_p).astype(int)
    z = rng.standard_normal((cfg.n, cfg.d))
    chol = np.linalg.cholesky(cfg.sigma)
    x = cfg.means()[groups] + z @ chol.T
    return x, groups


def interaction_f(x) -> np.ndarray | float:
    """``x1*x2 - x1*x3 + 2*x1*x4`` (1-based), row-wise for 2-D input."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 4:
        raise ValueError("interaction_f needs at least 4 coordinates")
    x1, x2, x3, x4 = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    out = x1 * x2 - x1 * x3 + 2.0 * x1 * x4
    return float(out) if out.ndim == 0 else out


def sample_survival_time(x, cfg: SimConfig, rng) -> np.ndarray | float:
    """``T = W * exp(f(x)) * scale`` with ``W`` unit-scale Weibull(shape).

    ``W = (-ln U)^(1/shape)``, one uniform per row. ``rng`` only needs a
    ``random(size)`` method.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = x.reshape(1, -1) if single else x
    u = np.asarray(rng.random(xs.shape[0]), dtype=float)
    w = (-np.log(u)) ** (1.0 / cfg.weibull_shape)
    t = w * np.exp(interaction_f(xs)) * cfg.weibull_scale
    return float(t[0]) if single else t


def apply_censoring(t, cfg: SimConfig, rng):
    """Censor at ``C ~ Uniform(censor_lo, censor_hi)``.

    Scalar ``t`` gives a :class:`SurvivalOutcome`; an array gives
    ``(observed_time, event)`` arrays.
    """
    t_arr = np.asarray(t, dtype=float)
    c = cfg.censor_lo + (cfg.censor_hi - cfg.censor_lo) * np.asarray(rng.random(t_arr.size))
    c = c.reshape(t_arr.shape)
    observed = np.minimum(t_arr, c)
    event = t_arr < c
    if t_arr.ndim == 0:
        return SurvivalOutcome(float(observed), bool(event))
    return observed, event


def generate_dataset(cfg: SimConfig) -> Dataset:
    rng = SeededRng(cfg.seed, SeededRng.SIMULATION)
    x, groups = sample_covariates(cfg, rng.child(1))
    t = sample_survival_time(x, cfg, rng.child(2))
    observed, event = apply_censoring(np.asarray(t).reshape(-1), cfg, rng.child(3))
    return Dataset.complete(x, observed, event, groups)


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "mu":
        rows = [r for r in raw.split(";") if r.strip()]
        return tuple(tuple(float(v) for v in r.split(",")) for r in rows)
    if key in ("n", "d", "seed"):
        return int(raw)
    if key == "mu_mode":
        return raw
    return float(raw)


def load_sim_config(path, **overrides) -> SimConfig:
    """Read a flat ``key = value`` file whose keys mirror :class:`SimConfig`.

    ``mu`` is written as two comma-separated vectors joined by ``;``. Lines
    starting with ``#`` are ignored.
    """
    known = {f.name for f in fields(SimConfig) if f.init}
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(key, raw)
    if values.get("mu_mode") == "random" and "mu" not in values:
        values["mu"] = None
    cfg = SimConfig(**values)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides) if overrides else cfg
