"""Neural Cox model: ReLU perceptron trained on the within-batch partial likelihood.

An optional NeuMiss block in front of the perceptron consumes raw inputs with
their missingness mask, so no imputation is needed.
"""

from __future__ import annotations

import copy
import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, SeededRng

__all__ = [
    "MlpConfig",
    "NeuMissConfig",
    "MlpModel",
    "EarlyStopping",
    "TrainingDivergedError",
    "cox_batch_loss",
    "init_params",
    "mlp_forward",
    "neumiss_forward",
    "loss_and_grad",
    "train",
]

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class MlpConfig:
    hidden_sizes: tuple[int, ...] = (32, 32)
    epochs: int = 512
    batch_size: int = 56
    learning_rate: float = 1e-2
    patience: int = 16
    seed: int = 0
    neumiss_depth: int | None = None  # None disables the NeuMiss block
    standardize: bool = True

    def __post_init__(self):
        if not self.hidden_sizes:
            raise ValueError("hidden_sizes must be nonempty")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.epochs < 1 or self.patience < 1:
            raise ValueError("epochs and patience must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.neumiss_depth is not None and self.neumiss_depth < 0:
            raise ValueError("neumiss_depth must be non-negative")


@dataclass
class NeuMissConfig:
    """Shared-weight NeuMiss block parameters."""

    depth: int = 30
    shared_weight: np.ndarray | None = None
    mean_shift: np.ndarray | None = None


# ---------------------------------------------------------------- loss


def _risk_set_logsum(g_sorted, last):
    """log of sum_{t_j >= t_i} exp(g_j) for rows sorted by time descending."""
    return np.logaddexp.accumulate(g_sorted)[last]


def _tie_last(time_desc):
    n = time_desc.size
    change = np.flatnonzero(np.diff(time_desc) != 0)
    ends = np.append(change, n - 1)
    sizes = np.diff(np.insert(ends, 0, -1))
    return np.repeat(ends, sizes)


def cox_batch_loss(scores, time, event) -> tuple[float, np.ndarray]:
    """Negative mean partial log-likelihood over the events of one batch.

    Risk sets are taken within the batch (all rows with ``t_j >= t_i``).
    Returns ``(loss, d loss / d scores)``; a batch without events gives
    ``(0.0, zeros)``.
    """
    g = np.asarray(scores, dtype=float).reshape(-1)
    time = np.asarray(time, dtype=float).reshape(-1)
    event = np.asarray(event, dtype=bool).reshape(-1)
    m = g.size
    n_events = int(event.sum())
    if n_events == 0:
        return 0.0, np.zeros(m)
    order = np.argsort(-time, kind="stable")
    gs = g[order] - g.max()
    es = event[order]
    last = _tie_last(time[order])
    log_s = _risk_set_logsum(gs, last)
    loss = -np.sum(gs[es] - log_s[es]) / n_events
    # each event i contributes exp(g_j - log_s_i) to every j in its risk set
    contrib = np.zeros(m)
    np.add.at(contrib, last[es], np.exp(-log_s[es]))
    reach = np.cumsum(contrib[::-1])[::-1]
    grad_sorted = -(es.astype(float) - np.exp(gs) * reach) / n_events
    grad = np.empty(m)
    grad[order] = grad_sorted
    return float(loss), grad


# ---------------------------------------------------------------- network


def init_params(d: int, hidden_sizes, rng: SeededRng, neumiss_depth: int | None = None) -> dict:
    """Uniform fan-in initialisation, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    params = {}
    sizes = [d, *hidden_sizes, 1]
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        params[f"W{k}"] = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        params[f"b{k}"] = rng.uniform(-bound, bound, size=fan_out)
    if neumiss_depth is not None:
        # small enough that the depth-fold recursion starts contractive
        params["nm_W"] = rng.uniform(-1.0 / d, 1.0 / d, size=(d, d))
        params["nm_mu"] = np.zeros(d)
    return params


def _n_layers(params):
    return sum(1 for k in params if k.startswith("W"))


def neumiss_forward(cfg: NeuMissConfig, x, mask, return_states=False):
    """NeuMiss block: ``h <- (W h) * obs + h0`` repeated ``depth`` times.

    ``h0 = (x - mean_shift) * obs`` with ``obs = 1 - mask``. Works on a single
    row or a batch; missing entries of ``x`` are never read.
    """
    x = np.asarray(x, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    obs = (~mask).astype(float)
    d = x.shape[-1]
    w = np.zeros((d, d)) if cfg.shared_weight is None else np.asarray(cfg.shared_weight, float)
    mu = np.zeros(d) if cfg.mean_shift is None else np.asarray(cfg.mean_shift, float)
    h0 = np.where(mask, 0.0, x - mu) * obs
    h = h0
    states = [h]
    for _ in range(cfg.depth):
        h = (h @ w.T) * obs + h0
        states.append(h)
    if return_states:
        return h, states
    return h


def _forward(params, x, mask, depth):
    cache = {}
    if "nm_W" in params:
        nm = NeuMissConfig(depth, params["nm_W"], params["nm_mu"])
        a, states = neumiss_forward(nm, x, mask, return_states=True)
        cache["nm_states"] = states
        cache["nm_obs"] = (~mask).astype(float)
    else:
        a = x
    L = _n_layers(params)
    acts = [a]
    pre = []
    for k in range(L):
        z = acts[-1] @ params[f"W{k}"].T + params[f"b{k}"]
        pre.append(z)
        acts.append(np.maximum(z, 0.0) if k < L - 1 else z)
    cache["acts"], cache["pre"] = acts, pre
    return acts[-1][:, 0], cache


def mlp_forward(params, x, mask=None, depth: int = 0):
    """Scalar log-risk for each row (or for a single row)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = x[None, :] if single else x
    if xs.shape[1] != params["W0"].shape[1]:
        raise ValueError(f"expected {params['W0'].shape[1]} inputs, got {xs.shape[1]}")
    ms = np.zeros(xs.shape, bool) if mask is None else np.asarray(mask, bool).reshape(xs.shape)
    if "nm_W" not in params and ms.any():
        raise ValueError("missing inputs need the NeuMiss block")
    out, _ = _forward(params, xs, ms, depth)
    return float(out[0]) if single else out


def _backward(params, cache, dout, depth):
    grads = {}
    L = _n_layers(params)
    acts, pre = cache["acts"], cache["pre"]
    delta = dout[:, None]
    for k in range(L - 1, -1, -1):
        grads[f"W{k}"] = delta.T @ acts[k]
        grads[f"b{k}"] = delta.sum(axis=0)
        da = delta @ params[f"W{k}"]
        if k > 0:
            delta = da * (pre[k - 1] > 0)
    if "nm_W" in params:
        states, obs = cache["nm_states"], cache["nm_obs"]
        w = params["nm_W"]
        g = da
        dw = np.zeros_like(w)
        dh0 = np.zeros_like(g)
        for k in range(depth - 1, -1, -1):
            dh0 += g
            u = g * obs
            dw += u.T @ states[k]
            g = u @ w
        dh0 += g
        grads["nm_W"] = dw
        grads["nm_mu"] = -(dh0 * obs).sum(axis=0)
    return grads


def loss_and_grad(params, x, mask, time, event, depth: int = 0):
    """Batch Cox loss of the network and its gradient for every parameter."""
    x = np.asarray(x, dtype=float)
    mask = np.zeros(x.shape, bool) if mask is None else np.asarray(mask, bool)
    scores, cache = _forward(params, x, mask, depth)
    loss, dscores = cox_batch_loss(scores, time, event)
    return loss, _backward(params, cache, dscores, depth)


# ---------------------------------------------------------------- training


class EarlyStopping:
    """Tracks the best validation loss; signals a stop after ``patience`` stale epochs."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.stale = 0

    def step(self, epoch: int, value: float) -> bool:
        if value < self.best:
            self.best, self.best_epoch, self.stale = value, epoch, 0
            return False
        self.stale += 1
        return self.stale >= self.patience

    @property
    def improved(self) -> bool:
        return self.stale == 0


@dataclass
class MlpModel:
    params: dict
    config: MlpConfig
    in_mean: np.ndarray
    in_scale: np.ndarray
    training_log: list = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0

    @property
    def depth(self) -> int:
        return self.config.neumiss_depth or 0

    def _inputs(self, x, mask):
        x = np.asarray(x, dtype=float)
        mask = np.zeros(x.shape, bool) if mask is None else np.asarray(mask, bool)
        z = np.where(mask, 0.0, (np.where(mask, 0.0, x) - self.in_mean) / self.in_scale)
        return z, mask

    def risk(self, x, mask=None) -> np.ndarray:
        z, mask = self._inputs(x, mask)
        return mlp_forward(self.params, z, mask, self.depth)

    def loss(self, ds: Dataset) -> float:
        z, mask = self._inputs(ds.x, ds.mask)
        scores, _ = _forward(self.params, np.atleast_2d(z), mask, self.depth)
        return cox_batch_loss(scores, ds.time, ds.event)[0]

    def dump_training_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_loss"])
            for k, (tr, va) in enumerate(self.training_log, 1):
                w.writerow([k, repr(tr), repr(va)])


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def _input_scaling(train: Dataset, standardize: bool):
    d = train.d
    if not standardize:
        return np.zeros(d), np.ones(d)
    mean = np.array([train.x[~train.mask[:, j], j].mean() for j in range(d)])
    sd = np.array([train.x[~train.mask[:, j], j].std() for j in range(d)])
    return mean, np.where(sd > 0, sd, 1.0)


def _run(train, val, cfg, lr, monitor):
    if not cfg.neumiss_depth and not (train.is_complete and val.is_complete):
        raise ValueError("missing inputs need the NeuMiss block (set neumiss_depth)")
    rng = SeededRng(cfg.seed, SeededRng.MODEL)
    in_mean, in_scale = _input_scaling(train, cfg.standardize)
    params = init_params(train.d, cfg.hidden_sizes, rng.child(0), cfg.neumiss_depth)
    model = MlpModel(params, cfg, in_mean, in_scale)
    depth = model.depth
    z, mask = model._inputs(train.x, train.mask)
    opt = _Adam(params, lr)
    stopper = EarlyStopping(cfg.patience)
    best = copy.deepcopy(params)
    shuffler = rng.child(1)
    n = train.n
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffler.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            if idx.size < 2:
                continue
            # time-descending order inside the batch for the cumulative risk sums
            idx = idx[np.argsort(-train.time[idx], kind="stable")]
            loss, grads = loss_and_grad(params, z[idx], mask[idx], train.time[idx],
                                        train.event[idx], depth)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            if train.event[idx].any():
                batch_losses.append(loss)
                opt.step(params, grads)
        train_loss = float(np.mean(batch_losses)) if batch_losses else 0.0
        val_loss = monitor(epoch, model) if monitor is not None else model.loss(val)
        if not np.isfinite(val_loss):
            raise FloatingPointError(f"non-finite validation loss at epoch {epoch}")
        model.training_log.append((train_loss, float(val_loss)))
        stop = stopper.step(epoch, val_loss)
        if stopper.improved:
            best = copy.deepcopy(params)
        model.stopped_epoch = epoch
        if stop:
            break
    model.params = best
    model.best_epoch = stopper.best_epoch
    return model


def train(train: Dataset, val: Dataset, cfg: MlpConfig | None = None, monitor=None) -> MlpModel:
    """Fit the network with Adam and validation early stopping.

    Each epoch shuffles the training rows with the seeded stream and walks
    through minibatches of ``batch_size``. After every epoch the loss on the
    whole validation set is recorded; training stops after ``patience``
    epochs without improvement and the best-epoch parameters are restored.
    If the loss becomes non-finite the learning rate is halved and training
    restarts, at most twice.

    ``monitor(epoch, model) -> float`` replaces the validation loss when
    given (used to script the stopping rule in tests).
    """
    cfg = cfg or MlpConfig()
    if val.n == 0:
        raise ValueError("validation set must be nonempty")
    lr = cfg.learning_rate
    for attempt in range(3):
        try:
            return _run(train, val, cfg, lr, monitor)
        except FloatingPointError as exc:
            log.warning("training diverged (%s); halving learning rate to %g", exc, lr / 2)
            lr /= 2
    raise TrainingDivergedError("training diverged three times")
