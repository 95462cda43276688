"""Classification head on frozen backbone feature maps, in plain numpy.

Layer order: global average pooling -> inverted dropout -> batch norm ->
dense + ReLU -> dense + sigmoid. Training minimises mean binary cross-entropy
with Adam. Validation loss drives the learning-rate schedule and early
stopping, and the best checkpoint is what ``train`` returns.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ContractError, DegenerateInputError, DomainError

PARAM_NAMES = ("bn_gamma", "bn_beta", "w1", "b1", "w2", "b2")
PROB_CLIP = 1e-7


@dataclass
class FeatureBatch:
    """``values`` has shape (n, h, w, c); ``labels`` holds n 0/1 labels."""

    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.values.ndim != 4:
            raise DomainError(f"features must be (n, h, w, c), got shape {self.values.shape}")
        if self.values.shape[0] < 1 or min(self.values.shape[1:]) < 1:
            raise DomainError("feature batch has an empty dimension")
        if self.labels.shape != (self.values.shape[0],):
            raise DomainError("need exactly one label per sample")
        if not np.isin(self.labels, (0, 1)).all():
            raise DomainError("labels must be 0/1")
        if not np.isfinite(self.values).all():
            raise DomainError("feature values must be finite")

    def __len__(self):
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape

    def subset(self, idx) -> "FeatureBatch":
        return FeatureBatch(self.values[idx], self.labels[idx])


@dataclass
class HeadModel:
    bn_gamma: np.ndarray
    bn_beta: np.ndarray
    bn_running_mean: np.ndarray
    bn_running_var: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    dropout_rate: float = 0.2
    bn_momentum: float = 0.99
    bn_eps: float = 1e-3
    # bumped on every parameter update so stale forward caches are detectable
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DomainError("dropout_rate must lie in [0, 1)")
        if np.any(np.asarray(self.bn_running_var) <= 0):
            raise DomainError("running variance must be positive")

    @property
    def channels(self) -> int:
        return self.w1.shape[0]

    @property
    def d_hidden(self) -> int:
        return self.w1.shape[1]

    def params(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def set_params(self, params: dict):
        for k in PARAM_NAMES:
            v = params[k]
            setattr(self, k, float(v) if k == "b2" else np.asarray(v, dtype=np.float64))
        self.version += 1

    def n_trainable(self) -> int:
        c, d = self.channels, self.d_hidden
        return 2 * c + c * d + d + d + 1

    def copy(self) -> "HeadModel":
        return copy.deepcopy(self)

    def to_dict(self) -> dict:
        d = {
            "format": "waekit-head",
            "channels": self.channels,
            "d_hidden": self.d_hidden,
        }
        for f in fields(self):
            if f.name == "version":
                continue
            v = getattr(self, f.name)
            d[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HeadModel":
        if d.get("format") != "waekit-head":
            raise DomainError("not a serialized head model")
        kw = {}
        for f in fields(cls):
            if f.name == "version" or f.name not in d:
                continue
            v = d[f.name]
            kw[f.name] = np.asarray(v, dtype=np.float64) if isinstance(v, list) else v
        model = cls(**kw)
        c, h = int(d["channels"]), int(d["d_hidden"])
        expected = {"bn_gamma": (c,), "bn_beta": (c,), "bn_running_mean": (c,),
                    "bn_running_var": (c,), "w1": (c, h), "b1": (h,), "w2": (h,)}
        for k, shp in expected.items():
            if getattr(model, k).shape != shp:
                raise DomainError(f"{k} has shape {getattr(model, k).shape}, expected {shp}")
        return model


def init_head(channels: int, d_hidden: int = 64, dropout_rate: float = 0.2,
              seed=None, bn_momentum: float = 0.99, bn_eps: float = 1e-3) -> HeadModel:
    """Glorot-uniform dense kernels, zero biases, identity batch norm."""
    if channels < 1 or d_hidden < 1:
        raise DomainError("channels and d_hidden must be positive")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out, shape):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=shape)

    return HeadModel(
        bn_gamma=np.ones(channels),
        bn_beta=np.zeros(channels),
        bn_running_mean=np.zeros(channels),
        bn_running_var=np.ones(channels),
        w1=glorot(channels, d_hidden, (channels, d_hidden)),
        b1=np.zeros(d_hidden),
        w2=glorot(d_hidden, 1, (d_hidden,)),
        b2=0.0,
        dropout_rate=dropout_rate,
        bn_momentum=bn_momentum,
        bn_eps=bn_eps,
    )


def gap(features) -> np.ndarray:
    """Per-channel spatial mean; accepts (h, w, c) or a batch (n, h, w, c)."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim not in (3, 4) or x.size == 0:
        raise DomainError(f"expected a nonempty (h, w, c) or (n, h, w, c) tensor, got {x.shape}")
    return x.mean(axis=(-3, -2))


def sigmoid(x):
    """Logistic function, split on sign so neither branch overflows."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def bce_loss(probs, labels) -> float:
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise DomainError(f"length mismatch: {p.shape} probs vs {y.shape} labels")
    if p.size == 0:
        raise DomainError("loss of an empty batch is undefined")
    p = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


@dataclass
class ForwardCache:
    version: int
    mode: str
    keep: np.ndarray | None
    u: np.ndarray
    xhat: np.ndarray
    inv_std: np.ndarray
    z: np.ndarray
    h1: np.ndarray
    a1: np.ndarray
    probs: np.ndarray


def _features(batch):
    return batch.values if isinstance(batch, FeatureBatch) else np.asarray(batch, dtype=np.float64)


def forward(model: HeadModel, batch, mode: str = "infer", rng=None):
    """Return ``(probs, cache)``.

    In ``"train"`` mode dropout is active, batch norm uses batch statistics
    and the running statistics are updated in place. ``"infer"`` mode is
    deterministic and leaves the model untouched.
    """
    x = _features(batch)
    if x.ndim != 4 or x.shape[-1] != model.channels:
        raise DomainError(
            f"feature shape {x.shape} does not match a head with {model.channels} channels"
        )
    g = gap(x)
    if mode == "train":
        keep = None
        u = g
        if model.dropout_rate > 0:
            rng = rng if rng is not None else np.random.default_rng()
            keep = (rng.random(g.shape) >= model.dropout_rate) / (1.0 - model.dropout_rate)
            u = g * keep
        mu = u.mean(axis=0)
        var = u.var(axis=0)
        m = model.bn_momentum
        model.bn_running_mean = m * model.bn_running_mean + (1 - m) * mu
        model.bn_running_var = m * model.bn_running_var + (1 - m) * var
    elif mode == "infer":
        keep = None
        u = g
        mu, var = model.bn_running_mean, model.bn_running_var
    else:
        raise DomainError(f"mode must be 'train' or 'infer', got {mode!r}")

    inv_std = 1.0 / np.sqrt(var + model.bn_eps)
    xhat = (u - mu) * inv_std
    z = model.bn_gamma * xhat + model.bn_beta
    h1 = z @ model.w1 + model.b1
    a1 = np.maximum(h1, 0.0)
    probs = sigmoid(a1 @ model.w2 + model.b2)
    probs = np.atleast_1d(probs)
    return probs, ForwardCache(model.version, mode, keep, u, xhat, inv_std, z, h1, a1, probs)


def predict_proba(model: HeadModel, batch) -> np.ndarray:
    return forward(model, batch, "infer")[0]


def backward(model: HeadModel, cache: ForwardCache, labels) -> dict:
    """Gradients of the mean BCE loss for every trainable parameter.

    Where the probability is clipped inside the loss the gradient is zero,
    matching the clipped loss exactly.
    """
    if cache.mode != "train":
        raise ContractError("backward needs a cache from a train-mode forward pass")
    if cache.version != model.version:
        raise ContractError("forward cache is stale: model parameters changed since it was made")
    y = np.asarray(labels, dtype=np.float64)
    n = cache.probs.shape[0]
    if y.shape != (n,):
        raise DomainError("need one label per sample")

    p = cache.probs
    active = (p > PROB_CLIP) & (p < 1.0 - PROB_CLIP)
    ds = np.where(active, p - y, 0.0) / n

    grads = {}
    grads["w2"] = cache.a1.T @ ds
    grads["b2"] = float(ds.sum())
    dh1 = np.outer(ds, model.w2) * (cache.h1 > 0)
    grads["w1"] = cache.z.T @ dh1
    grads["b1"] = dh1.sum(axis=0)
    dz = dh1 @ model.w1.T
    grads["bn_gamma"] = (dz * cache.xhat).sum(axis=0)
    grads["bn_beta"] = dz.sum(axis=0)
    return grads


def backward_input(model: HeadModel, cache: ForwardCache, labels) -> np.ndarray:
    """Gradient with respect to the pooled (pre-dropout) features."""
    y = np.asarray(labels, dtype=np.float64)
    n = cache.probs.shape[0]
    p = cache.probs
    active = (p > PROB_CLIP) & (p < 1.0 - PROB_CLIP)
    ds = np.where(active, p - y, 0.0) / n
    dz = (np.outer(ds, model.w2) * (cache.h1 > 0)) @ model.w1.T
    dxhat = dz * model.bn_gamma
    xhat = cache.xhat
    du = cache.inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return du * cache.keep if cache.keep is not None else du


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float):
    """One bias-corrected Adam update. Returns ``(new_params, state)``."""
    if set(grads) - set(params):
        raise DomainError(f"gradients for unknown parameters: {sorted(set(grads) - set(params))}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    new = dict(params)
    for k, g in grads.items():
        p = np.asarray(params[k], dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape:
            raise DomainError(f"shape mismatch for {k}: param {p.shape} vs grad {g.shape}")
        m = b1 * state.m.get(k, np.zeros_like(p)) + (1 - b1) * g
        v = b2 * state.v.get(k, np.zeros_like(p)) + (1 - b2) * g * g
        state.m[k], state.v[k] = m, v
        upd = p - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new[k] = float(upd) if np.ndim(params[k]) == 0 else upd
    return new, state


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 20
    batch_size: int = 16
    es_patience: int = 5
    lr_factor: float = 0.5
    lr_patience: int = 2
    min_lr: float = 1e-6
    val_fraction: float = 0.1
    seed: int = 0
    d_hidden: int = 64
    dropout_rate: float = 0.2
    min_delta: float = 1e-9

    def __post_init__(self):
        if not 0 < self.lr_factor < 1:
            raise DomainError("lr_factor must lie in (0, 1)")
        if not self.min_lr > 0:
            raise DomainError("min_lr must be positive")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise DomainError("learning_rate, batch_size and epochs must be positive")
        if not 0 < self.val_fraction < 1:
            raise DomainError("val_fraction must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown training settings: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    learning_rate: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int | None = None
    stopped_epoch: int | None = None

    def column(self, name) -> list:
        return [getattr(r, name) for r in self.records]

    def __len__(self):
        return len(self.records)


def stratified_split(labels, val_fraction: float, rng: np.random.Generator):
    """Indices ``(train, val)`` with each class split in the same proportion."""
    labels = np.asarray(labels)
    train, val = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        n_val = int(round(idx.size * val_fraction))
        if idx.size >= 2:
            n_val = min(max(n_val, 1), idx.size - 1)
        val.append(idx[:n_val])
        train.append(idx[n_val:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


def evaluate(model: HeadModel, batch: FeatureBatch):
    """``(loss, accuracy)`` in inference mode."""
    probs = predict_proba(model, batch)
    acc = float(np.mean((probs >= 0.5) == (batch.labels == 1)))
    return bce_loss(probs, batch.labels), acc


def train(features: FeatureBatch, cfg: TrainConfig | None = None, *,
          val: FeatureBatch | None = None, model: HeadModel | None = None):
    """Fit a head; returns ``(best_model, history)``.

    Without ``val`` a stratified ``cfg.val_fraction`` split of ``features``
    is held out. The learning rate is multiplied by ``cfg.lr_factor`` after
    ``cfg.lr_patience`` epochs without validation-loss improvement (never
    below ``cfg.min_lr``); training stops after ``cfg.es_patience`` such
    epochs. The returned model is the checkpoint with the lowest validation
    loss.
    """
    cfg = cfg or TrainConfig()
    rng = np.random.default_rng(cfg.seed)
    if val is None:
        tr_idx, va_idx = stratified_split(features.labels, cfg.val_fraction, rng)
        train_set, val_set = features.subset(tr_idx), features.subset(va_idx)
    else:
        train_set, val_set = features, val
    if len(train_set.labels) == 0 or np.unique(train_set.labels).size < 2:
        raise DegenerateInputError("training split must contain both classes")
    if len(val_set.labels) == 0:
        raise DegenerateInputError("validation split is empty")

    if model is None:
        model = init_head(features.shape[-1], cfg.d_hidden, cfg.dropout_rate, seed=rng)
    else:
        model = model.copy()
    history = TrainHistory()
    if cfg.epochs == 0:
        return model, history

    state = AdamState()
    lr = cfg.learning_rate
    best_loss = math.inf
    best_model = model.copy()
    wait = lr_wait = 0
    n = len(train_set)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            x, y = train_set.values[idx], train_set.labels[idx]
            probs, cache = forward(model, x, "train", rng)
            losses.append(bce_loss(probs, y) * len(idx))
            grads = backward(model, cache, y)
            new, state = adam_step(model.params(), grads, state, lr)
            model.set_params(new)

        val_loss, val_acc = evaluate(model, val_set)
        history.records.append(EpochRecord(epoch, sum(losses) / n, val_loss, val_acc, lr))

        if val_loss < best_loss - cfg.min_delta:
            best_loss = val_loss
            best_model = model.copy()
            history.best_epoch = epoch
            wait = lr_wait = 0
        else:
            wait += 1
            lr_wait += 1
            if wait >= cfg.es_patience:
                history.stopped_epoch = epoch
                break
            if lr_wait >= cfg.lr_patience:
                lr = max(lr * cfg.lr_factor, cfg.min_lr)
                lr_wait = 0

    if history.stopped_epoch is None:
        history.stopped_epoch = len(history.records)
    return best_model, history
