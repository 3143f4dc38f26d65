"""Training loop with combination augmentation and baselines.

The core step encodes each view once per batch, then fuses and predicts once
per view combination; the step loss is the mean over combinations of the mean
per-sample loss, so every availability pattern weighs the same. Early
stopping watches the unweighted full-view validation loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .augmentation import AugPolicy, enumerate_combinations, sensd_mask, tempd_mask
from .data import MultiViewDataset
from .model import FeatureFusionModel, _BaseModel, batch_views
from .rng import stream
from .tensor import Adam, Tensor, no_grad


@dataclass
class TrainConfig:
    batch_size: int = 128
    lr: float = 1e-3
    max_epochs: int = 50
    patience: int = 5
    class_weighting: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


# -- losses ------------------------------------------------------------------------


def class_weights(labels: np.ndarray, n_classes: int | None = None) -> np.ndarray:
    """Per-class weights inverse to class counts, normalized to mean 1."""
    labels = np.asarray(labels, dtype=int)
    k = n_classes if n_classes is not None else int(labels.max()) + 1
    counts = np.bincount(labels, minlength=k)
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"class {missing} has no samples")
    w = 1.0 / counts
    return w * (k / w.sum())


def _log_softmax(logits: Tensor) -> Tensor:
    shift = Tensor(logits.data.max(axis=-1, keepdims=True))
    z = logits - shift
    return z - z.exp().sum(axis=-1, keepdims=True).log()


def cross_entropy(logits: Tensor, y: np.ndarray,
                  weights: np.ndarray | None = None) -> Tensor:
    """Mean weighted cross-entropy over a batch of logits (B, K)."""
    y = np.asarray(y, dtype=int)
    k = logits.shape[-1]
    if y.min() < 0 or y.max() >= k:
        raise ValueError("class label out of range")
    onehot = np.zeros(logits.shape)
    onehot[np.arange(y.shape[0]), y] = 1.0
    picked = (_log_softmax(logits) * Tensor(onehot)).sum(axis=-1)
    if weights is not None:
        picked = picked * Tensor(weights[y])
    return -picked.mean()


def mse(pred: Tensor, y: np.ndarray) -> Tensor:
    diff = pred - Tensor(np.asarray(y, dtype=np.float64))
    return (diff * diff).mean()


def batch_loss(outputs: Tensor, y: np.ndarray, task: str,
               weights: np.ndarray | None = None) -> Tensor:
    if task == "classification":
        return cross_entropy(outputs, y, weights)
    return mse(outputs[:, 0], y)


def combination_loss(parts: list[Tensor]) -> Tensor:
    """Balanced objective over view combinations: the plain mean, so every
    availability pattern weighs the same regardless of enumeration order."""
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    return total * (1.0 / len(parts))


def per_sample_loss(y, y_hat, task: str,
                    weights: np.ndarray | None = None) -> float:
    """Loss of a single prediction: weighted cross-entropy on a probability
    vector for classification, squared error for regression."""
    if task == "classification":
        p = np.asarray(y_hat, dtype=np.float64)
        label = int(y)
        if not 0 <= label < p.shape[0]:
            raise ValueError(f"class label {label} out of range")
        w = 1.0 if weights is None else float(weights[label])
        return float(-w * math.log(max(p[label], 1e-300)))
    return float((float(y) - float(y_hat)) ** 2)


# -- early stopping ------------------------------------------------------------------


class EarlyStopper:
    """Stop after ``patience`` consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.bad_epochs = 0

    def update(self, value: float) -> tuple[bool, bool]:
        """Returns (improved, should_stop)."""
        if value < self.best:
            self.best = value
            self.bad_epochs = 0
            return True, False
        self.bad_epochs += 1
        return False, self.bad_epochs >= self.patience


# -- steps ---------------------------------------------------------------------------


def _masks_for_step(model: _BaseModel, aug: AugPolicy, combos: list[tuple],
                    batch_size: int, rng: np.random.Generator):
    """Shared-mask list for the step, or per-sample masks for view dropping."""
    m = len(model.view_specs)
    full = tuple(range(m))
    if aug.kind == "com":
        return combos, None
    if aug.kind == "sensd":
        return None, [sensd_mask(m, rng) for _ in range(batch_size)]
    return [full], None


def _apply_tempd(model: _BaseModel, views: dict[str, np.ndarray], ratio: float,
                 rng: np.random.Generator) -> dict[str, np.ndarray]:
    out = dict(views)
    for spec in model.view_specs:
        if spec.kind != "temporal":
            continue
        arr = out[spec.id]
        out[spec.id] = np.stack([tempd_mask(arr[i], ratio, rng)
                                 for i in range(arr.shape[0])])
    return out


def _grouped_mask_loss(model: _BaseModel, views: dict[str, np.ndarray],
                       y: np.ndarray, masks: list[tuple], task: str,
                       weights, rng, train: bool) -> Tensor:
    """Mean per-sample loss when each sample carries its own mask.

    Samples are grouped by identical mask so each group runs as one batch;
    group means are recombined weighted by group size.
    """
    order = {}
    for i, mask in enumerate(masks):
        order.setdefault(mask, []).append(i)
    n = len(masks)
    total = None
    for mask in sorted(order):
        idx = np.asarray(order[mask])
        out = model.forward_masked(batch_views(views, idx), mask, rng=rng, train=train)
        part = batch_loss(out, y[idx], task, weights) * (len(idx) / n)
        total = part if total is None else total + part
    return total


def train_step(model: _BaseModel, views: dict[str, np.ndarray], y: np.ndarray,
               aug: AugPolicy, combos: list[tuple], optimizer: Adam, task: str,
               weights: np.ndarray | None, mask_rng: np.random.Generator,
               dropout_rng: np.random.Generator) -> float:
    """One optimizer update; returns the step loss.

    For combination augmentation at feature level the encoders run once and
    only fusion plus head repeat per combination; at input level every
    combination is a full forward over zero-imputed inputs.
    """
    if aug.kind == "tempd":
        views = _apply_tempd(model, views, aug.tempd_ratio, mask_rng)
    batch = y.shape[0]
    shared, per_sample = _masks_for_step(model, aug, combos, batch, mask_rng)

    optimizer.zero_grad()
    if per_sample is not None:
        loss = _grouped_mask_loss(model, views, y, per_sample, task, weights,
                                  dropout_rng, True)
    elif (aug.kind == "com" and isinstance(model, FeatureFusionModel)
          and model.level == "feature"):
        rows = model.encode_all(views, rng=dropout_rng, train=True)
        parts = []
        for mask in shared:
            subset = [rows[i] if i in mask else None for i in range(len(rows))]
            out = model.fuse_head(subset, rng=dropout_rng, train=True)
            parts.append(batch_loss(out, y, task, weights))
        loss = combination_loss(parts)
    else:
        parts = [batch_loss(model.forward_masked(views, mask, rng=dropout_rng,
                                                 train=True), y, task, weights)
                 for mask in shared]
        loss = combination_loss(parts)
    loss.backward()
    optimizer.step()
    return loss.item()


def validation_losses(model: _BaseModel, ds: MultiViewDataset,
                      masks: list[tuple]) -> dict[tuple, float]:
    """Unweighted evaluation-mode loss per mask over the whole validation set."""
    out = {}
    with no_grad():
        for mask in masks:
            pred = model.forward_masked(ds.views, mask)
            out[mask] = batch_loss(pred, ds.y, model.task).item()
    return out


@dataclass
class TrainResult:
    log: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf


def train_model(model: _BaseModel, ds_train: MultiViewDataset,
                ds_val: MultiViewDataset, aug: AugPolicy,
                cfg: TrainConfig) -> TrainResult:
    """Fit in place; restores the best snapshot by full-view validation loss."""
    task = model.task
    m = len(model.view_specs)
    full = tuple(range(m))
    combos = enumerate_combinations(m) if aug.kind == "com" else [full]
    weights = None
    if task == "classification" and cfg.class_weighting:
        weights = class_weights(ds_train.y, ds_train.n_classes)

    optimizer = Adam(model.parameters(), lr=cfg.lr)
    shuffle_rng = stream(cfg.seed, "aug", "shuffle")
    mask_rng = stream(cfg.seed, "aug", "masks")
    dropout_rng = stream(cfg.seed, "aug", "dropout")
    stopper = EarlyStopper(cfg.patience)
    result = TrainResult()
    named = model.named_parameters()
    best_snapshot = [p.data.copy() for _, p in named]

    n = ds_train.n_samples
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        steps = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            views = batch_views(ds_train.views, idx)
            epoch_loss += train_step(model, views, ds_train.y[idx], aug, combos,
                                     optimizer, task, weights, mask_rng, dropout_rng)
            steps += 1
        val = validation_losses(model, ds_val, combos if aug.kind == "com" else [full])
        val_loss = val[full]
        record = {"epoch": epoch, "train_loss": epoch_loss / steps, "val_loss": val_loss}
        if aug.kind == "com":
            record["val_loss_combos"] = {",".join(map(str, k)): v for k, v in val.items()}
        result.log.append(record)
        improved, stop = stopper.update(val_loss)
        if improved:
            best_snapshot = [p.data.copy() for _, p in named]
            result.best_epoch = epoch
            result.best_val_loss = val_loss
        if stop:
            break
    for (_, p), data in zip(named, best_snapshot):
        p.data = data
    return result
