"""Cross-entropy/Adam training with early stopping and stratified k-fold CV."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import ConfigError, DataError, ShapeError, StratificationError
from .model import N_CLASSES, ModelConfig, TransOptModel
from .rng import SplitRng, hash_words
from .sampling import DesignMatrix

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# RNG streams split off a fold's seed
_STREAM_INIT, _STREAM_VAL, _STREAM_SHUFFLE, _STREAM_DROPOUT = range(4)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    max_epochs: int = 200
    patience: int = 5
    min_delta: float = 0.001
    batch_size: int = 32
    folds: int = 10
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if not 0 < self.val_fraction < 0.5:
            raise ConfigError(f"val_fraction must be in (0, 0.5), got {self.val_fraction}")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ConfigError("max_epochs and batch_size must be >= 1")


@dataclass
class FoldResult:
    fold_index: int
    test_accuracy: float
    epochs_run: int
    train_loss_curve: list[float]
    val_loss_curve: list[float]
    best_val_loss: float
    best_epoch: int
    train_accuracy: float
    test_indices: list[int] = field(default_factory=list)
    test_predictions: list[int] = field(default_factory=list)


@dataclass
class CVReport:
    model_config: dict
    train_config: dict
    data_config: dict
    folds: list[FoldResult]
    mean_accuracy: float
    std_accuracy: float
    confusion_matrix: list[list[int]]
    parameter_count: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CVReport":
        d = dict(d)
        d["folds"] = [FoldResult(**f) for f in d["folds"]]
        return cls(**d)


# building blocks


def stratified_kfold(labels, k: int, seed: int) -> np.ndarray:
    """Fold index per sample.

    Each class's members are shuffled (stream ``rank of the class among the
    sorted distinct labels`` of ``SplitRng(seed)``) and dealt round-robin
    into ``k`` folds.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise StratificationError(f"need at least 2 folds, got {k}")
    root = SplitRng(seed)
    folds = np.empty(len(labels), dtype=np.int64)
    for rank, c in enumerate(np.unique(labels)):
        members = np.flatnonzero(labels == c)
        if len(members) < k:
            raise StratificationError(f"class {c} has {len(members)} members, fewer than k={k}")
        members = members[root.split(rank).permutation(len(members))]
        folds[members] = np.arange(len(members)) % k
    return folds


def stratified_holdout(labels, fraction: float, rng: SplitRng) -> tuple[np.ndarray, np.ndarray]:
    """Split positions ``0..n-1`` into (keep, held out), ``fraction`` per class."""
    labels = np.asarray(labels)
    keep, held = [], []
    for rank, c in enumerate(np.unique(labels)):
        members = np.flatnonzero(labels == c)
        members = members[rng.split(rank).permutation(len(members))]
        n_held = min(max(1, int(round(fraction * len(members)))), len(members) - 1)
        held.append(members[:n_held])
        keep.append(members[n_held:])
    return np.sort(np.concatenate(keep)), np.sort(np.concatenate(held))


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, t: int, lr: float = 0.001):
    """One Adam update, in place on ``params`` and ``state``; returns both."""
    if t < 1:
        raise ValueError(f"Adam step index starts at 1, got {t}")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimiser state have different lengths")
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    state.t = t
    return params, state


class EarlyStopping:
    """Stop once the monitored loss has not dropped by ``min_delta`` below
    the best value seen for ``patience`` consecutive epochs.
    """

    def __init__(self, patience: int = 5, min_delta: float = 0.001):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = 0
        self.stale = 0
        self.epoch = 0

    def update(self, loss: float) -> bool:
        """Record one epoch's loss; True means training should stop."""
        self.epoch += 1
        if loss < self.best - self.min_delta:
            self.best = loss
            self.best_epoch = self.epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def stopping_epoch(losses: Sequence[float], patience: int = 5, min_delta: float = 0.001) -> int | None:
    """Epoch (1-based) at which the rule fires on a fixed sequence, else None."""
    rule = EarlyStopping(patience, min_delta)
    for loss in losses:
        if rule.update(loss):
            return rule.epoch
    return None


def accuracy(logits, labels) -> float:
    """Fraction of rows whose argmax (lowest index on ties) equals the label."""
    logits = logits.data if isinstance(logits, T.Tensor) else np.asarray(logits)
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise DataError("accuracy of an empty batch")
    return float(np.mean(np.argmax(logits, axis=-1) == labels))


# training loops


def stack_dataset(dataset: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """``(inputs [n, s, d + 1], 0-based labels [n])`` from designs or (design, label) pairs."""
    inputs, labels = [], []
    for item in dataset:
        if isinstance(item, DesignMatrix):
            design, label = item, item.class_label
        else:
            design, label = item
        inputs.append(design.as_input() if isinstance(design, DesignMatrix) else np.asarray(design))
        labels.append(int(label) - 1)
    shapes = {x.shape for x in inputs}
    if len(shapes) != 1:
        raise DataError(f"all designs must share one shape, got {sorted(shapes)}")
    return np.stack(inputs), np.asarray(labels, dtype=np.int64)


def _predict(model: TransOptModel, X: np.ndarray, batch_size: int = 64) -> np.ndarray:
    model.eval()
    out = []
    with T.no_grad():
        for i in range(0, len(X), batch_size):
            out.append(model.classify(X[i : i + batch_size]).data)
    return np.concatenate(out) if out else np.zeros((0, N_CLASSES))


def _mean_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    return T.cross_entropy_logits(T.Tensor(logits), labels).item()


def fold_seed(train_cfg: TrainConfig, fold_index: int) -> int:
    return hash_words(train_cfg.seed, fold_index)


def train_fold(
    model_cfg: ModelConfig,
    dataset,
    fold_assignment,
    fold_index: int,
    train_cfg: TrainConfig,
    *,
    return_model: bool = False,
):
    """Train on every fold but ``fold_index`` and test on that fold.

    ``dataset`` is a sequence of designs (or ``(design, label)`` pairs) or an
    already stacked ``(inputs, labels)`` tuple as built by
    :func:`stack_dataset`.
    """
    if isinstance(dataset, tuple) and len(dataset) == 2 and isinstance(dataset[0], np.ndarray):
        X, y = dataset
    else:
        X, y = stack_dataset(dataset)
    fold_assignment = np.asarray(fold_assignment)
    test_idx = np.flatnonzero(fold_assignment == fold_index)
    pool_idx = np.flatnonzero(fold_assignment != fold_index)
    if len(test_idx) == 0 or len(pool_idx) == 0:
        raise DataError(f"fold {fold_index} leaves an empty train or test split")

    rng = SplitRng(fold_seed(train_cfg, fold_index))
    keep, held = stratified_holdout(y[pool_idx], train_cfg.val_fraction, rng.split(_STREAM_VAL))
    train_idx, val_idx = pool_idx[keep], pool_idx[held]
    if len(train_idx) == 0 or len(val_idx) == 0:
        raise DataError("validation split left no training or validation data")

    model = TransOptModel.init(model_cfg, rng.split(_STREAM_INIT).next_u64())
    names = list(model.params)
    tensors = [model.params[n] for n in names]
    state = AdamState.zeros_like([p.data for p in tensors])
    shuffle_rng = rng.split(_STREAM_SHUFFLE)
    dropout_rng = rng.split(_STREAM_DROPOUT)
    stopper = EarlyStopping(train_cfg.patience, train_cfg.min_delta)

    train_curve, val_curve = [], []
    best_state, best_val = model.state_dict(), math.inf
    step = 0
    for _ in range(train_cfg.max_epochs):
        model.train()
        order = train_idx[shuffle_rng.permutation(len(train_idx))]
        total = 0.0
        for start in range(0, len(order), train_cfg.batch_size):
            batch = order[start : start + train_cfg.batch_size]
            model.zero_grad()
            loss = T.cross_entropy_logits(model.classify(X[batch], dropout_rng), y[batch])
            loss.backward()
            step += 1
            adam_step(
                [p.data for p in tensors],
                [p.grad if p.grad is not None else np.zeros_like(p.data) for p in tensors],
                state,
                step,
                train_cfg.lr,
            )
            total += loss.item() * len(batch)
        train_curve.append(total / len(order))
        val_loss = _mean_loss(_predict(model, X[val_idx]), y[val_idx])
        val_curve.append(val_loss)
        if val_loss < best_val:
            best_val, best_state = val_loss, model.state_dict()
        if stopper.update(val_loss):
            break

    model.load_state_dict(best_state)
    test_logits = _predict(model, X[test_idx])
    result = FoldResult(
        fold_index=int(fold_index),
        test_accuracy=accuracy(test_logits, y[test_idx]),
        epochs_run=len(val_curve),
        train_loss_curve=train_curve,
        val_loss_curve=val_curve,
        best_val_loss=min(val_curve),
        best_epoch=int(np.argmin(val_curve)) + 1,
        train_accuracy=accuracy(_predict(model, X[train_idx]), y[train_idx]),
        test_indices=[int(i) for i in test_idx],
        test_predictions=[int(p) + 1 for p in np.argmax(test_logits, axis=1)],
    )
    return (result, model) if return_model else result


def summarize(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    labels,
    folds: Sequence[FoldResult],
    data_config: dict | None = None,
) -> CVReport:
    """Aggregate fold results (ordered by fold index) into a report."""
    folds = sorted(folds, key=lambda f: f.fold_index)
    labels = np.asarray(labels)
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for f in folds:
        for idx, pred in zip(f.test_indices, f.test_predictions):
            confusion[labels[idx], pred - 1] += 1
    accs = np.array([f.test_accuracy for f in folds])
    return CVReport(
        model_config=asdict(model_cfg),
        train_config=asdict(train_cfg),
        data_config=dict(data_config or {}),
        folds=list(folds),
        mean_accuracy=float(np.mean(accs)),
        std_accuracy=float(np.std(accs)),
        confusion_matrix=confusion.tolist(),
        parameter_count=model_cfg.parameter_count(),
    )


def cross_validate(
    model_cfg: ModelConfig,
    dataset,
    train_cfg: TrainConfig,
    *,
    data_config: dict | None = None,
    jobs: int = 1,
) -> CVReport:
    """Stratified k-fold CV; a fresh model is initialised for every fold.

    With ``jobs > 1`` folds run in worker processes.  Each fold draws from
    its own seed stream, so the report does not depend on ``jobs``.
    """
    X, y = dataset if isinstance(dataset, tuple) else stack_dataset(dataset)
    assignment = stratified_kfold(y, train_cfg.folds, train_cfg.seed)
    if jobs <= 1:
        results = [train_fold(model_cfg, (X, y), assignment, k, train_cfg) for k in range(train_cfg.folds)]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(train_fold, model_cfg, (X, y), assignment, k, train_cfg)
                for k in range(train_cfg.folds)
            ]
            results = [f.result() for f in futures]
    return summarize(model_cfg, train_cfg, y, results, data_config)


def with_overrides(cfg: TrainConfig, **overrides) -> TrainConfig:
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
