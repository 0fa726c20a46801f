"""Multinomial logistic regression over flat weight vectors.

A model for C classes on d features is a flat float64 array of length
C * (d + 1), row-major by class, with the bias as the last entry of each
class row. All training and evaluation here is pure and bit-deterministic:
full-batch gradient descent with a fixed summation order, so any two
parties running the same call get identical bytes back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int = 10

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if labels.shape != (feats.shape[0],):
            raise ValueError("feature rows and labels must align")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if len(labels) and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    local_epochs: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ValueError("learning_rate must be finite and positive")
        if self.local_epochs < 1:
            raise ValueError("local_epochs must be >= 1")


def weight_length(num_classes: int, num_features: int) -> int:
    return num_classes * (num_features + 1)


def zero_weights(num_classes: int, num_features: int) -> np.ndarray:
    return np.zeros(weight_length(num_classes, num_features), dtype=np.float64)


def _augment(features: np.ndarray) -> np.ndarray:
    """Append the constant bias column."""
    ones = np.ones((features.shape[0], 1), dtype=np.float64)
    return np.concatenate([features, ones], axis=1)


def _as_matrix(weights: np.ndarray, num_classes: int, num_features: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    expected = weight_length(num_classes, num_features)
    if w.shape != (expected,):
        raise ValueError(
            f"weight vector has length {w.shape}, expected ({expected},) "
            f"for {num_classes} classes x {num_features} features"
        )
    return w.reshape(num_classes, num_features + 1)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_cross_entropy(weights: np.ndarray, data: Dataset) -> float:
    """Mean cross-entropy of the softmax model on the dataset."""
    if len(data) == 0:
        raise ValueError("cannot compute loss on an empty dataset")
    w = _as_matrix(weights, data.num_classes, data.num_features)
    logits = _augment(data.features) @ w.T
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(data)), data.labels]
    return float(np.mean(log_norm - picked))


def train_local(init: np.ndarray, data: Dataset, cfg: TrainConfig) -> np.ndarray:
    """Run `local_epochs` full-batch gradient-descent steps from `init`.

    Deterministic given (init, data, cfg). Raises if the dataset is empty
    or a step produces a non-finite gradient (the error names the step).
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    w = _as_matrix(init, data.num_classes, data.num_features).copy()
    x = _augment(data.features)
    onehot = np.zeros((len(data), data.num_classes), dtype=np.float64)
    onehot[np.arange(len(data)), data.labels] = 1.0
    for epoch in range(cfg.local_epochs):
        probs = _softmax(x @ w.T)
        grad = (probs - onehot).T @ x / len(data)
        if not np.all(np.isfinite(grad)):
            raise ValueError(f"non-finite gradient at epoch {epoch}")
        w -= cfg.learning_rate * grad
    return w.ravel()


def accuracy_of_many(weight_matrix: np.ndarray, data: Dataset) -> np.ndarray:
    """Top-1 accuracy for a batch of weight vectors, one row per model.

    Ties in the argmax go to the lowest class id, which keeps evaluation
    reproducible under re-execution.
    """
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    stacked = np.atleast_2d(np.asarray(weight_matrix, dtype=np.float64))
    k = stacked.shape[0]
    expected = weight_length(data.num_classes, data.num_features)
    if stacked.shape[1] != expected:
        raise ValueError(
            f"weight vectors have length {stacked.shape[1]}, expected {expected}"
        )
    flat = stacked.reshape(k * data.num_classes, data.num_features + 1)
    logits = _augment(data.features) @ flat.T
    logits = logits.reshape(len(data), k, data.num_classes)
    preds = logits.argmax(axis=2)
    return (preds == data.labels[:, None]).mean(axis=0)


@dataclass(frozen=True)
class UtilityEvaluator:
    """Utility function u(.): top-1 accuracy on a shared held-out test set."""

    test_set: Dataset

    def __post_init__(self):
        if len(self.test_set) == 0:
            raise ValueError("utility evaluator needs a non-empty test set")

    def utility(self, weights: np.ndarray) -> float:
        return float(accuracy_of_many(weights, self.test_set)[0])

    def utilities(self, weight_matrix: np.ndarray) -> np.ndarray:
        return accuracy_of_many(weight_matrix, self.test_set)


def evaluate(weights: np.ndarray, evaluator: UtilityEvaluator) -> float:
    """Utility of a single model, always in [0, 1]."""
    return evaluator.utility(weights)


def average_weights(models: list[tuple[np.ndarray, float]]) -> np.ndarray:
    """Weighted mean of weight vectors, summed in ascending index order.

    The fixed order makes the result bit-deterministic; permuting the
    inputs changes only floating-point reassociation.
    """
    if not models:
        raise ValueError("average_weights needs at least one model")
    vectors = [np.asarray(v, dtype=np.float64) for v, _ in models]
    shape = vectors[0].shape
    for idx, v in enumerate(vectors):
        if v.shape != shape:
            raise ValueError(f"model {idx} has shape {v.shape}, expected {shape}")
    total = 0.0
    acc = np.zeros(shape, dtype=np.float64)
    for v, (_, raw_wt) in zip(vectors, models):
        wt = float(raw_wt)
        if not np.isfinite(wt) or wt <= 0:
            raise ValueError("model weights must be finite and positive")
        acc += wt * v
        total += wt
    if total == 0.0:
        raise ValueError("total weight must be positive")
    return acc / total
