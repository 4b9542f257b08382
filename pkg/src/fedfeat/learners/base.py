"""Base/test models and cross-validated f1 scoring."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..dataset import kfold_indices
from ..errors import ConfigError, DataError
from .forest import RandomForest
from .logistic import LogisticRegression

RANDOM_FOREST = "random_forest"
LOGISTIC_REGRESSION = "logistic_regression"


@dataclass(frozen=True)
class BaseModelKind:
    name: str = LOGISTIC_REGRESSION
    n_trees: int = 100
    max_depth: int | None = 8
    min_samples_split: int = 2
    lr: float = 0.5
    iterations: int = 300
    l2: float = 1e-4

    def __post_init__(self) -> None:
        if self.name not in (RANDOM_FOREST, LOGISTIC_REGRESSION):
            raise ConfigError(f"unknown base model {self.name!r}")
        if self.n_trees < 1 or self.min_samples_split < 2 or (self.max_depth is not None and self.max_depth < 1):
            raise ConfigError("random forest needs n_trees >= 1, min_samples_split >= 2, max_depth >= 1")
        if self.lr <= 0 or self.iterations < 1 or self.l2 < 0:
            raise ConfigError("logistic regression needs lr > 0, iterations >= 1, l2 >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def random_forest(cls, **kw) -> "BaseModelKind":
        return cls(name=RANDOM_FOREST, **kw)

    @classmethod
    def logistic_regression(cls, **kw) -> "BaseModelKind":
        return cls(name=LOGISTIC_REGRESSION, **kw)


def fit_base(kind: BaseModelKind, X: np.ndarray, y: np.ndarray, seed: int = 0):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("X must be a non-empty 2-D matrix")
    if len(y) != len(X):
        raise DataError("X and y disagree on the number of rows")
    if kind.name == LOGISTIC_REGRESSION:
        return LogisticRegression(kind.lr, kind.iterations, kind.l2).fit(X, y)
    return RandomForest(kind.n_trees, kind.max_depth, kind.min_samples_split, seed=seed).fit(X, y)


def predict(model, X: np.ndarray) -> np.ndarray:
    return model.predict(np.asarray(X, dtype=np.float64))


def f1_score(pred: Sequence[int], truth: Sequence[int], positive: int = 1) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DataError("pred and truth must have equal length")
    tp = int(np.sum((pred == positive) & (truth == positive)))
    fp = int(np.sum((pred == positive) & (truth != positive)))
    fn = int(np.sum((pred != positive) & (truth == positive)))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def macro_f1(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean per-class f1 over the classes present in either vector."""
    labels = np.union1d(np.unique(pred), np.unique(truth))
    return float(np.mean([f1_score(pred, truth, c) for c in labels]))


def fold_f1(pred: np.ndarray, truth: np.ndarray, n_classes: int) -> float:
    return f1_score(pred, truth, 1) if n_classes == 2 else macro_f1(pred, truth)


@dataclass
class CVResult:
    mean: float
    per_fold: list[float] = field(default_factory=list)


def cv_f1(
    kind: BaseModelKind,
    X: np.ndarray,
    y: np.ndarray,
    k: int = 10,
    seed: int = 0,
    folds: list[tuple[np.ndarray, np.ndarray]] | None = None,
) -> float:
    """Mean test-fold f1 over shuffled k folds.

    Binary labels score the f1 of class 1; more classes use the macro average.
    A training fold holding a single class predicts that class everywhere.
    """
    return cv_f1_detail(kind, X, y, k, seed, folds).mean


def cv_f1_detail(kind, X, y, k=10, seed=0, folds=None) -> CVResult:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim == 1:
        X = X[:, None]
    if folds is None:
        folds = kfold_indices(len(y), k, seed)
    n_classes = len(np.unique(y))
    scores = []
    for i, (train, test) in enumerate(folds):
        ytr = y[train]
        if len(np.unique(ytr)) < 2:
            pred = np.full(len(test), ytr[0])
        else:
            pred = predict(fit_base(kind, X[train], ytr, seed + i), X[test])
        scores.append(fold_f1(pred, y[test], n_classes))
    return CVResult(float(np.mean(scores)), scores)
