from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass
class LogisticRegression:
    """One-vs-rest logistic regression fit by full-batch gradient descent.

    Inputs are standardised with the training mean/std. Binary problems use a
    single weight vector; with K > 2 classes K independent scorers are trained
    and the arg-max wins.
    """

    lr: float = 0.5
    iterations: int = 300
    l2: float = 1e-4

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LogisticRegression":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2 or len(X) == 0:
            raise DataError("logistic regression needs a non-empty 2-D design matrix")
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise DataError("logistic regression needs at least two classes")
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        Z = np.column_stack([np.ones(len(X)), (X - self.mean_) / self.scale_])

        if len(self.classes_) == 2:
            T = (y == self.classes_[1]).astype(np.float64)[:, None]
        else:
            T = (y[:, None] == self.classes_[None, :]).astype(np.float64)
        W = np.zeros((Z.shape[1], T.shape[1]))
        n = len(Z)
        reg = np.ones((Z.shape[1], 1))
        reg[0] = 0.0
        for _ in range(self.iterations):
            P = _sigmoid(Z @ W)
            grad = Z.T @ (P - T) / n + self.l2 * reg * W
            W -= self.lr * grad
        self.coef_ = W
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        Z = np.column_stack([np.ones(len(X)), (X - self.mean_) / self.scale_])
        return Z @ self.coef_

    def predict(self, X: np.ndarray) -> np.ndarray:
        s = self.decision_function(X)
        if s.shape[1] == 1:
            return np.where(s[:, 0] > 0, self.classes_[1], self.classes_[0])
        return self.classes_[np.argmax(s, axis=1)]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
