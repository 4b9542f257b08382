from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DataError


class DecisionTree:
    """CART classification tree with Gini impurity (no pruning).

    Nodes are kept in flat arrays; ``feature == -1`` marks a leaf. At each node
    ``max_features`` candidate features are drawn; if none of them can split
    the node the remaining features are tried before giving up.
    """

    def __init__(self, max_depth: int | None = 8, min_samples_split: int = 2, max_features: int | None = None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int, rng: np.random.Generator) -> "DecisionTree":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.n_classes = n_classes
        d = X.shape[1]
        k = d if self.max_features is None else max(1, min(d, self.max_features))
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(counts):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(counts)
            return len(feature) - 1

        root = new_node(np.bincount(y, minlength=n_classes))
        stack = [(root, np.arange(len(y)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            counts = value[node]
            if (
                (self.max_depth is not None and depth >= self.max_depth)
                or len(idx) < self.min_samples_split
                or np.count_nonzero(counts) <= 1
            ):
                continue
            perm = rng.permutation(d)
            split = _best_split(X[idx][:, perm[:k]], y[idx], n_classes)
            if split is None and k < d:
                split = _best_split(X[idx][:, perm[k:]], y[idx], n_classes)
                if split is not None:
                    split = (perm[k + split[0]], split[1])
            elif split is not None:
                split = (perm[split[0]], split[1])
            if split is None:
                continue
            f, thr = split
            go_left = X[idx, f] <= thr
            li, ri = idx[go_left], idx[~go_left]
            feature[node], threshold[node] = int(f), float(thr)
            left[node] = new_node(np.bincount(y[li], minlength=n_classes))
            right[node] = new_node(np.bincount(y[ri], minlength=n_classes))
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))

        self.feature_ = np.array(feature)
        self.threshold_ = np.array(threshold)
        self.left_ = np.array(left)
        self.right_ = np.array(right)
        self.value_ = np.array(value)
        return self

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature_[node] >= 0
        while active.any():
            r = rows[active]
            n = node[r]
            go_left = X[r, self.feature_[n]] <= self.threshold_[n]
            node[r] = np.where(go_left, self.left_[n], self.right_[n])
            active = self.feature_[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.value_[self.apply(X)], axis=1)


def _best_split(Xn: np.ndarray, yn: np.ndarray, n_classes: int):
    """Lowest weighted Gini split over the columns of ``Xn``: ``(column, threshold)`` or None."""
    n, f = Xn.shape
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ys = yn[order]
    onehot = np.zeros((n, f, n_classes))
    np.put_along_axis(onehot, ys[:, :, None], 1.0, axis=2)
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    cl = cum[:-1]
    cr = total[None] - cl
    nl = np.arange(1, n)[:, None].astype(np.float64)
    nr = n - nl
    # maximising sum(c^2)/n on both sides minimises weighted Gini
    score = (cl**2).sum(axis=2) / nl + (cr**2).sum(axis=2) / nr
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    best = np.unravel_index(np.argmax(score), score.shape)
    i, col = best
    lo, hi = xs[i, col], xs[i + 1, col]
    thr = lo / 2 + hi / 2
    if not lo <= thr < hi:
        thr = lo
    return int(col), float(thr)


@dataclass
class RandomForest:
    """Bagged CART trees with sqrt feature sub-sampling and a majority vote.

    Tree ``i`` uses its own generator spawned from the forest seed, so trees
    are reproducible independently of how they are scheduled.
    """

    n_trees: int = 100
    max_depth: int | None = 8
    min_samples_split: int = 2
    max_features: str | int | None = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForest":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2 or len(X) == 0:
            raise DataError("random forest needs a non-empty 2-D design matrix")
        self.classes_, yi = np.unique(y, return_inverse=True)
        yi = yi.reshape(-1)
        d = X.shape[1]
        if self.max_features == "sqrt":
            k = max(1, int(math.sqrt(d)))
        elif self.max_features is None:
            k = d
        else:
            k = int(self.max_features)
        self.trees_ = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_trees):
            rng = np.random.default_rng(child)
            rows = rng.integers(0, len(X), len(X)) if self.bootstrap else np.arange(len(X))
            tree = DecisionTree(self.max_depth, self.min_samples_split, k)
            self.trees_.append(tree.fit(X[rows], yi[rows], len(self.classes_), rng))
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        votes = np.zeros((len(X), len(self.classes_)), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees_:
            votes[rows, tree.predict(X)] += 1
        return self.classes_[np.argmax(votes, axis=1)]
