from __future__ import annotations

import numpy as np

from ..errors import DataError


def smote(minority: np.ndarray, n_new: int, k_nn: int = 5, seed: int | np.random.Generator = 0) -> np.ndarray:
    """Synthetic minority samples on segments between a point and one of its k nearest neighbours.

    ``k_nn`` is capped at ``len(minority) - 1``. Each synthetic row is
    ``a + u * (b - a)`` with ``u ~ U[0, 1]``.
    """
    X = np.atleast_2d(np.asarray(minority, dtype=np.float64))
    if len(X) < 2:
        raise DataError("SMOTE needs at least two minority samples")
    if k_nn < 1:
        raise ValueError("k_nn must be >= 1")
    if n_new <= 0:
        return np.empty((0, X.shape[1]))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    k = min(k_nn, len(X) - 1)

    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(d2, np.inf)
    neighbours = np.argsort(d2, axis=1, kind="stable")[:, :k]

    base = rng.integers(0, len(X), n_new)
    pick = neighbours[base, rng.integers(0, k, n_new)]
    u = rng.random((n_new, 1))
    a, b = X[base], X[pick]
    return a + u * (b - a)
