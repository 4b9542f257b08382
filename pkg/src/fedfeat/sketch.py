"""Quantile Sketch Arrays (QSA): per-class equal-width bin counts of a feature.

A feature is summarised one-vs-all: for a chosen positive class, one column
counts the positive rows and one counts the rest. Each column is binned on
its own min/max, then affinely scaled to ``[-k, k]`` before it is fed to a
judge. Two-parent QSAs concatenate the single-parent blocks in parent order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError

DEFAULT_BINS = 200


@dataclass(frozen=True)
class SketchConfig:
    m: int = DEFAULT_BINS
    k: float = 1.0
    float_width: int = 4

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not self.k > 0:
            raise ValueError("k must be positive")
        if self.float_width not in (4, 8):
            raise ValueError("float_width must be 4 or 8")

    def flat_length(self, arity: int) -> int:
        return arity * 2 * self.m


def bin_index(value: float, lo: float, hi: float, m: int) -> int:
    """Equal-width bin of ``value`` within ``[lo, hi]``.

    The maximum goes to the last bin; a constant range puts everything in bin 0.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not lo <= value <= hi:
        raise ValueError(f"value {value} outside [{lo}, {hi}]")
    if hi == lo or value == hi:
        return 0 if hi == lo else m - 1
    return min(int(math.floor((value - lo) / (hi - lo) * m)), m - 1)


def class_sketch(values: np.ndarray, in_class: np.ndarray, m: int) -> np.ndarray:
    """Bin counts of the rows selected by ``in_class``, binned on their own min/max."""
    values = np.asarray(values, dtype=np.float64)
    in_class = np.asarray(in_class, dtype=bool)
    if values.shape != in_class.shape:
        raise DataError("mask length must equal values length")
    sub = values[in_class]
    counts = np.zeros(m, dtype=np.int64)
    if sub.size == 0:
        return counts
    lo, hi = sub.min(), sub.max()
    if hi == lo:
        counts[0] = sub.size
        return counts
    ids = np.floor((sub - lo) / (hi - lo) * m).astype(np.int64)
    # rounding can push a near-max point to m; it belongs to the top bin
    np.minimum(ids, m - 1, out=ids)
    return np.bincount(ids, minlength=m)


def scale_column(raw: np.ndarray, k: float) -> np.ndarray:
    """Affine map of ``raw`` onto ``[-k, k]``; a flat column maps to zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.zeros_like(raw)
    out = -k + 2.0 * k * (raw - lo) / (hi - lo)
    return np.clip(out, -k, k)


@dataclass(frozen=True)
class QuantileSketchArray:
    """Raw counts have shape ``(arity, 2, m)``: parent, then (positive, rest)."""

    raw: np.ndarray
    scaled: np.ndarray
    positive_class: int

    @property
    def parent_arity(self) -> int:
        return self.raw.shape[0]

    @property
    def m(self) -> int:
        return self.raw.shape[2]

    def flatten(self) -> np.ndarray:
        return self.scaled.reshape(-1)

    def to_bytes(self, float_width: int = 4) -> bytes:
        return encode_floats(self.flatten(), float_width)

    def nbytes(self, float_width: int = 4) -> int:
        return self.scaled.size * float_width


def feature_sketch(values: np.ndarray, labels: np.ndarray, positive_class: int, m: int) -> np.ndarray:
    """Raw ``(2, m)`` block of one feature: positive-class column then rest column."""
    labels = np.asarray(labels)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != labels.shape:
        raise DataError("feature and labels must have the same length")
    pos = labels == positive_class
    return np.stack([class_sketch(values, pos, m), class_sketch(values, ~pos, m)])


def scale_block(raw: np.ndarray, k: float) -> np.ndarray:
    """Scale every class column of a ``(..., m)`` block independently."""
    flat = raw.reshape(-1, raw.shape[-1])
    return np.stack([scale_column(col, k) for col in flat]).reshape(raw.shape)


def build_qsa(
    parents: Sequence[np.ndarray],
    labels: np.ndarray,
    positive_class: int,
    cfg: SketchConfig | None = None,
) -> QuantileSketchArray:
    cfg = cfg or SketchConfig()
    parents = [np.asarray(getattr(p, "values", p), dtype=np.float64) for p in parents]
    if not 1 <= len(parents) <= 2:
        raise DataError(f"QSA supports 1 or 2 parents, got {len(parents)}")
    raw = np.stack([feature_sketch(p, labels, positive_class, cfg.m) for p in parents])
    return QuantileSketchArray(raw=raw, scaled=scale_block(raw, cfg.k), positive_class=int(positive_class))


def one_vs_all_classes(n_classes: int) -> list[int]:
    """Positive classes to sketch: one split for binary labels, one per class otherwise."""
    return [1] if n_classes == 2 else list(range(n_classes))


def encode_floats(values: np.ndarray, float_width: int) -> bytes:
    dtype = {4: "<f4", 8: "<f8"}[float_width]
    return np.ascontiguousarray(values, dtype=dtype).tobytes()


def decode_floats(payload: bytes, float_width: int) -> np.ndarray:
    dtype = {4: "<f4", 8: "<f8"}[float_width]
    return np.frombuffer(payload, dtype=dtype).astype(np.float64)


def crop_indices(rows: int, rate: float, seed: int | np.random.Generator) -> np.ndarray:
    """Sorted uniform sample (without replacement) of ``ceil(rate * rows)`` row indices."""
    if not 0 < rate <= 1:
        raise ValueError("rate must lie in (0, 1]")
    n = int(math.ceil(rate * rows - 1e-9))
    if n < 1:
        raise DataError("crop would be empty")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return np.sort(rng.choice(rows, size=n, replace=False))


def crop_feature(
    values: np.ndarray, labels: np.ndarray, rate: float, seed: int | np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values)
    labels = np.asarray(labels)
    idx = crop_indices(len(values), rate, seed)
    return values[idx], labels[idx]
