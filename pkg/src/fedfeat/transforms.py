"""The fourteen feature transformations and the mask algebra for binary ones.

For every binary transformation ``T`` the mask scheme uses ``encrypt = T``
itself; because ``T(T(f1, f2), m) == T(T(f1, m), f2)`` holds for sum,
subtraction, multiplication and division, decrypting ``T(encrypt(f1, m), f2)``
with the inverse of ``T(., m)`` yields ``T(f1, f2)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DataError

DIVISION_EPS = 1e-6
_SQRT_MAX = np.sqrt(np.finfo(np.float64).max)


class MaskGroup(str, enum.Enum):
    ADDITIVE = "additive"
    MULTIPLICATIVE = "multiplicative"
    NONE = "none"


class TransformKind(str, enum.Enum):
    LOG = "log"
    SQRT_ABS = "sqrt_abs"
    FREQUENCY = "frequency"
    SQUARE = "square"
    ROUND = "round"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    ISOTONIC = "isotonic"
    ZSCORE = "zscore"
    NORMALIZE = "normalize"
    SUM = "sum"
    SUBTRACTION = "subtraction"
    MULTIPLICATION = "multiplication"
    DIVISION = "division"

    @property
    def arity(self) -> int:
        return 2 if self in _BINARY_GROUP else 1

    @property
    def mask_group(self) -> MaskGroup:
        return _BINARY_GROUP.get(self, MaskGroup.NONE)

    @property
    def commutative(self) -> bool:
        return self in (TransformKind.SUM, TransformKind.MULTIPLICATION)

    @classmethod
    def parse(cls, name: str) -> "TransformKind":
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown transformation {name!r}") from None


_BINARY_GROUP = {
    TransformKind.SUM: MaskGroup.ADDITIVE,
    TransformKind.SUBTRACTION: MaskGroup.ADDITIVE,
    TransformKind.MULTIPLICATION: MaskGroup.MULTIPLICATIVE,
    TransformKind.DIVISION: MaskGroup.MULTIPLICATIVE,
}

UNARY_KINDS = tuple(k for k in TransformKind if k.arity == 1)
BINARY_KINDS = tuple(k for k in TransformKind if k.arity == 2)


def parse_kinds(names) -> list[TransformKind]:
    return [TransformKind.parse(n) if not isinstance(n, TransformKind) else n for n in names]


def round_half_away(x: np.ndarray) -> np.ndarray:
    whole = np.trunc(x)
    frac = x - whole
    return whole + np.where(np.abs(frac) >= 0.5, np.sign(x), 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def value_frequency(x: np.ndarray) -> np.ndarray:
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    return counts[inverse.reshape(-1)].astype(np.float64)


def pool_adjacent_violators(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted least-squares non-decreasing fit of ``y`` (already in x order)."""
    means: list[float] = []
    weights: list[float] = []
    sizes: list[int] = []
    for yi, wi in zip(y.tolist(), w.tolist()):
        means.append(yi)
        weights.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, s2 = means.pop(), weights.pop(), sizes.pop()
            total = weights[-1] + w2
            means[-1] = (means[-1] * weights[-1] + m2 * w2) / total
            weights[-1] = total
            sizes[-1] += s2
    return np.repeat(means, sizes)


def isotonic_fit(x: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Fitted value of a non-decreasing regression of ``target`` on ``x``.

    Tied ``x`` values are pooled first, so they always get the same output.
    """
    uniq, inverse = np.unique(x, return_inverse=True)
    inverse = inverse.reshape(-1)
    w = np.bincount(inverse, minlength=len(uniq)).astype(np.float64)
    ysum = np.bincount(inverse, weights=np.asarray(target, dtype=np.float64), minlength=len(uniq))
    fitted = pool_adjacent_violators(ysum / w, w)
    return fitted[inverse]


def apply_unary(kind: TransformKind, f: np.ndarray, labels: np.ndarray | None = None) -> np.ndarray:
    kind = TransformKind(kind)
    if kind.arity != 1:
        raise ValueError(f"{kind.value} is not unary")
    x = np.asarray(f, dtype=np.float64)
    if kind is TransformKind.LOG:
        return np.log1p(np.abs(x))
    if kind is TransformKind.SQRT_ABS:
        return np.sqrt(np.abs(x))
    if kind is TransformKind.FREQUENCY:
        return value_frequency(x)
    if kind is TransformKind.SQUARE:
        # saturate instead of overflowing to inf
        c = np.clip(x, -_SQRT_MAX, _SQRT_MAX)
        return c * c
    if kind is TransformKind.ROUND:
        return round_half_away(x)
    if kind is TransformKind.TANH:
        return np.tanh(x)
    if kind is TransformKind.SIGMOID:
        return sigmoid(x)
    if kind is TransformKind.ISOTONIC:
        if labels is None:
            raise ValueError("isotonic needs labels")
        return isotonic_fit(x, labels)
    if kind is TransformKind.ZSCORE:
        scale = np.max(np.abs(x)) if x.size else 0.0
        if scale == 0:
            return np.zeros_like(x)
        # z-scores are scale free; dividing first keeps the moments finite
        y = x / scale
        sd = y.std()
        if not sd > 0:
            return np.zeros_like(x)
        return (y - y.mean()) / sd
    if kind is TransformKind.NORMALIZE:
        if x.size == 0:
            return x.copy()
        lo, hi = x.min(), x.max()
        if hi == lo:
            return np.zeros_like(x)
        # halves keep hi - lo finite near the top of the float range
        r = (x / 2 - lo / 2) / (hi / 2 - lo / 2)
        return np.clip(2.0 * r - 1.0, -1.0, 1.0)
    raise AssertionError(kind)


def guard_denominator(d: np.ndarray, eps: float = DIVISION_EPS) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    return np.where(np.abs(d) < eps, np.where(d < 0, -eps, eps), d)


def apply_binary(kind: TransformKind, f1: np.ndarray, f2: np.ndarray, eps: float = DIVISION_EPS) -> np.ndarray:
    kind = TransformKind(kind)
    if kind.arity != 2:
        raise ValueError(f"{kind.value} is not binary")
    a = np.asarray(f1, dtype=np.float64)
    b = np.asarray(f2, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"length mismatch: {a.shape} vs {b.shape}")
    if kind is TransformKind.SUM:
        return a + b
    if kind is TransformKind.SUBTRACTION:
        return a - b
    if kind is TransformKind.MULTIPLICATION:
        return a * b
    return a / guard_denominator(b, eps)


def apply_transform(kind: TransformKind, parents, labels: np.ndarray | None = None) -> np.ndarray:
    kind = TransformKind(kind)
    if kind.arity == 1:
        (f,) = parents
        return apply_unary(kind, f, labels)
    f1, f2 = parents
    return apply_binary(kind, f1, f2)


@dataclass(frozen=True)
class MaskVector:
    values: np.ndarray
    group: MaskGroup

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            raise ValueError("mask values must be finite")
        if self.group is MaskGroup.MULTIPLICATIVE and vals.size and not (
            np.all(np.abs(vals) >= 0.5) and np.all(np.abs(vals) <= 2.0)
        ):
            raise ValueError("multiplicative mask magnitudes must lie in [0.5, 2]")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


def additive_mask_scale(f1: np.ndarray) -> float:
    f1 = np.asarray(f1, dtype=np.float64)
    return 10.0 * (1.0 + (float(np.max(np.abs(f1))) if f1.size else 0.0))


def sample_mask(
    group: MaskGroup | str,
    length: int,
    seed: int | np.random.Generator,
    scale: float = 1.0,
) -> MaskVector:
    """Random mask; ``scale`` is the half-width of the additive range.

    Multiplicative masks draw magnitude from U[0.5, 2] and a fair random sign.
    """
    group = MaskGroup(group)
    if length < 1:
        raise ValueError("mask length must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if group is MaskGroup.ADDITIVE:
        values = rng.uniform(-scale, scale, size=length) if scale > 0 else np.zeros(length)
    elif group is MaskGroup.MULTIPLICATIVE:
        magnitude = rng.uniform(0.5, 2.0, size=length)
        values = np.where(rng.random(length) < 0.5, -magnitude, magnitude)
    else:
        raise ValueError("unary transformations have no mask group")
    return MaskVector(values, group)


def _check_group(kind: TransformKind, mask: MaskVector, n: int) -> None:
    kind = TransformKind(kind)
    if kind.arity != 2 or mask.group is not kind.mask_group:
        raise ValueError(f"mask group {mask.group.value} does not match {kind.value}")
    if len(mask) != n:
        raise DataError(f"mask length {len(mask)} != feature length {n}")


def mask_encrypt(kind: TransformKind, f: np.ndarray, mask: MaskVector) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    _check_group(kind, mask, len(f))
    return apply_binary(kind, f, mask.values)


def mask_decrypt(kind: TransformKind, g: np.ndarray, mask: MaskVector) -> np.ndarray:
    kind = TransformKind(kind)
    g = np.asarray(g, dtype=np.float64)
    _check_group(kind, mask, len(g))
    m = mask.values
    if kind is TransformKind.SUM:
        return g - m
    if kind is TransformKind.SUBTRACTION:
        return g + m
    if kind is TransformKind.MULTIPLICATION:
        return g / m
    return g * m
