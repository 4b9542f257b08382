"""One-hidden-layer MLP judge: ReLU hidden layer, softmax over (useful, useless)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import DataError

USEFUL = 1
USELESS = 0


@dataclass(frozen=True)
class TrainHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l2: float = 1e-4
    dropout_rate: float = 0.5
    epochs: int = 200
    batch: int = 32
    seed: int = 0
    hidden_dim: int = 64
    patience: int = 20
    val_fraction: float = 0.1

    def __post_init__(self) -> None:
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.epochs < 0 or self.batch < 1 or self.hidden_dim < 1:
            raise ValueError("epochs >= 0, batch >= 1 and hidden_dim >= 1 required")


@dataclass
class JudgeModel:
    transform: Optional[str]
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    hyper: TrainHyper = field(default_factory=TrainHyper)
    corpus_fingerprint: str = ""
    metrics: dict = field(default_factory=dict, compare=False)

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def with_params(self, params: dict[str, np.ndarray]) -> "JudgeModel":
        return JudgeModel(self.transform, params["W1"], params["b1"], params["W2"], params["b2"],
                          self.hyper, self.corpus_fingerprint)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Rows of ``(p_useful, p_useless)``, dropout off."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.input_dim:
            raise DataError(f"expected input of length {self.input_dim}, got {X.shape[1]}")
        return _forward(self.params(), X, None)[-1]

    def __call__(self, qsa: np.ndarray, candidate=None) -> float:
        return float(self.predict_proba(qsa)[0, 0])

    def to_json(self) -> str:
        doc = {
            "transform": self.transform,
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "W1": self.W1.tolist(),
            "b1": self.b1.tolist(),
            "W2": self.W2.tolist(),
            "b2": self.b2.tolist(),
            "hyper": asdict(self.hyper),
            "corpus_fingerprint": self.corpus_fingerprint,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "JudgeModel":
        doc = json.loads(text)
        model = cls(
            transform=doc["transform"],
            W1=np.array(doc["W1"], dtype=np.float64).reshape(doc["hidden_dim"], doc["input_dim"]),
            b1=np.array(doc["b1"], dtype=np.float64),
            W2=np.array(doc["W2"], dtype=np.float64),
            b2=np.array(doc["b2"], dtype=np.float64),
            hyper=TrainHyper(**doc["hyper"]),
            corpus_fingerprint=doc.get("corpus_fingerprint", ""),
        )
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "JudgeModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def init_model(input_dim: int, hidden_dim: int = 64, seed: int = 0, transform: Optional[str] = None,
               hyper: TrainHyper | None = None) -> JudgeModel:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    a1 = np.sqrt(6.0 / (input_dim + hidden_dim))
    a2 = np.sqrt(6.0 / (hidden_dim + 2))
    return JudgeModel(
        transform=transform,
        W1=rng.uniform(-a1, a1, size=(hidden_dim, input_dim)),
        b1=np.zeros(hidden_dim),
        W2=rng.uniform(-a2, a2, size=(2, hidden_dim)),
        b2=np.zeros(2),
        hyper=hyper or TrainHyper(hidden_dim=hidden_dim),
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def dropout_mask(shape: tuple[int, ...], rate: float, seed: int | np.random.Generator) -> np.ndarray:
    """Inverted-dropout multipliers: 0 with probability ``rate``, else ``1/(1-rate)``."""
    if rate == 0:
        return np.ones(shape)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _forward(params, X, mask):
    z1 = X @ params["W1"].T + params["b1"]
    h = np.maximum(z1, 0.0)
    hd = h if mask is None else h * mask
    z2 = hd @ params["W2"].T + params["b2"]
    return z1, hd, z2, _softmax(z2)


def mlp_forward(model: JudgeModel, x: np.ndarray, dropout: tuple[float, int] | None = None) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != model.input_dim:
        raise DataError(f"expected input of length {model.input_dim}, got {x.shape[1]}")
    mask = None
    if dropout is not None:
        rate, seed = dropout
        mask = dropout_mask((1, model.hidden_dim), rate, seed)
    p = _forward(model.params(), x, mask)[-1][0]
    return float(p[0]), float(p[1])


def _targets(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y).astype(np.float64)
    return np.column_stack([y, 1.0 - y])


def mlp_loss_and_grad(
    model: JudgeModel,
    X: np.ndarray,
    y: np.ndarray,
    l2: float = 0.0,
    mask: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy plus ``l2 * (|W1|^2 + |W2|^2)`` and its gradient.

    ``y`` holds 1 for useful, 0 for useless. ``mask`` fixes the dropout
    multipliers of the hidden layer for this batch.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(X) == 0:
        raise DataError("empty batch")
    params = model.params()
    z1, hd, z2, p = _forward(params, X, mask)
    t = _targets(y)
    n = len(X)
    shifted = z2 - z2.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    penalty = l2 * (np.sum(params["W1"] ** 2) + np.sum(params["W2"] ** 2))
    loss = float(-(t * logp).sum() / n + penalty)

    dz2 = (p - t) / n
    grads = {"W2": dz2.T @ hd + 2 * l2 * params["W2"], "b2": dz2.sum(axis=0)}
    dh = dz2 @ params["W2"]
    if mask is not None:
        dh = dh * mask
    dz1 = dh * (z1 > 0)
    grads["W1"] = dz1.T @ X + 2 * l2 * params["W1"]
    grads["b1"] = dz1.sum(axis=0)
    return loss, grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()}, {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    hyper: TrainHyper,
    t: int,
) -> tuple[dict[str, np.ndarray], AdamState]:
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    b1, b2 = hyper.beta1, hyper.beta2
    new_params, m_new, v_new = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m = b1 * state.m[k] + (1 - b1) * g
        v = b2 * state.v[k] + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_params[k] = p - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
        m_new[k], v_new[k] = m, v
    return new_params, AdamState(m_new, v_new)


def _ce(model: JudgeModel, X: np.ndarray, y: np.ndarray) -> float:
    p = model.predict_proba(X)
    idx = np.where(np.asarray(y) == USEFUL, 0, 1)
    return float(-np.mean(np.log(np.clip(p[np.arange(len(p)), idx], 1e-300, None))))


def accuracy(model: JudgeModel, X: np.ndarray, y: np.ndarray) -> float:
    if len(X) == 0:
        return float("nan")
    pred = np.where(model.predict_proba(X)[:, 0] >= 0.5, USEFUL, USELESS)
    return float(np.mean(pred == np.asarray(y)))


def fingerprint(X: np.ndarray, y: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(y, dtype="<i8").tobytes())
    return h.hexdigest()


def train_judge(
    X: np.ndarray,
    y: np.ndarray,
    hyper: TrainHyper | None = None,
    transform: Optional[str] = None,
) -> JudgeModel:
    """Minibatch Adam with dropout; keeps the weights with the best validation loss.

    10% of the rows (at least one) are held out. Training stops early once the
    validation loss has not improved for ``hyper.patience`` epochs.
    """
    hyper = hyper or TrainHyper()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) != len(y) or len(X) == 0:
        raise DataError("corpus must be non-empty with one label per row")
    if len(np.unique(y)) < 2:
        raise DataError("corpus needs both useful and useless samples")

    rng = np.random.default_rng(hyper.seed)
    model = init_model(X.shape[1], hyper.hidden_dim, int(rng.integers(2**32)), transform, hyper)
    model.corpus_fingerprint = fingerprint(X, y)

    order = rng.permutation(len(X))
    n_val = max(1, int(round(hyper.val_fraction * len(X)))) if len(X) >= 2 else 0
    val, tr = order[:n_val], order[n_val:]
    Xtr, ytr, Xval, yval = X[tr], y[tr], X[val], y[val]

    params = model.params()
    state = AdamState.zeros_like(params)
    best = (_ce(model, Xval, yval) if n_val else _ce(model, Xtr, ytr), 0, params)
    stale = 0
    t = 0
    history = []
    for epoch in range(1, hyper.epochs + 1):
        perm = rng.permutation(len(Xtr))
        for start in range(0, len(perm), hyper.batch):
            idx = perm[start : start + hyper.batch]
            mask = dropout_mask((len(idx), hyper.hidden_dim), hyper.dropout_rate, rng)
            _, grads = mlp_loss_and_grad(model.with_params(params), Xtr[idx], ytr[idx], hyper.l2, mask)
            t += 1
            params, state = adam_step(params, grads, state, hyper, t)
        current = model.with_params(params)
        val_loss = _ce(current, Xval, yval) if n_val else _ce(current, Xtr, ytr)
        history.append(val_loss)
        if val_loss < best[0]:
            best = (val_loss, epoch, params)
            stale = 0
        else:
            stale += 1
            if stale >= hyper.patience:
                break

    out = model.with_params(best[2])
    out.metrics = {
        "best_epoch": best[1],
        "epochs_run": len(history),
        "val_loss": best[0],
        "train_accuracy": accuracy(out, Xtr, ytr),
        "val_accuracy": accuracy(out, Xval, yval),
        "n_train": int(len(tr)),
        "n_val": int(n_val),
    }
    return out
