"""Comparison baselines and the evaluation oracle.

* :class:`ModelEvaluator` scores feature spaces centrally with a test model.
* :class:`OracleJudge` plugs that evaluation into the FLFE loop as a judge.
* :func:`run_model_eval_baseline` decides every candidate by actually
  evaluating it, shipping the whole current feature space in plaintext each loop.
* :func:`run_he_baseline` replays an FLFE run, charging homomorphic ciphertext
  sizes for every feature-sized generation message.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import PartyView
from .errors import CandidateSpaceExhausted
from .fednet import SERVER, CommLedger, MessageKind, Network, he_overhead_model
from .learners.base import BaseModelKind, cv_f1
from .protocol import (
    Candidate,
    FLFEResult,
    LoopRecord,
    ParameterServer,
    StoredFeature,
    make_participants,
    select_candidate,
)
from .sketch import encode_floats
from .transforms import TransformKind, apply_binary


class ModelEvaluator:
    """Central test-model scoring with generated features rebuilt from lineage.

    Generated features are recomputed here from the original columns, so two
    runs that accept the same lineage see bit-identical matrices.
    """

    def __init__(
        self,
        originals: Mapping[str, np.ndarray],
        labels: np.ndarray,
        test_model: BaseModelKind | None = None,
        threshold: float = 0.01,
        folds: int = 10,
        seed: int = 0,
    ) -> None:
        self.original_names = list(originals)
        self._values = {k: np.asarray(v, dtype=np.float64) for k, v in originals.items()}
        self.labels = np.asarray(labels)
        self.test_model = test_model or BaseModelKind()
        self.threshold = float(threshold)
        self.folds = folds
        self.seed = seed
        self.lineage: dict[str, tuple[TransformKind, str, str]] = {}
        self._scores: dict[tuple[str, ...], float] = {}

    def register(self, name: str, kind: TransformKind, f1: str, f2: str) -> None:
        self.lineage.setdefault(name, (TransformKind(kind), f1, f2))

    def values(self, name: str) -> np.ndarray:
        if name not in self._values:
            kind, f1, f2 = self.lineage[name]
            self._values[name] = apply_binary(kind, self.values(f1), self.values(f2))
        return self._values[name]

    def score(self, names: Sequence[str]) -> float:
        key = tuple(names)
        if key not in self._scores:
            X = np.column_stack([self.values(n) for n in names])
            self._scores[key] = cv_f1(self.test_model, X, self.labels, self.folds, self.seed)
        return self._scores[key]

    def improvement(self, names: Sequence[str], new: np.ndarray) -> float:
        base = self.score(names)
        X = np.column_stack([self.values(n) for n in names] + [np.asarray(new, dtype=np.float64)])
        return cv_f1(self.test_model, X, self.labels, self.folds, self.seed) - base

    def accepts(self, improvement: float) -> bool:
        return improvement >= self.threshold - 1e-12


class OracleJudge:
    """Judge that answers 1.0 exactly when the candidate would clear the test-model threshold.

    It scores against the server's current store, so it needs a handle on the
    server; it ignores the QSA it is shown.
    """

    def __init__(self, evaluator: ModelEvaluator, server: ParameterServer | None = None) -> None:
        self.evaluator = evaluator
        self.server = server
        self._cache: dict[tuple, float] = {}

    def bind(self, server: ParameterServer) -> "OracleJudge":
        self.server = server
        return self

    def __call__(self, qsa: np.ndarray, cand: Candidate) -> float:
        store = self.server.feature_store
        key = (cand.key, len(store))
        if key not in self._cache:
            for s in store:
                self.evaluator.register(s.name, s.kind, *s.parents)
            names = self.evaluator.original_names + [s.name for s in store]
            ev = self.evaluator
            new = apply_binary(cand.kind, ev.values(cand.f1), ev.values(cand.f2))
            self._cache[key] = 1.0 if ev.accepts(ev.improvement(names, new)) else 0.0
        return self._cache[key]


@dataclass
class BaselineResult:
    feature_store: list[StoredFeature]
    records: list[LoopRecord]
    net: Network
    improvements: list[float] = field(default_factory=list)
    exhausted: bool = False

    @property
    def ledger(self):
        return self.net.ledger

    @property
    def loops(self) -> int:
        return len(self.records)


def run_model_eval_baseline(
    views: Sequence[PartyView],
    labels: np.ndarray,
    evaluator: ModelEvaluator,
    kinds: Sequence[TransformKind],
    max_loop: int = 100,
    seed: int = 0,
    reuse_generated: bool = True,
    feature_width: int = 8,
) -> BaselineResult:
    """Judge each candidate by evaluating the test model on it.

    Every loop each holder sends every feature of the current space to the
    server in plaintext; an accepted feature is sent back to the holder of its
    first parent, where it is appended. Candidate selection is the same as in
    :func:`~fedfeat.protocol.run_flfe` for the same seed.
    """
    server = ParameterServer({k: None for k in kinds}, labels, max_loop=max_loop, seed=seed,
                             feature_width=feature_width, reuse_generated=reuse_generated)
    parties = make_participants(views, seed)
    net = Network(mode="model_eval_baseline")
    net.register(SERVER)
    for p in parties:
        net.register(p.name)
    holder: dict[str, str] = {}
    appended: dict[str, np.ndarray] = {}
    records: list[LoopRecord] = []
    improvements: list[float] = []
    exhausted = False

    for loop in range(1, max_loop + 1):
        try:
            cand = select_candidate(server, parties)
        except CandidateSpaceExhausted:
            exhausted = True
            break
        t0 = time.perf_counter()
        for p in parties:
            for name in p.original_names:
                net.send(p.name, SERVER, MessageKind.PLAIN_FEATURE, encode_floats(p.features[name], feature_width), loop)
        for s in server.feature_store:
            net.send(holder[s.name], SERVER, MessageKind.PLAIN_FEATURE,
                     encode_floats(appended[s.name], feature_width), loop)
        names = evaluator.original_names + [s.name for s in server.feature_store]
        new = apply_binary(cand.kind, evaluator.values(cand.f1), evaluator.values(cand.f2))
        imp = evaluator.improvement(names, new)
        accepted = evaluator.accepts(imp)
        for node in (cand.dc1, cand.dc2):
            if node != SERVER:
                net.send(SERVER, node, MessageKind.VERDICT, {"candidate": cand.key, "recommend": accepted}, loop)
        t1 = time.perf_counter()
        generated = None
        if accepted:
            evaluator.register(cand.feature_name, cand.kind, cand.f1, cand.f2)
            feat = server.store(cand, evaluator.values(cand.feature_name), loop)
            owner = cand.dc1 if cand.dc1 != SERVER else holder[cand.f1]
            holder[feat.name] = owner
            appended[feat.name] = feat.values
            net.send(SERVER, owner, MessageKind.PLAIN_FEATURE, encode_floats(feat.values, feature_width), loop)
            generated = feat.name
        records.append(LoopRecord(loop, cand, 1.0 if accepted else 0.0,
                                  "recommend" if accepted else "abandon", generated,
                                  judge_seconds=t1 - t0, generate_seconds=time.perf_counter() - t1))
        improvements.append(float(imp))
    return BaselineResult(server.feature_store, records, net, improvements, exhausted)


@dataclass
class HEResult:
    ledger: CommLedger
    records: list[LoopRecord]
    feature_store: list[StoredFeature]

    @property
    def loops(self) -> int:
        return len(self.records)


HE_REPLACED = frozenset({MessageKind.MASKED_FEATURE, MessageKind.MASK_VECTOR})


def run_he_baseline(flfe: FLFEResult, rows: int, plain_bits: int = 8, cipher_bits: int = 256) -> HEResult:
    """Same decisions as ``flfe``; every feature-sized generation message becomes a ciphertext."""
    ledger = CommLedger()
    size = he_overhead_model(rows, plain_bits, cipher_bits)
    for e in flfe.ledger:
        if e.kind in HE_REPLACED:
            ledger.add_analytic(e.loop, e.src, e.dst, MessageKind.CIPHER_FEATURE, size)
        else:
            ledger.add_analytic(e.loop, e.src, e.dst, e.kind, e.nbytes)
    return HEResult(ledger, list(flfe.records), list(flfe.feature_store))
