"""Labelled QSA corpus generation and per-transformation judge training.

A candidate (transformation plus parent features of one dataset, under one
one-vs-all class split) is labelled useful when adding the transformed
feature to its parents raises the base model's cross-validated f1 by at
least ``improvement_threshold``. Each base sample is augmented with cropped
copies, then SMOTE evens out the labels per transformation.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._seeding import derive_seed, rng_for
from .dataset import Table
from .errors import ConfigError, DataError
from .learners.base import BaseModelKind, cv_f1
from .learners.mlp import USEFUL, USELESS, JudgeModel, TrainHyper, train_judge
from .learners.smote import smote
from .sketch import SketchConfig, build_qsa, crop_indices, one_vs_all_classes
from .transforms import TransformKind, apply_transform, parse_kinds

LABEL_NAMES = {USEFUL: "useful", USELESS: "useless"}
LABEL_IDS = {v: k for k, v in LABEL_NAMES.items()}


@dataclass(frozen=True)
class LabelingConfig:
    base_model: BaseModelKind = field(default_factory=BaseModelKind)
    improvement_threshold: float = 0.01
    cv_folds: int = 10
    crop_count: int = 3
    crop_range: tuple[float, float] = (0.5, 0.9)
    smote_target_ratio: float = 1.0
    max_candidates: int | None = None  # per dataset and class split; None = all

    def __post_init__(self) -> None:
        if not self.improvement_threshold > 0:
            raise ConfigError("improvement_threshold must be > 0")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if self.crop_count < 0:
            raise ConfigError("crop_count must be >= 0")
        lo, hi = self.crop_range
        if not 0 < lo <= hi < 1:
            raise ConfigError("crop_range must satisfy 0 < lo <= hi < 1")
        if self.smote_target_ratio < 0:
            raise ConfigError("smote_target_ratio must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["crop_range"] = list(self.crop_range)
        return d


@dataclass(frozen=True)
class CorpusSample:
    transform: TransformKind
    qsa: np.ndarray
    label: int
    meta: dict

    def to_json(self) -> str:
        doc = {
            "transform": self.transform.value,
            "qsa": [float(v) for v in self.qsa],
            "label": LABEL_NAMES[self.label],
            "meta": self.meta,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "CorpusSample":
        doc = json.loads(line)
        return cls(TransformKind(doc["transform"]), np.asarray(doc["qsa"], dtype=np.float64),
                   LABEL_IDS[doc["label"]], doc["meta"])

    def sort_key(self) -> tuple:
        m = self.meta
        order = list(TransformKind).index(self.transform)
        return (order, bool(m.get("synthetic")), m.get("dataset", ""), tuple(m.get("parents", ())),
                m.get("positive_class", -1), m.get("crop", 0), m.get("index", 0))


@dataclass
class CorpusReport:
    samples: int = 0
    base_samples: int = 0
    cropped_samples: int = 0
    synthetic_samples: int = 0
    per_kind: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def count(self, kind: TransformKind, label: int) -> None:
        slot = self.per_kind.setdefault(kind.value, {"useful": 0, "useless": 0})
        slot[LABEL_NAMES[label]] += 1

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "base_samples": self.base_samples,
            "cropped_samples": self.cropped_samples,
            "synthetic_samples": self.synthetic_samples,
            "per_kind": dict(sorted(self.per_kind.items())),
            "skipped": self.skipped,
        }


def label_candidate(
    parents: Sequence[np.ndarray],
    new_feature: np.ndarray,
    labels: np.ndarray,
    cfg: LabelingConfig | None = None,
    seed: int = 0,
    base_score: float | None = None,
) -> tuple[int, float]:
    """Label a transformed feature by the f1 gain it brings to its own parents.

    ``base_score`` may carry a cached ``cv_f1`` of the parents alone (same
    seed and folds); it is recomputed when omitted.
    """
    cfg = cfg or LabelingConfig()
    labels = np.asarray(labels)
    cols = [np.asarray(getattr(p, "values", p), dtype=np.float64) for p in parents]
    new_feature = np.asarray(new_feature, dtype=np.float64)
    if any(len(c) != len(labels) for c in cols) or len(new_feature) != len(labels):
        raise DataError("parents, new feature and labels must share one length")
    if len(np.unique(labels)) < 2:
        raise DataError("labels must contain at least two classes")
    if not np.all(np.isfinite(new_feature)):
        raise DataError("new feature has non-finite values")
    X = np.column_stack(cols)
    if base_score is None:
        base_score = cv_f1(cfg.base_model, X, labels, cfg.cv_folds, seed)
    after = cv_f1(cfg.base_model, np.column_stack([X, new_feature]), labels, cfg.cv_folds, seed)
    improvement = after - base_score
    # tolerance keeps "exactly at threshold" useful despite float rounding of the difference
    label = USEFUL if improvement >= cfg.improvement_threshold - 1e-12 else USELESS
    return label, float(improvement)


def _parent_sets(names: list[str], kind: TransformKind) -> list[tuple[str, ...]]:
    if kind.arity == 1:
        return [(n,) for n in names]
    pairs = list(itertools.combinations(names, 2))
    if kind.commutative:
        return pairs
    return [p for a, b in pairs for p in ((a, b), (b, a))]


def _candidates(names: list[str], kinds: Sequence[TransformKind]) -> list[tuple[TransformKind, tuple[str, ...]]]:
    return [(k, ps) for k in kinds for ps in _parent_sets(names, k)]


def generate_corpus(
    datasets: Sequence[Table],
    kinds: Iterable[TransformKind | str] | None = None,
    sketch_cfg: SketchConfig | None = None,
    labeling_cfg: LabelingConfig | None = None,
    seed: int = 0,
    report: CorpusReport | None = None,
) -> list[CorpusSample]:
    """Enumerate, label, crop and balance QSA samples.

    Per dataset, class split, kind and parent set: one base sample plus
    ``crop_count`` cropped samples carrying the base label. Degenerate
    candidates (single-class split, non-finite output) are skipped and listed
    in ``report.skipped``. The output order is canonical.
    """
    sketch_cfg = sketch_cfg or SketchConfig()
    cfg = labeling_cfg or LabelingConfig()
    kinds = list(TransformKind) if kinds is None else parse_kinds(kinds)
    report = report if report is not None else CorpusReport()
    samples: list[CorpusSample] = []

    for table in datasets:
        names = list(table.numeric_names)
        if not names:
            continue
        cands = _candidates(names, kinds)
        for pc in one_vs_all_classes(table.n_classes):
            y = (np.asarray(table.label) == pc).astype(np.int64)
            if len(np.unique(y)) < 2:
                report.skipped.append({"dataset": table.name, "positive_class": pc, "reason": "single-class split"})
                continue
            split_cands = cands
            if cfg.max_candidates is not None and len(cands) > cfg.max_candidates:
                pick = rng_for(seed, "subsample", table.name, pc).choice(len(cands), cfg.max_candidates, replace=False)
                split_cands = [cands[i] for i in sorted(pick)]
            cv_seed = derive_seed(seed, "cv", table.name, pc)
            parent_scores: dict[tuple[str, ...], float] = {}
            for kind, parents in split_cands:
                samples.extend(_label_and_crop(table, kind, parents, y, pc, cv_seed, parent_scores,
                                               sketch_cfg, cfg, seed, report))

    samples.sort(key=CorpusSample.sort_key)
    samples.extend(_balance(samples, cfg, seed, report))
    samples.sort(key=CorpusSample.sort_key)
    report.samples = len(samples)
    report.per_kind = {}
    for s in samples:
        report.count(s.transform, s.label)
    return samples


def _label_and_crop(table, kind, parents, y, pc, cv_seed, parent_scores, sketch_cfg, cfg, seed, report):
    cols = [np.asarray(table.column(n).values, dtype=np.float64) for n in parents]
    meta_base = {"dataset": table.name, "parents": list(parents), "positive_class": int(pc)}
    try:
        new = apply_transform(kind, cols, y)
        if parents not in parent_scores:
            parent_scores[parents] = cv_f1(cfg.base_model, np.column_stack(cols), y, cfg.cv_folds, cv_seed)
        label, improvement = label_candidate(cols, new, y, cfg, cv_seed, base_score=parent_scores[parents])
    except DataError as exc:
        report.skipped.append({**meta_base, "transform": kind.value, "reason": str(exc)})
        return []
    meta_base.update({"improvement": improvement, "seed": int(cv_seed)})
    out = [CorpusSample(kind, build_qsa(cols, y, 1, sketch_cfg).flatten(), label,
                        {**meta_base, "crop": 0, "synthetic": False})]
    report.base_samples += 1
    crop_rng = rng_for(seed, "crop", table.name, pc, kind.value, *parents)
    lo, hi = cfg.crop_range
    for c in range(1, cfg.crop_count + 1):
        rate = float(crop_rng.uniform(lo, hi))
        idx = crop_indices(len(y), rate, crop_rng)
        qsa = build_qsa([col[idx] for col in cols], y[idx], 1, sketch_cfg).flatten()
        out.append(CorpusSample(kind, qsa, label, {**meta_base, "crop": c, "crop_rate": rate, "synthetic": False}))
        report.cropped_samples += 1
    return out


def _balance(samples: list[CorpusSample], cfg: LabelingConfig, seed: int, report: CorpusReport) -> list[CorpusSample]:
    """SMOTE per kind until minority = round(ratio * majority)."""
    out = []
    for kind in TransformKind:
        rows = [s for s in samples if s.transform is kind]
        useful = [s.qsa for s in rows if s.label == USEFUL]
        useless = [s.qsa for s in rows if s.label == USELESS]
        if not useful or not useless:
            continue
        minority, majority, label = (useful, useless, USEFUL) if len(useful) <= len(useless) else (useless, useful, USELESS)
        target = int(round(cfg.smote_target_ratio * len(majority)))
        n_new = target - len(minority)
        if n_new <= 0:
            continue
        if len(minority) < 2:
            report.skipped.append({"transform": kind.value, "reason": "SMOTE needs two minority samples"})
            continue
        synth = smote(np.stack(minority), n_new, seed=derive_seed(seed, "smote", kind.value))
        for i, row in enumerate(synth):
            out.append(CorpusSample(kind, row, label, {"dataset": "", "parents": [], "positive_class": -1,
                                                       "synthetic": True, "index": i}))
        report.synthetic_samples += len(synth)
    return out


def write_corpus(samples: Iterable[CorpusSample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(s.to_json() + "\n")


def read_corpus(path: str | Path) -> list[CorpusSample]:
    with open(path, encoding="utf-8") as fh:
        return [CorpusSample.from_json(line) for line in fh if line.strip()]


def corpus_arrays(samples: Sequence[CorpusSample], kind: TransformKind) -> tuple[np.ndarray, np.ndarray]:
    rows = [s for s in samples if s.transform is kind]
    if not rows:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    return np.stack([s.qsa for s in rows]), np.array([s.label for s in rows], dtype=np.int64)


def train_all_judges(
    corpus: Sequence[CorpusSample],
    hyper: TrainHyper | None = None,
    out_dir: str | Path | None = None,
) -> tuple[dict[TransformKind, JudgeModel], dict]:
    """Train one judge per kind that has both labels.

    Kinds lacking a label are skipped (with a warning and a report entry).
    With ``out_dir`` set, writes ``<kind>.json`` per judge plus ``metrics.json``.
    """
    if not corpus:
        raise DataError("corpus is empty")
    hyper = hyper or TrainHyper()
    models: dict[TransformKind, JudgeModel] = {}
    metrics: dict = {"judges": {}, "skipped": []}
    for kind in TransformKind:
        X, y = corpus_arrays(corpus, kind)
        if len(y) == 0:
            continue
        if len(np.unique(y)) < 2:
            msg = f"{kind.value}: only {LABEL_NAMES[int(y[0])]} samples"
            warnings.warn(f"skipping judge {msg}", stacklevel=2)
            metrics["skipped"].append({"transform": kind.value, "reason": msg})
            continue
        model = train_judge(X, y, replace(hyper, seed=derive_seed(hyper.seed, "judge", kind.value)), kind.value)
        models[kind] = model
        metrics["judges"][kind.value] = {**model.metrics, "samples": int(len(y)), "useful": int(y.sum())}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for kind, model in models.items():
            model.save(out / f"{kind.value}.json")
        (out / "metrics.json").write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return models, metrics


def load_judges(model_dir: str | Path) -> dict[TransformKind, JudgeModel]:
    out = {}
    for path in sorted(Path(model_dir).glob("*.json")):
        if path.stem in {k.value for k in TransformKind}:
            out[TransformKind(path.stem)] = JudgeModel.load(path)
    return out
