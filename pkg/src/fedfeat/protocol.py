"""Parameter server and participants running the judge-then-generate loop.

One loop: the server picks two features held by different nodes and a binary
transformation; the first holder sends the sketch of its feature to the
second, which appends its own sketch and forwards the pair QSA to the server.
The server's judge scores it. Only if the score clears ``conf_threshold`` is
the feature generated through the mask exchange::

    dc1 -> dc2     encrypt(f1, mask)
    dc2 -> server  T(encrypt(f1, mask), f2)
    dc1 -> server  mask
    server         decrypt(...) == T(f1, f2)
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from ._seeding import rng_for
from .dataset import PartyView
from .errors import CandidateSpaceExhausted, ConfigError, MissingJudgeError
from .fednet import SERVER, MessageKind, Network
from .sketch import (
    SketchConfig,
    decode_floats,
    encode_floats,
    feature_sketch,
    one_vs_all_classes,
    scale_block,
)
from .transforms import (
    MaskGroup,
    TransformKind,
    additive_mask_scale,
    apply_binary,
    apply_unary,
    mask_decrypt,
    mask_encrypt,
    sample_mask,
)

Judge = Callable[[np.ndarray, "Candidate"], float]


@dataclass(frozen=True)
class Candidate:
    kind: TransformKind
    dc1: str
    f1: str
    dc2: Optional[str] = None
    f2: Optional[str] = None

    @property
    def is_unary(self) -> bool:
        return self.f2 is None

    @property
    def key(self) -> tuple:
        if self.is_unary:
            return (self.kind.value, self.f1)
        return (self.kind.value,) + tuple(sorted((self.f1, self.f2)))

    @property
    def feature_name(self) -> str:
        if self.is_unary:
            return f"{self.kind.value}({self.f1})"
        return f"{self.kind.value}({self.f1},{self.f2})"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "dc1": self.dc1, "f1": self.f1, "dc2": self.dc2, "f2": self.f2}


@dataclass(frozen=True)
class StoredFeature:
    fid: int
    name: str
    kind: TransformKind
    parents: tuple[str, ...]
    parent_owners: tuple[str, ...]
    loop: int
    values: np.ndarray = field(repr=False, compare=False)

    def lineage(self, include_values: bool = False) -> dict:
        doc = {
            "id": self.fid,
            "name": self.name,
            "kind": self.kind.value,
            "parents": list(self.parents),
            "parent_owners": list(self.parent_owners),
            "loop": self.loop,
        }
        if include_values:
            doc["values"] = self.values.tolist()
        return doc


@dataclass
class LoopRecord:
    loop: int
    candidate: Candidate
    confidence: float
    decision: str
    generated: Optional[str] = None
    judge_seconds: float = field(default=0.0, compare=False)
    generate_seconds: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return {
            "loop": self.loop,
            "candidate": self.candidate.to_dict(),
            "confidence": self.confidence,
            "decision": self.decision,
            "generated": self.generated,
        }


class ConstantJudge:
    """Judge that ignores its input; handy for wiring tests and dry runs."""

    def __init__(self, value: float) -> None:
        self.value = float(value)

    def __call__(self, qsa: np.ndarray, candidate: Candidate | None = None) -> float:
        return self.value


def sketch_classes(values: np.ndarray, labels: np.ndarray, classes: Sequence[int], cfg: SketchConfig) -> np.ndarray:
    """Scaled ``(len(classes), 2, m)`` one-vs-all sketches of one feature."""
    return np.stack([scale_block(feature_sketch(values, labels, c, cfg.m), cfg.k) for c in classes])


class Participant:
    """A feature holder. Its feature values only ever leave it masked."""

    def __init__(self, view: PartyView, seed: int = 0) -> None:
        self.name = view.name
        self.party_id = view.party_id
        self.labels = np.asarray(view.label)
        self.features: dict[str, np.ndarray] = {f.name: np.asarray(f.values) for f in view.features}
        self.original_names = list(self.features)
        self.masks: dict[int, object] = {}
        self.active = True
        self._rng = rng_for(seed, "participant", view.name)

    @property
    def rows(self) -> int:
        return len(self.labels)

    def sketch(self, name: str, classes: Sequence[int], cfg: SketchConfig) -> np.ndarray:
        return sketch_classes(self.features[name], self.labels, classes, cfg)

    def new_mask(self, loop: int, kind: TransformKind, values: np.ndarray):
        group = kind.mask_group
        scale = additive_mask_scale(values) if group is MaskGroup.ADDITIVE else 1.0
        mask = sample_mask(group, len(values), self._rng, scale)
        self.masks[loop] = mask
        return mask

    def release_mask(self, loop: int):
        return self.masks.pop(loop)

    def leave(self, net: Network, loop: int) -> None:
        """Tell the server this participant takes part in no further loops."""
        net.send(self.name, SERVER, MessageKind.INSTRUCTION, {"leave": self.name}, loop)
        self.active = False


@dataclass
class LocalFeature:
    """Lineage of a unary feature that stays at its participant."""

    name: str
    owner: str
    kind: TransformKind
    parent: str
    loop: int

    def lineage(self) -> dict:
        return {"name": self.name, "owner": self.owner, "kind": self.kind.value, "parent": self.parent, "loop": self.loop}


class ParameterServer:
    """Coordinator: picks candidates, runs judges, decrypts and stores new features.

    The server is given the shared label vector so it can sketch features it
    stores itself; it never receives a participant's feature in the clear.
    """

    def __init__(
        self,
        judges: Mapping[TransformKind | str, Judge],
        labels: np.ndarray,
        conf_threshold: float = 0.8,
        max_loop: int = 100,
        seed: int = 0,
        sketch: SketchConfig | None = None,
        feature_width: int = 8,
        reuse_generated: bool = True,
        include_unary: bool = False,
    ) -> None:
        self.judges = {TransformKind(k): j for k, j in judges.items()}
        self.labels = np.asarray(labels)
        self.n_classes = len(np.unique(self.labels))
        self.classes = one_vs_all_classes(self.n_classes)
        self.conf_threshold = float(conf_threshold)
        self.max_loop = int(max_loop)
        self.seed = int(seed)
        self.sketch_cfg = sketch or SketchConfig()
        if feature_width not in (4, 8):
            raise ConfigError("feature_width must be 4 or 8")
        self.feature_width = feature_width
        self.reuse_generated = reuse_generated
        self.include_unary = include_unary
        self.feature_store: list[StoredFeature] = []
        self.local_features: list[LocalFeature] = []
        self.judged: set[tuple] = set()
        self.rng = rng_for(seed, "server", "candidates")
        self._mask_rng = rng_for(seed, "server", "masks")
        self._check_judges()

    def _check_judges(self) -> None:
        for kind, judge in self.judges.items():
            dim = getattr(judge, "input_dim", None)
            if dim is not None and dim != self.sketch_cfg.flat_length(kind.arity):
                raise ConfigError(
                    f"judge for {kind.value} expects {dim} inputs but m={self.sketch_cfg.m} gives "
                    f"{self.sketch_cfg.flat_length(kind.arity)}"
                )

    @property
    def binary_kinds(self) -> list[TransformKind]:
        return [k for k in TransformKind if k in self.judges and k.arity == 2]

    @property
    def unary_kinds(self) -> list[TransformKind]:
        return [k for k in TransformKind if k in self.judges and k.arity == 1]

    def stored(self, name: str) -> StoredFeature:
        for s in self.feature_store:
            if s.name == name:
                return s
        raise KeyError(name)

    def judge(self, kind: TransformKind, qsa_per_class: np.ndarray, cand: Candidate) -> float:
        """Mean p_useful over the one-vs-all splits."""
        if kind not in self.judges:
            raise MissingJudgeError(kind.value)
        judge = self.judges[kind]
        return float(np.mean([judge(row, cand) for row in qsa_per_class]))

    def store(self, cand: Candidate, values: np.ndarray, loop: int) -> StoredFeature:
        feat = StoredFeature(
            fid=len(self.feature_store),
            name=cand.feature_name,
            kind=cand.kind,
            parents=(cand.f1, cand.f2),
            parent_owners=(cand.dc1, cand.dc2),
            loop=loop,
            values=np.asarray(values, dtype=np.float64),
        )
        self.feature_store.append(feat)
        return feat


def _sources(server: ParameterServer, parties: Sequence[Participant]) -> list[tuple[str, str]]:
    out = [(p.name, f) for p in parties if p.active for f in p.features]
    if server.reuse_generated:
        out += [(SERVER, s.name) for s in server.feature_store]
    return out


def candidate_space(server: ParameterServer, parties: Sequence[Participant]) -> list[Candidate]:
    """Every not-yet-judged candidate, in canonical order (orientation not yet chosen)."""
    sources = _sources(server, parties)
    space = []
    for i, (o1, f1) in enumerate(sources):
        for o2, f2 in sources[i + 1 :]:
            if o1 == o2:
                continue
            for kind in server.binary_kinds:
                cand = Candidate(kind, o1, f1, o2, f2)
                if cand.key not in server.judged:
                    space.append(cand)
    if server.include_unary:
        for owner, f in sources:
            if owner == SERVER:
                continue
            for kind in server.unary_kinds:
                cand = Candidate(kind, owner, f)
                if cand.key not in server.judged:
                    space.append(cand)
    return space


def select_candidate(
    server: ParameterServer, parties: Sequence[Participant], rng: np.random.Generator | None = None
) -> Candidate:
    """Uniform draw from the unjudged cross-party space.

    The orientation of a pair is a fair coin, except that a server-held
    feature always takes the first (masking) role so that no participant
    ever has to send its own feature for the server to unmask.
    """
    rng = rng or server.rng
    space = candidate_space(server, parties)
    if not space:
        raise CandidateSpaceExhausted("every candidate has been judged")
    cand = space[int(rng.integers(len(space)))]
    if not cand.is_unary:
        swap = cand.dc2 == SERVER or (cand.dc1 != SERVER and rng.random() < 0.5)
        if swap:
            cand = Candidate(cand.kind, cand.dc2, cand.f2, cand.dc1, cand.f1)
    server.judged.add(cand.key)
    return cand


def _holder_values(server: ParameterServer, parties: Mapping[str, Participant], node: str, name: str) -> np.ndarray:
    if node == SERVER:
        return server.stored(name).values
    return parties[node].features[name]


def judge_a_qsa(
    server: ParameterServer,
    parties: Mapping[str, Participant],
    net: Network,
    cand: Candidate,
    loop: int,
) -> float:
    if cand.kind not in server.judges:
        raise MissingJudgeError(cand.kind.value)
    cfg = server.sketch_cfg
    width = cfg.float_width
    classes = server.classes

    # dc1: sketch f1 and hand it to dc2
    f1 = _holder_values(server, parties, cand.dc1, cand.f1)
    s1 = sketch_classes(f1, server.labels, classes, cfg)
    net.send(cand.dc1, cand.dc2, MessageKind.SKETCH, encode_floats(s1.ravel(), width), loop)

    # dc2: append its own sketch and forward the pair QSA
    dc2 = parties[cand.dc2]
    got = decode_floats(net.receive(cand.dc2, cand.dc1).payload, width).reshape(len(classes), 2, cfg.m)
    s2 = dc2.sketch(cand.f2, classes, cfg)
    pair = np.concatenate([got, s2], axis=1).reshape(len(classes), -1)
    net.send(cand.dc2, SERVER, MessageKind.QSA, encode_floats(pair.ravel(), width), loop)

    # server: judge and report back
    qsa = decode_floats(net.receive(SERVER, cand.dc2).payload, width).reshape(len(classes), -1)
    conf = server.judge(cand.kind, qsa, cand)
    verdict = {"candidate": cand.key, "confidence": conf, "recommend": conf >= server.conf_threshold}
    for node in (cand.dc1, cand.dc2):
        if node != SERVER:
            net.send(SERVER, node, MessageKind.VERDICT, verdict, loop)
            net.receive(node, SERVER)
    return conf


def generate_new_feature(
    server: ParameterServer,
    parties: Mapping[str, Participant],
    net: Network,
    cand: Candidate,
    loop: int,
) -> StoredFeature:
    kind = cand.kind
    width = server.feature_width
    f1 = _holder_values(server, parties, cand.dc1, cand.f1)

    # dc1: mask f1 and send it to dc2
    if cand.dc1 == SERVER:
        group = kind.mask_group
        scale = additive_mask_scale(f1) if group is MaskGroup.ADDITIVE else 1.0
        mask = sample_mask(group, len(f1), server._mask_rng, scale)
    else:
        mask = parties[cand.dc1].new_mask(loop, kind, f1)
    f1e = mask_encrypt(kind, f1, mask)
    net.send(cand.dc1, cand.dc2, MessageKind.MASKED_FEATURE, encode_floats(f1e, width), loop)

    # dc2: apply T with its own feature on the masked values
    dc2 = parties[cand.dc2]
    f1e_rx = decode_floats(net.receive(cand.dc2, cand.dc1).payload, width)
    f3e = apply_binary(kind, f1e_rx, dc2.features[cand.f2])
    net.send(cand.dc2, SERVER, MessageKind.MASKED_FEATURE, encode_floats(f3e, width), loop)

    # dc1 releases the mask to the server, which unmasks
    if cand.dc1 != SERVER:
        released = parties[cand.dc1].release_mask(loop)
        net.send(cand.dc1, SERVER, MessageKind.MASK_VECTOR, encode_floats(released.values, width), loop)
        mask_values = decode_floats(net.receive(SERVER, cand.dc1).payload, width)
        mask = type(mask)(mask_values, mask.group)
    f3e_rx = decode_floats(net.receive(SERVER, cand.dc2).payload, width)
    f3 = mask_decrypt(kind, f3e_rx, mask)
    return server.store(cand, f3, loop)


def judge_unary_local(
    server: ParameterServer,
    participant: Participant,
    net: Network,
    cand: Candidate,
    loop: int,
) -> float:
    """Unary candidates never leave their owner: only the QSA goes up, only a verdict comes back."""
    if cand.kind not in server.judges:
        raise MissingJudgeError(cand.kind.value)
    cfg = server.sketch_cfg
    s = participant.sketch(cand.f1, server.classes, cfg).reshape(len(server.classes), -1)
    net.send(participant.name, SERVER, MessageKind.QSA, encode_floats(s.ravel(), cfg.float_width), loop)
    qsa = decode_floats(net.receive(SERVER, participant.name).payload, cfg.float_width).reshape(len(server.classes), -1)
    conf = server.judge(cand.kind, qsa, cand)
    recommend = conf >= server.conf_threshold
    net.send(SERVER, participant.name, MessageKind.VERDICT, {"candidate": cand.key, "recommend": recommend}, loop)
    net.receive(participant.name, SERVER)
    if recommend:
        name = cand.feature_name
        participant.features[name] = apply_unary(cand.kind, participant.features[cand.f1], participant.labels)
        server.local_features.append(LocalFeature(name, participant.name, cand.kind, cand.f1, loop))
    return conf


@dataclass
class FLFEResult:
    feature_store: list[StoredFeature]
    local_features: list[LocalFeature]
    records: list[LoopRecord]
    net: Network
    exhausted: bool = False

    @property
    def ledger(self):
        return self.net.ledger

    @property
    def loops(self) -> int:
        return len(self.records)


def make_participants(views: Sequence[PartyView], seed: int = 0) -> list[Participant]:
    return [Participant(v, seed) for v in views]


def run_flfe(
    server: ParameterServer,
    parties: Sequence[Participant],
    net: Network | None = None,
    on_loop: Callable[[LoopRecord], None] | None = None,
) -> FLFEResult:
    """Run up to ``server.max_loop`` loops, stopping early once the space is exhausted."""
    net = net or Network()
    net.register(SERVER)
    for p in parties:
        net.register(p.name)
    by_name = {p.name: p for p in parties}
    records: list[LoopRecord] = []
    exhausted = False
    for loop in range(1, server.max_loop + 1):
        try:
            cand = select_candidate(server, parties)
        except CandidateSpaceExhausted:
            exhausted = True
            break
        t0 = time.perf_counter()
        if cand.is_unary:
            conf = judge_unary_local(server, by_name[cand.dc1], net, cand, loop)
        else:
            conf = judge_a_qsa(server, by_name, net, cand, loop)
        t1 = time.perf_counter()
        generated = None
        if conf >= server.conf_threshold:
            if cand.is_unary:
                generated = cand.feature_name
            else:
                generated = generate_new_feature(server, by_name, net, cand, loop).name
        t2 = time.perf_counter()
        rec = LoopRecord(
            loop=loop,
            candidate=cand,
            confidence=conf,
            decision="recommend" if generated else "abandon",
            generated=generated,
            judge_seconds=t1 - t0,
            generate_seconds=t2 - t1,
        )
        records.append(rec)
        if on_loop:
            on_loop(rec)
    return FLFEResult(server.feature_store, server.local_features, records, net, exhausted)
