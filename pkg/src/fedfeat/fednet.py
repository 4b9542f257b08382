"""In-process transport between the server and participants, with byte accounting.

Every message passes through :meth:`Network.send`, which appends one record to
the :class:`CommLedger` before the message becomes visible in the receiver's
per-edge FIFO mailbox. Payload sizes are the exact serialised sizes, except
for control messages (fixed charge) and analytic ciphertext messages.
"""

from __future__ import annotations

import csv
import enum
import io
import threading
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Any, Iterable

from .errors import ConfigError, UnknownNodeError

CONTROL_BYTES = 64
SERVER = "server"


class MessageKind(str, enum.Enum):
    SKETCH = "SketchPayload"
    QSA = "QsaPayload"
    MASKED_FEATURE = "MaskedFeature"
    MASK_VECTOR = "MaskVectorPayload"
    INSTRUCTION = "Instruction"
    VERDICT = "Verdict"
    PLAIN_FEATURE = "PlainFeature"
    CIPHER_FEATURE = "CipherFeature"


JUDGING_KINDS = frozenset({MessageKind.SKETCH, MessageKind.QSA})
GENERATION_KINDS = frozenset({MessageKind.MASKED_FEATURE, MessageKind.MASK_VECTOR, MessageKind.CIPHER_FEATURE})
CONTROL_KINDS = frozenset({MessageKind.INSTRUCTION, MessageKind.VERDICT})
EVALUATION_KINDS = frozenset({MessageKind.PLAIN_FEATURE})


def category(kind: MessageKind) -> str:
    if kind in JUDGING_KINDS:
        return "judging"
    if kind in GENERATION_KINDS:
        return "generation"
    if kind in CONTROL_KINDS:
        return "control"
    return "evaluation"


@dataclass(frozen=True)
class Message:
    src: str
    dst: str
    kind: MessageKind
    nbytes: int
    loop: int
    payload: Any = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class LedgerEntry:
    seq: int
    loop: int
    src: str
    dst: str
    kind: MessageKind
    nbytes: int


@dataclass(frozen=True)
class Receipt:
    seq: int
    src: str
    dst: str
    nbytes: int


class CommLedger:
    """Append-only message log; payloads are dropped, sizes kept."""

    def __init__(self) -> None:
        self._entries: list[LedgerEntry] = []
        self._last_loop: dict[str, int] = {}
        self._lock = threading.Lock()

    def append(self, msg: Message) -> LedgerEntry:
        with self._lock:
            last = self._last_loop.get(msg.src, 0)
            if msg.loop < last:
                raise ValueError(f"{msg.src}: loop index went backwards ({msg.loop} < {last})")
            entry = LedgerEntry(len(self._entries), msg.loop, msg.src, msg.dst, msg.kind, msg.nbytes)
            self._entries.append(entry)
            self._last_loop[msg.src] = msg.loop
            return entry

    def add_analytic(self, loop: int, src: str, dst: str, kind: MessageKind, nbytes: int) -> LedgerEntry:
        return self.append(Message(src, dst, MessageKind(kind), int(nbytes), loop))

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    @property
    def total_bytes(self) -> int:
        return sum(e.nbytes for e in self._entries)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["loop", "from", "to", "kind", "bytes"])
        for e in self._entries:
            w.writerow([e.loop, e.src, e.dst, e.kind.value, e.nbytes])
        return buf.getvalue()


class Network:
    """Simulated transport; ``mode="flfe"`` forbids plaintext feature messages.

    With ``record_payloads`` every sent message (payload included) is kept in
    :attr:`transcript` for privacy audits.
    """

    def __init__(self, nodes: Iterable[str] = (), mode: str = "flfe", record_payloads: bool = False,
                 ledger: CommLedger | None = None) -> None:
        self.nodes: list[str] = []
        self.mode = mode
        self.ledger = ledger or CommLedger()
        self.record_payloads = record_payloads
        self.transcript: list[Message] = []
        self._mailboxes: dict[tuple[str, str], deque[Message]] = defaultdict(deque)
        for n in nodes:
            self.register(n)

    def register(self, node: str) -> None:
        if node not in self.nodes:
            self.nodes.append(node)

    def send(
        self,
        src: str,
        dst: str,
        kind: MessageKind,
        payload: Any = None,
        loop: int = 0,
        nbytes: int | None = None,
    ) -> Receipt:
        kind = MessageKind(kind)
        for node in (src, dst):
            if node not in self.nodes:
                raise UnknownNodeError(node)
        if src == dst:
            raise ConfigError("a node cannot send to itself")
        if kind is MessageKind.PLAIN_FEATURE and self.mode == "flfe":
            raise ConfigError("plaintext features may only be sent in baseline modes")
        if kind in CONTROL_KINDS:
            size = CONTROL_BYTES
        elif isinstance(payload, (bytes, bytearray, memoryview)):
            size = len(payload)
        elif nbytes is not None:
            size = int(nbytes)
        else:
            raise ConfigError(f"{kind.value} needs a byte payload or an explicit size")
        msg = Message(src, dst, kind, size, loop, payload)
        entry = self.ledger.append(msg)
        self._mailboxes[(src, dst)].append(msg)
        if self.record_payloads:
            self.transcript.append(msg)
        return Receipt(entry.seq, src, dst, size)

    def receive(self, dst: str, src: str) -> Message:
        box = self._mailboxes.get((src, dst))
        if not box:
            raise LookupError(f"no message pending on {src}->{dst}")
        return box.popleft()

    def pending(self, dst: str, src: str) -> int:
        return len(self._mailboxes.get((src, dst), ()))


def qsa_bytes(arity: int, m: int, classes: int = 2, float_width: int = 4) -> int:
    if m < 1:
        raise ValueError("m must be >= 1")
    return arity * classes * m * float_width


def he_overhead_model(rows: int, plain_bits: int = 8, cipher_bits: int = 256) -> int:
    """Bytes to ship one homomorphically encrypted feature of ``rows`` values."""
    if rows < 0:
        raise ValueError("rows must be >= 0")
    return rows * cipher_bits // 8


def he_expansion(plain_bits: int = 8, cipher_bits: int = 256) -> float:
    return cipher_bits / plain_bits


def eval_overhead_model(rows: int, feature_count: int, float_width: int = 8) -> int:
    if rows < 0 or feature_count < 0:
        raise ValueError("counts must be >= 0")
    return rows * float_width * feature_count


@dataclass
class LedgerSummary:
    total: int
    per_kind: dict[str, int]
    per_edge: dict[str, int]
    per_loop: dict[int, int]
    per_category: dict[str, int]
    per_loop_category: dict[int, dict[str, int]]
    cumulative: list[int]

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "per_kind": self.per_kind,
            "per_edge": self.per_edge,
            "per_loop": {str(k): v for k, v in self.per_loop.items()},
            "per_category": self.per_category,
            "per_loop_category": {str(k): v for k, v in self.per_loop_category.items()},
            "cumulative": self.cumulative,
        }


def ledger_summary(ledger: CommLedger | Iterable[LedgerEntry], loops: int | None = None) -> LedgerSummary:
    """Byte totals per kind, edge, loop and category plus a cumulative series.

    The series has one point per loop ``1..loops`` (default: the largest loop
    seen); bytes sent at loop 0 (setup) count towards every point.
    """
    per_kind: dict[str, int] = defaultdict(int)
    per_edge: dict[str, int] = defaultdict(int)
    per_loop: dict[int, int] = defaultdict(int)
    per_category: dict[str, int] = {c: 0 for c in ("judging", "generation", "control", "evaluation")}
    per_loop_category: dict[int, dict[str, int]] = {}
    total = 0
    for e in ledger:
        total += e.nbytes
        per_kind[e.kind.value] += e.nbytes
        per_edge[f"{e.src}->{e.dst}"] += e.nbytes
        per_loop[e.loop] += e.nbytes
        cat = category(e.kind)
        per_category[cat] += e.nbytes
        per_loop_category.setdefault(e.loop, {c: 0 for c in per_category})[cat] += e.nbytes
    n = loops if loops is not None else max(per_loop, default=0)
    cumulative = []
    running = per_loop.get(0, 0)
    for loop in range(1, n + 1):
        running += per_loop.get(loop, 0)
        cumulative.append(running)
    return LedgerSummary(
        total=total,
        per_kind=dict(sorted(per_kind.items())),
        per_edge=dict(sorted(per_edge.items())),
        per_loop=dict(sorted(per_loop.items())),
        per_category=per_category,
        per_loop_category=dict(sorted(per_loop_category.items())),
        cumulative=cumulative,
    )
