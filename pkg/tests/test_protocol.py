import numpy as np
import pytest

from fedfeat.dataset import Column, Table, load_bundled, vertical_split
from fedfeat.errors import CandidateSpaceExhausted, ConfigError, MissingJudgeError
from fedfeat.fednet import SERVER, MessageKind, Network, ledger_summary, qsa_bytes
from fedfeat.learners.mlp import init_model
from fedfeat.protocol import (
    Candidate,
    ConstantJudge,
    ParameterServer,
    candidate_space,
    generate_new_feature,
    judge_a_qsa,
    judge_unary_local,
    make_participants,
    run_flfe,
    select_candidate,
)
from fedfeat.sketch import SketchConfig, build_qsa, decode_floats
from fedfeat.transforms import BINARY_KINDS, TransformKind, apply_binary

K = TransformKind


def small_table(cols, label):
    return Table("t", tuple(Column(n, "numeric", np.asarray(v, float)) for n, v in cols.items()),
                 np.asarray(label), len(set(label)))


def setup(table, partition, judges, seed=0, **kw):
    views = vertical_split(table, partition)
    server = ParameterServer(judges, table.label, seed=seed, **kw)
    parties = make_participants(views, seed)
    n = Network([SERVER] + [p.name for p in parties], record_payloads=True)
    return server, parties, {p.name: p for p in parties}, n


def two_party(rows=6, seed=0):
    rng = np.random.default_rng(seed)
    return small_table({"a": rng.normal(size=rows), "b": rng.normal(size=rows)}, [0, 1] * (rows // 2))


def central(name, originals, store):
    """Recompute a stored feature from original columns through its lineage."""
    if name in originals:
        return originals[name]
    feat = next(s for s in store if s.name == name)
    return apply_binary(feat.kind, central(feat.parents[0], originals, store), central(feat.parents[1], originals, store))


def test_singleton_candidate_space():
    server, parties, _, _ = setup(two_party(), {"x": ["a"], "y": ["b"]}, {K.SUM: ConstantJudge(0)})
    cand = select_candidate(server, parties)
    assert cand.kind is K.SUM and {cand.f1, cand.f2} == {"a", "b"} and cand.dc1 != cand.dc2
    with pytest.raises(CandidateSpaceExhausted):
        select_candidate(server, parties)


def test_exhaustion_after_search_space():
    judges = {k: ConstantJudge(0) for k in BINARY_KINDS}
    server, parties, _, n = setup(two_party(), {"x": ["a"], "y": ["b"]}, judges, max_loop=10)
    res = run_flfe(server, parties, n)
    assert res.loops == 4 and res.exhausted
    assert len({r.candidate.key for r in res.records}) == 4


def test_same_party_pairs_never_selected():
    t = small_table({c: np.arange(4.0) + i for i, c in enumerate("abcd")}, [0, 1, 0, 1])
    server, parties, _, _ = setup(t, {"x": ["a", "b"], "y": ["c", "d"]}, {K.SUM: ConstantJudge(0)})
    space = candidate_space(server, parties)
    assert len(space) == 4
    assert all({c.f1, c.f2} & {"a", "b"} and {c.f1, c.f2} & {"c", "d"} for c in space)


def test_candidate_sequence_deterministic():
    t, part = load_bundled("wine")
    seqs = []
    for _ in range(2):
        server, parties, _, n = setup(t, part, {k: ConstantJudge(0) for k in BINARY_KINDS}, seed=5, max_loop=30)
        seqs.append([r.candidate for r in run_flfe(server, parties, n).records])
    assert seqs[0] == seqs[1]


def test_judge_a_qsa_message_trace():
    server, parties, by, n = setup(two_party(), {"x": ["a"], "y": ["b"]}, {K.SUM: ConstantJudge(0.9)})
    cand = Candidate(K.SUM, "x", "a", "y", "b")
    assert judge_a_qsa(server, by, n, cand, 1) == pytest.approx(0.9)
    trace = [(e.src, e.dst, e.kind, e.nbytes) for e in n.ledger]
    assert trace == [
        ("x", "y", MessageKind.SKETCH, qsa_bytes(1, 200)),
        ("y", SERVER, MessageKind.QSA, qsa_bytes(2, 200)),
        (SERVER, "x", MessageKind.VERDICT, 64),
        (SERVER, "y", MessageKind.VERDICT, 64),
    ]
    assert sum(e.nbytes for e in n.ledger) == 1600 + 3200 + 128


def test_qsa_reaching_server_matches_direct_build():
    t = two_party(40, seed=3)
    seen = []

    def spy(qsa, cand):
        seen.append(qsa)
        return 0.5

    server, parties, by, n = setup(t, {"x": ["a"], "y": ["b"]}, {K.DIVISION: spy})
    judge_a_qsa(server, by, n, Candidate(K.DIVISION, "x", "a", "y", "b"), 1)
    direct = build_qsa([t.column("a").values, t.column("b").values], t.label, 1).flatten()
    assert np.allclose(seen[0], direct.astype(np.float32), atol=0)


def test_constant_features_with_real_model():
    t = small_table({"a": [3.0] * 6, "b": [-1.0] * 6}, [0, 1] * 3)
    model = init_model(800, 8, seed=0, transform="sum")
    server, parties, by, n = setup(t, {"x": ["a"], "y": ["b"]}, {K.SUM: model})
    conf = judge_a_qsa(server, by, n, Candidate(K.SUM, "x", "a", "y", "b"), 1)
    assert 0.0 <= conf <= 1.0


def test_multiclass_confidence_is_mean():
    t, part = load_bundled("iris")

    def judge(qsa, cand):
        return float((qsa[0] + 1) / 2)  # first bin of the positive column, mapped to [0, 1]

    server, parties, by, n = setup(t, part, {K.SUM: judge})
    cand = Candidate(K.SUM, "alice", "sepal_length_cm", "bob", "petal_width_cm")
    conf = judge_a_qsa(server, by, n, cand, 1)
    parents = [t.column("sepal_length_cm").values, t.column("petal_width_cm").values]
    per_class = [judge(build_qsa(parents, t.label, c).flatten().astype(np.float32), cand) for c in range(3)]
    assert conf == pytest.approx(np.mean(per_class), abs=1e-6)
    assert ledger_summary(n.ledger).per_category["judging"] == 3 * (qsa_bytes(1, 200) + qsa_bytes(2, 200))


def test_missing_judge():
    server, parties, by, n = setup(two_party(), {"x": ["a"], "y": ["b"]}, {K.SUM: ConstantJudge(1)})
    with pytest.raises(MissingJudgeError):
        judge_a_qsa(server, by, n, Candidate(K.DIVISION, "x", "a", "y", "b"), 1)


def test_judge_dimension_checked():
    with pytest.raises(ConfigError):
        ParameterServer({K.SUM: init_model(10, 2)}, np.array([0, 1]))


def test_generate_sum_example():
    t = small_table({"a": [2.0, 4.0], "b": [1.0, 2.0]}, [0, 1])
    server, parties, by, n = setup(t, {"x": ["a"], "y": ["b"]}, {K.SUM: ConstantJudge(1)})
    feat = generate_new_feature(server, by, n, Candidate(K.SUM, "x", "a", "y", "b"), 1)
    assert np.allclose(feat.values, [3.0, 6.0], rtol=0, atol=1e-12)
    assert feat.parents == ("a", "b") and feat.loop == 1
    trace = [(e.src, e.dst, e.kind, e.nbytes) for e in n.ledger]
    assert trace == [
        ("x", "y", MessageKind.MASKED_FEATURE, 2 * 8),
        ("y", SERVER, MessageKind.MASKED_FEATURE, 2 * 8),
        ("x", SERVER, MessageKind.MASK_VECTOR, 2 * 8),
    ]


def test_masked_payload_differs_from_f1():
    t = two_party(50, seed=4)
    for kind in BINARY_KINDS:
        server, parties, by, n = setup(t, {"x": ["a"], "y": ["b"]}, {kind: ConstantJudge(1)})
        generate_new_feature(server, by, n, Candidate(kind, "x", "a", "y", "b"), 1)
        f1 = t.column("a").values
        for msg in n.transcript:
            if msg.kind is MessageKind.MASKED_FEATURE:
                assert not np.any(decode_floats(msg.payload, 8) == f1)


def test_server_as_first_holder_skips_mask_message():
    t = two_party(10)
    server, parties, by, n = setup(t, {"x": ["a"], "y": ["b"]}, {K.SUM: ConstantJudge(1), K.MULTIPLICATION: ConstantJudge(1)})
    first = generate_new_feature(server, by, n, Candidate(K.SUM, "x", "a", "y", "b"), 1)
    second = generate_new_feature(server, by, n, Candidate(K.MULTIPLICATION, SERVER, first.name, "y", "b"), 2)
    expected = (t.column("a").values + t.column("b").values) * t.column("b").values
    assert np.allclose(second.values, expected, rtol=1e-12)
    loop2 = [e for e in n.ledger if e.loop == 2]
    assert [e.kind for e in loop2] == [MessageKind.MASKED_FEATURE, MessageKind.MASKED_FEATURE]


def test_server_feature_always_takes_first_role():
    t = two_party(10)
    server, parties, by, n = setup(t, {"x": ["a"], "y": ["b"]}, {K.SUM: ConstantJudge(1), K.SUBTRACTION: ConstantJudge(1)},
                                   max_loop=6)
    res = run_flfe(server, parties, n)
    for r in res.records:
        assert r.candidate.dc2 != SERVER


def test_unary_accept_and_reject():
    for value, applied in ((1.0, True), (0.0, False)):
        t = two_party(8)
        server, parties, by, n = setup(t, {"x": ["a"], "y": ["b"]}, {K.SQUARE: ConstantJudge(value)}, include_unary=True)
        conf = judge_unary_local(server, by["x"], n, Candidate(K.SQUARE, "x", "a"), 1)
        assert conf == value
        assert ("square(a)" in by["x"].features) is applied
        assert [(e.kind, e.nbytes) for e in n.ledger] == [(MessageKind.QSA, qsa_bytes(1, 200)), (MessageKind.VERDICT, 64)]
        if applied:
            assert np.array_equal(by["x"].features["square(a)"], t.column("a").values ** 2)
            assert server.feature_store == [] and server.local_features[0].owner == "x"


def test_unary_bytes_independent_of_rows():
    totals = []
    for rows in (8, 400):
        t = two_party(rows)
        server, parties, by, n = setup(t, {"x": ["a"], "y": ["b"]}, {K.LOG: ConstantJudge(1)}, include_unary=True)
        judge_unary_local(server, by["x"], n, Candidate(K.LOG, "x", "a"), 1)
        totals.append(n.ledger.total_bytes)
    assert totals[0] == totals[1]


def test_run_zero_loops():
    server, parties, _, n = setup(two_party(), {"x": ["a"], "y": ["b"]}, {K.SUM: ConstantJudge(1)}, max_loop=0)
    res = run_flfe(server, parties, n)
    assert res.feature_store == [] and res.records == []


def test_run_accept_all_three_loops():
    t, part = load_bundled("wine")
    server, parties, _, n = setup(t, part, {k: ConstantJudge(1) for k in BINARY_KINDS}, max_loop=3)
    res = run_flfe(server, parties, n)
    assert len(res.feature_store) == 3
    assert all(r.decision == "recommend" and r.generated for r in res.records)


def test_run_reject_all_only_judging():
    t, part = load_bundled("iris")
    server, parties, _, n = setup(t, part, {k: ConstantJudge(0.5) for k in BINARY_KINDS}, max_loop=10)
    res = run_flfe(server, parties, n)
    s = ledger_summary(res.ledger)
    assert res.feature_store == [] and s.per_category["generation"] == 0
    assert all(r.generated is None and r.decision == "abandon" for r in res.records)


def test_threshold_boundary_is_inclusive():
    server, parties, _, n = setup(two_party(), {"x": ["a"], "y": ["b"]}, {K.SUM: ConstantJudge(0.8)}, conf_threshold=0.8,
                                   max_loop=1)
    assert len(run_flfe(server, parties, n).feature_store) == 1


def test_participant_leave():
    t = small_table({c: np.arange(4.0) * (i + 1) for i, c in enumerate("abc")}, [0, 1, 0, 1])
    server, parties, by, n = setup(t, {"x": ["a"], "y": ["b"], "z": ["c"]}, {K.SUM: ConstantJudge(0)})
    by["z"].leave(n, 0)
    assert n.ledger.entries[-1].kind is MessageKind.INSTRUCTION and n.ledger.total_bytes == 64
    assert all("z" not in (c.dc1, c.dc2) for c in candidate_space(server, parties))


@pytest.fixture(scope="module")
def long_run():
    t, part = load_bundled("wine")
    server, parties, _, n = setup(t, part, {k: ConstantJudge(1) for k in BINARY_KINDS}, seed=11, max_loop=120)
    return t, run_flfe(server, parties, n)


def test_stored_features_equal_central_oracle(long_run):
    t, res = long_run
    assert len(res.feature_store) >= 100
    originals = {n: t.column(n).values for n in t.numeric_names}
    for feat in res.feature_store:
        direct = central(feat.name, originals, res.feature_store)
        assert np.max(np.abs(feat.values - direct)) <= 1e-9 * max(np.max(np.abs(direct)), 1e-300)


def test_privacy_transcript(long_run):
    t, res = long_run
    owned = [t.column(n).values for n in t.numeric_names]
    assert not any(m.kind is MessageKind.PLAIN_FEATURE for m in res.net.transcript)
    for msg in res.net.transcript:
        if isinstance(msg.payload, bytes) and msg.kind in (MessageKind.MASKED_FEATURE, MessageKind.MASK_VECTOR):
            got = decode_floats(msg.payload, 8)
            for f in owned:
                assert not np.array_equal(got, f)


def test_ledger_decomposition(long_run):
    t, res = long_run
    s = ledger_summary(res.ledger)
    assert s.total == s.per_category["judging"] + s.per_category["generation"] + s.per_category["control"]
    splits = 3  # wine has three classes, one one-vs-all split each
    assert s.per_category["judging"] == res.loops * splits * (qsa_bytes(1, 200) + qsa_bytes(2, 200))


def test_lineage_is_acyclic(long_run):
    t, res = long_run
    seen = {n: 0 for n in t.numeric_names}
    for feat in res.feature_store:
        for p in feat.parents:
            assert p in seen and seen[p] < feat.loop
        seen[feat.name] = feat.loop


def test_replay_identical():
    t, part = load_bundled("iris")
    outs = []
    for _ in range(2):
        server, parties, _, n = setup(t, part, {k: ConstantJudge(1) for k in BINARY_KINDS}, seed=2, max_loop=15)
        res = run_flfe(server, parties, n)
        outs.append((res.ledger.to_csv(), [r.to_dict() for r in res.records],
                     [s.values.tobytes() for s in res.feature_store]))
    assert outs[0] == outs[1]
