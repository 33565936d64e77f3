import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from civic_lens import cascade, features, models, synthetic
from civic_lens.cascade import ClassifierBank, ImportedDetector, LabelSet, TrainedDetector
from civic_lens.taxonomy import LOCAL_KEYS, SOCIETAL_KEYS, TOP_LOCAL, TOP_SOCIETAL, AssignmentKind, label_columns

bits_strategy = st.fixed_dictionaries({t: st.integers(0, 1) for t in label_columns()})


@pytest.mark.parametrize("agg,members", [(cascade.aggregate_local, TOP_LOCAL),
                                         (cascade.aggregate_societal, TOP_SOCIETAL)])
def test_aggregation_exhaustive(agg, members):
    for gate in (0, 1):
        for flags in itertools.product((0, 1), repeat=10):
            got = agg(bool(gate), flags)
            assert (got.kind.value, got.concerns) == oracles.piecewise_assignment(gate, flags, members)


def test_aggregation_accepts_mapping_flags():
    a = cascade.aggregate_local(True, {"housing": 1})
    assert a.keys == ["housing"]
    with pytest.raises(cascade.CascadeError):
        cascade.aggregate_local(True, {"weather": 1})
    with pytest.raises(cascade.CascadeError):
        cascade.aggregate_local(True, [1, 0])


@settings(max_examples=300, deadline=None)
@given(bits_strategy)
def test_exactly_one_variant_and_record_roundtrip(bits):
    ls = LabelSet.from_bits("m-c001", bits)
    for a in (ls.local_assignment, ls.societal_assignment):
        variants = [a.kind is AssignmentKind.CONCERNS, a.kind is AssignmentKind.OTHER, a.kind is AssignmentKind.NONE]
        assert sum(variants) == 1
    assert ls.bits() == bits
    assert LabelSet.from_record(json.loads(json.dumps(ls.to_record()))) == ls


def test_record_with_inconsistent_assignment_rejected():
    bits = dict.fromkeys(label_columns(), 0)
    rec = LabelSet.from_bits("x", bits).to_record()
    rec["local_assignment"] = ["housing"]
    with pytest.raises(cascade.CascadeError):
        LabelSet.from_record(rec)


def test_record_bits_rejects_bad_values():
    with pytest.raises(cascade.CascadeError):
        cascade.record_bits({"comment_id": "x", "action": 2})
    with pytest.raises(cascade.CascadeError):
        cascade.record_bits({"comment_id": "x", "mood": 1})
    with pytest.raises(cascade.CascadeError):
        cascade.record_bits({"comment_id": "x", "local_flags": {"weather": 1}})


@pytest.fixture(scope="module")
def small_banks():
    comments, truth = synthetic.generate(synthetic.SyntheticSpec(n_comments=120, n_meetings=3), seed=5)
    banks = []
    for C in (1.0, 10.0, 100.0):
        bank = ClassifierBank()
        for t in label_columns():
            y = np.array([truth[c.comment_id][t] for c in comments])
            vocab = features.fit_vocabulary([c.text for c in comments])
            X = features.transform_matrix([c.text for c in comments], vocab)
            bank[t] = TrainedDetector(vocab, models.train_logistic(X, y, models.LogisticConfig(C=C)))
        banks.append(bank)
    return comments, truth, banks


def test_identical_banks_vote_like_one_bank(small_banks):
    comments, _, banks = small_banks
    single = [cascade.classify_comment(c, banks[0]) for c in comments]
    assert cascade.classify_corpus(comments, [banks[0]] * 3) == single


def test_majority_vote_is_per_target_majority(small_banks):
    comments, _, banks = small_banks
    voted = cascade.classify_corpus(comments, banks)
    per_bank = [cascade.classify_corpus(comments, [b]) for b in banks]
    for i, ls in enumerate(voted):
        for t, v in ls.bits().items():
            assert v == int(sum(p[i].bits()[t] for p in per_bank) >= 2)


def test_permutation_equivariance(small_banks):
    comments, _, banks = small_banks
    base = {ls.comment_id: ls for ls in cascade.classify_corpus(comments, banks)}
    perm = np.random.default_rng(0).permutation(len(comments))
    shuffled = cascade.classify_corpus([comments[i] for i in perm], banks)
    assert [ls.comment_id for ls in shuffled] == [comments[i].comment_id for i in perm]
    assert all(base[ls.comment_id] == ls for ls in shuffled)


def test_vote_count_must_be_odd(small_banks):
    comments, _, banks = small_banks
    with pytest.raises(cascade.CascadeError, match="odd"):
        cascade.classify_corpus(comments, banks[:2])


def test_incomplete_bank_names_missing_target(small_banks):
    comments, _, banks = small_banks
    partial = ClassifierBank({t: d for t, d in banks[0].items() if t != "housing"})
    with pytest.raises(cascade.CascadeError, match="missing detector: housing"):
        cascade.classify_comment(comments[0], partial)


def test_detector_dimension_check():
    vocab = features.fit_vocabulary(["a b c"])
    m = models.train_logistic(np.eye(2)[[0, 1, 0, 1]], [0, 1, 0, 1])
    with pytest.raises(cascade.CascadeError):
        TrainedDetector(vocab, m)


def test_imported_predictions(tmp_path, small_banks):
    comments, truth, banks = small_banks
    path = tmp_path / "pred.jsonl"
    with open(path, "w") as fh:
        for c in comments:
            fh.write(json.dumps({"comment_id": c.comment_id,
                                 "local_flags": {k: 1 - truth[c.comment_id][k] for k in LOCAL_KEYS}}) + "\n")
    imported = cascade.import_predictions(path)
    assert set(imported.sources().values()) == {"imported"}
    assert sorted(imported) == sorted(LOCAL_KEYS)
    mixed = ClassifierBank({**banks[0], **imported})
    out = cascade.classify_corpus(comments, [mixed])
    for ls in out:
        assert all(ls.bits()[k] == 1 - truth[ls.comment_id][k] for k in LOCAL_KEYS)
    with pytest.raises(cascade.CascadeError, match="no imported"):
        ImportedDetector("housing", {}).predict_many(comments[:1])


def test_labels_io_roundtrip(tmp_path, small_banks):
    comments, _, banks = small_banks
    labels = cascade.classify_corpus(comments, banks)
    cascade.write_labels(tmp_path / "labels.jsonl", labels)
    assert cascade.read_labels(tmp_path / "labels.jsonl") == labels
    rec = json.loads((tmp_path / "labels.jsonl").read_text().splitlines()[0])
    assert set(rec["local_flags"]) == set(LOCAL_KEYS) and set(rec["societal_flags"]) == set(SOCIETAL_KEYS)
