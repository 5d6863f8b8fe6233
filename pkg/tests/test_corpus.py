import json

import numpy as np
import pytest

from idalc.corpus import (
    PHASE_ALC,
    PHASE_ID,
    AnnotationLedger,
    Corpus,
    SplitSpec,
    load_corpus,
    make_split,
)
from idalc.errors import DataError


def small_corpus():
    texts = [f"utterance number {i} about {lab}" for i, lab in enumerate("aabbbbcccc")]
    labels = list("aabbbbcccc")
    return Corpus(texts, labels)


def test_tsv_round_trip(tmp_path):
    path = tmp_path / "data.tsv"
    path.write_text("play a song\tPlayMusic\nbook a table\tBookRestaurant\n", encoding="utf-8")
    corpus = load_corpus(str(path), format="tsv")
    assert len(corpus) == 2
    assert corpus.text(0) == "play a song"
    assert corpus.label_inventory == {"PlayMusic", "BookRestaurant"}


def test_tsv_missing_label_named_by_record(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("play a song\tPlayMusic\nno label here\n", encoding="utf-8")
    with pytest.raises(DataError, match="record 1"):
        load_corpus(str(path), format="tsv")


def test_tsv_blank_label_rejected(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("play a song\t \n", encoding="utf-8")
    with pytest.raises(DataError, match="record 0"):
        load_corpus(str(path), format="tsv")


def test_jsonl_with_explicit_ids(tmp_path):
    path = tmp_path / "data.jsonl"
    rows = [
        {"id": 7, "text": "weather in paris", "label": "GetWeather"},
        {"id": 3, "text": "rate this book", "label": "RateBook"},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
    corpus = load_corpus(str(path), format="jsonl")
    assert sorted(corpus.ids()) == [3, 7]
    assert corpus.text(7) == "weather in paris"


def test_jsonl_duplicate_ids_listed(tmp_path):
    path = tmp_path / "dup.jsonl"
    rows = [
        {"id": 1, "text": "one", "label": "x"},
        {"id": 1, "text": "two", "label": "y"},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
    with pytest.raises(DataError, match=r"duplicate utterance ids: \[1\]"):
        load_corpus(str(path), format="jsonl")


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(DataError, match="empty"):
        load_corpus(str(path), format="tsv")


def test_unknown_format_rejected(tmp_path):
    with pytest.raises(DataError, match="format"):
        load_corpus("whatever.csv", format="csv")


def spec(**kw):
    base = dict(
        known_intents=frozenset({"a", "b"}),
        novel_intents=frozenset({"c"}),
        labeled_count=3,
        test_count=2,
        seed=0,
    )
    base.update(kw)
    return SplitSpec(**base)


def test_split_partitions_are_disjoint_and_cover():
    pool = make_split(small_corpus(), spec())
    labeled_ids = {i for i, _ in pool.labeled}
    all_ids = labeled_ids | set(pool.unlabeled_ids) | set(pool.test_ids)
    assert len(all_ids) == 10
    assert len(labeled_ids) == 3
    assert len(pool.test_ids) == 2
    assert not labeled_ids & set(pool.unlabeled_ids)
    assert not labeled_ids & set(pool.test_ids)
    assert not set(pool.unlabeled_ids) & set(pool.test_ids)


def test_split_labeled_only_known_intents():
    pool = make_split(small_corpus(), spec())
    gold = pool.eval_gold([i for i, _ in pool.labeled])
    for i, lab in pool.labeled:
        assert lab in {"a", "b"}
        assert gold[i] == lab


def test_split_proportional_allocation():
    # 2 a's and 4 b's among known; labeled_count=3 should take 1 a and 2 b.
    pool = make_split(small_corpus(), spec())
    counts = {}
    for _, lab in pool.labeled:
        counts[lab] = counts.get(lab, 0) + 1
    assert counts == {"a": 1, "b": 2}


def test_split_deterministic_under_seed():
    a = make_split(small_corpus(), spec(seed=42))
    b = make_split(small_corpus(), spec(seed=42))
    c = make_split(small_corpus(), spec(seed=43))
    assert a.labeled == b.labeled
    assert a.unlabeled_ids == b.unlabeled_ids
    assert a.test_ids == b.test_ids
    assert (a.labeled, a.test_ids) != (c.labeled, c.test_ids)


def test_split_rejects_overlapping_intent_sets():
    with pytest.raises(DataError, match="overlap"):
        make_split(small_corpus(), spec(novel_intents=frozenset({"b", "c"})))


def test_split_rejects_non_covering_intent_sets():
    with pytest.raises(DataError, match="inventory"):
        make_split(small_corpus(), spec(novel_intents=frozenset()))


def test_split_rejects_oversized_labeled_count():
    with pytest.raises(DataError, match="labeled_count"):
        make_split(small_corpus(), spec(labeled_count=7))


def test_oracle_annotate_meters_and_restricts():
    pool = make_split(small_corpus(), spec())
    ledger = pool.new_ledger()
    ids = pool.unlabeled_ids[:2]
    got = pool.oracle_annotate(ids, PHASE_ID, ledger)
    gold = pool.eval_gold(ids)
    assert got == [(i, gold[i]) for i in ids]
    assert ledger.id_phase_calls == 2
    assert ledger.alc_phase_calls == 0

    test_id = pool.test_ids[0]
    with pytest.raises(DataError, match="unlabeled pool"):
        pool.oracle_annotate([test_id], PHASE_ID, ledger)


def test_repeat_annotation_is_free():
    pool = make_split(small_corpus(), spec())
    ledger = pool.new_ledger()
    ids = pool.unlabeled_ids[:3]
    pool.oracle_annotate(ids, PHASE_ID, ledger)
    pool.oracle_annotate(ids[:2], PHASE_ALC, ledger)
    assert ledger.id_phase_calls == 3
    assert ledger.alc_phase_calls == 0
    fresh = pool.unlabeled_ids[3]
    pool.oracle_annotate([fresh], PHASE_ALC, ledger)
    assert ledger.alc_phase_calls == 1
    assert ledger.total_calls == 4


def test_ledger_percentage():
    ledger = AnnotationLedger(unlabeled_size=50)
    ledger.charge([1, 2, 3], PHASE_ID)
    ledger.charge([4, 5], PHASE_ALC)
    assert ledger.percentage == pytest.approx(10.0)
    with pytest.raises(ValueError):
        ledger.charge([6], "nope")


def test_ledger_counters_never_decrease():
    rng = np.random.default_rng(0)
    ledger = AnnotationLedger(unlabeled_size=100)
    prev = (0, 0)
    for _ in range(200):
        ids = rng.integers(0, 100, size=rng.integers(1, 5)).tolist()
        phase = PHASE_ID if rng.random() < 0.5 else PHASE_ALC
        ledger.charge(ids, phase)
        now = (ledger.id_phase_calls, ledger.alc_phase_calls)
        assert now[0] >= prev[0] and now[1] >= prev[1]
        prev = now
    assert ledger.total_calls <= 100
