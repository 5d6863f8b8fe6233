import numpy as np
import pytest
from scipy import sparse

from idalc.alc import (
    AlcConfig,
    AlcResult,
    compute_threshold,
    compute_threshold_from_confidences,
    correct_cycle,
    run_alc,
    vote_decision,
)
from idalc.corpus import Corpus, SplitSpec, make_split
from idalc.errors import DataError
from idalc.features import FeaturizerConfig, featurize_all, fit_vocabulary
from idalc.models import EnsembleMember, ModelHandle, TrainingConfig, train_base_matrix

FAST = TrainingConfig(epochs=80)


def test_alc_config_validation():
    AlcConfig()  # defaults valid
    AlcConfig(quorum=None, cycles=5)
    with pytest.raises(DataError):
        AlcConfig(threshold_factor=0.0)
    with pytest.raises(DataError):
        AlcConfig(threshold_factor=1.0)
    with pytest.raises(DataError):
        AlcConfig(quorum=0)
    with pytest.raises(DataError):
        AlcConfig(quorum=6)
    with pytest.raises(DataError):
        AlcConfig(cycles=1)
    with pytest.raises(DataError):
        AlcConfig(cycles=6)


def test_threshold_arithmetic():
    th = compute_threshold_from_confidences(np.array([0.96, 0.5, 0.72]), 0.75)
    assert th == pytest.approx(0.72, abs=1e-12)


def test_threshold_all_equal_confidences_sit_above():
    # TH = 0.75c and the strict < comparison leaves samples at c untouched.
    conf = np.array([0.4, 0.4, 0.4])
    th = compute_threshold_from_confidences(conf, 0.75)
    assert th == pytest.approx(0.3)
    assert not np.any(conf < th)


def test_threshold_empty_remainder_rejected():
    with pytest.raises(DataError, match="empty remainder"):
        compute_threshold_from_confidences(np.array([]), 0.75)


def test_threshold_from_model():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(20, 4)) + np.array([3, 0, 0, 0])
    b = rng.normal(size=(20, 4)) - np.array([3, 0, 0, 0])
    X = sparse.csr_matrix(np.vstack([a, b]))
    model = train_base_matrix(X, ["p"] * 20 + ["q"] * 20, FAST)
    th = compute_threshold(model, X, 0.75)
    from idalc.models import predict_proba_matrix

    top = predict_proba_matrix(model, X).max(axis=1)
    assert th == pytest.approx(0.75 * top.max())


def test_vote_decision_quorum_cases():
    assert vote_decision(("A", "A", "A", "B", None), 3) == ("A", 3)
    assert vote_decision(("A", "A", "B", "B", None), 3) == (None, 2)
    assert vote_decision(("A", "A", "A", "A", "A"), 5) == ("A", 5)
    assert vote_decision(("A", "A", "A", "A", "B"), 5) == (None, 4)
    assert vote_decision((None,) * 5, 3) == (None, 0)


def test_vote_decision_no_quorum_rejects_all():
    assert vote_decision(("A", "A", "A", "A", "A"), None) == (None, 5)
    assert vote_decision(("A", "B", "C", None, None), None)[0] is None


def test_vote_decision_matches_count_rule():
    # winner present exactly when the best label count reaches the quorum
    rng = np.random.default_rng(1)
    labels = ["A", "B", "C", "D", None]
    for _ in range(500):
        votes = tuple(labels[i] for i in rng.integers(0, 5, size=5))
        quorum = int(rng.integers(1, 6))
        winner, count = vote_decision(votes, quorum)
        cast = [v for v in votes if v is not None]
        best = max((cast.count(lab) for lab in set(cast)), default=0)
        assert count == best
        assert (winner is not None) == (best >= quorum and best > 0)


class _StubState:
    def __init__(self, probs):
        self._probs = np.asarray(probs, dtype=float)

    def proba(self, X):
        assert X.shape[0] == self._probs.shape[0]
        return self._probs


def stub_member(probs_or_none, labels=("A", "B")):
    if probs_or_none is None:
        return EnsembleMember("RandomForest", list(labels), 0, state=None, usable=False)
    return EnsembleMember("RandomForest", list(labels), 0, state=_StubState(probs_or_none), usable=True)


def correction_world():
    """Pool of 10, 2 labeled, 8 unlabeled; model confident on axis points,
    uncertain on the diagonal."""
    texts = [f"utterance {i}" for i in range(10)]
    gold = ["A", "B", "A", "B", "A", "B", "A", "B", "A", "B"]
    corpus = Corpus(texts, gold)
    spec = SplitSpec(
        known_intents=frozenset({"A", "B"}),
        novel_intents=frozenset(),
        labeled_count=2,
        test_count=0,
        seed=0,
    )
    pool = make_split(corpus, spec)

    model = ModelHandle(label_list=["A", "B"], weights=np.array([[3.0, 0.0], [0.0, 3.0]]), bias=np.zeros(2))
    return pool, model


def test_correct_cycle_partitions_and_meters():
    pool, model = correction_world()
    remainder_ids = pool.unlabeled_ids[:4]
    # two confident rows, two uncertain rows (equal logits -> conf 0.5)
    X = sparse.csr_matrix(np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.5]]))
    below_count = 2  # rows 2 and 3

    # sample at row 2: votes (A,A,A,B,abstain) -> auto-corrected A
    # sample at row 3: votes (A,A,B,B,abstain) -> rejected -> oracle
    probs = [
        [[0.9, 0.1], [0.9, 0.1]],
        [[0.8, 0.2], [0.7, 0.3]],
        [[0.6, 0.4], [0.2, 0.8]],
        [[0.3, 0.7], [0.1, 0.9]],
        None,
    ]
    ensemble = [stub_member(p) for p in probs]
    ledger = pool.new_ledger()
    outcome = correct_cycle(model, remainder_ids, X, ensemble, AlcConfig(), pool, ledger)

    assert outcome.auto_corrected == [(remainder_ids[2], "A")]
    assert outcome.rejected == [remainder_ids[3]]
    gold = pool.eval_gold([remainder_ids[3]])
    assert outcome.rejected_labels == [(remainder_ids[3], gold[remainder_ids[3]])]
    assert ledger.alc_phase_calls == 1
    assert ledger.id_phase_calls == 0
    assert len(outcome.vote_records) == below_count
    rec_auto = outcome.vote_records[0]
    assert rec_auto.votes == ("A", "A", "A", "B", None)
    assert rec_auto.winner == "A" and rec_auto.winner_count == 3
    rec_rej = outcome.vote_records[1]
    assert rec_rej.winner is None and rec_rej.winner_count == 2


def test_correct_cycle_above_threshold_untouched():
    pool, model = correction_world()
    remainder_ids = pool.unlabeled_ids[:3]
    X = sparse.csr_matrix(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]))
    ensemble = [stub_member(None)] * 5  # would fail if any vote were needed
    ledger = pool.new_ledger()
    outcome = correct_cycle(model, remainder_ids, X, ensemble, AlcConfig(), pool, ledger)
    assert outcome.auto_corrected == []
    assert outcome.rejected == []
    assert ledger.total_calls == 0


def test_correct_cycle_all_abstain_goes_to_oracle():
    pool, model = correction_world()
    remainder_ids = pool.unlabeled_ids[:3]
    X = sparse.csr_matrix(np.array([[1.0, 0.0], [0.5, 0.5], [0.5, 0.5]]))
    ensemble = [stub_member(None)] * 5
    ledger = pool.new_ledger()
    outcome = correct_cycle(model, remainder_ids, X, ensemble, AlcConfig(), pool, ledger)
    assert outcome.auto_corrected == []
    assert sorted(outcome.rejected) == sorted(remainder_ids[1:])
    assert ledger.alc_phase_calls == 2


def word_world():
    """Text corpus over two word families plus ambiguous mixtures."""
    a_texts = ["red crimson scarlet", "crimson red red", "scarlet red crimson", "red red scarlet"]
    b_texts = ["blue azure navy", "azure blue blue", "navy blue azure", "blue blue navy"]
    mixed = ["red blue", "crimson azure"]
    confident = ["red scarlet crimson", "azure navy blue"]
    texts = a_texts + b_texts + mixed + confident
    gold = ["A"] * 4 + ["B"] * 4 + ["A", "B"] + ["A", "B"]
    corpus = Corpus(texts, gold)
    spec = SplitSpec(
        known_intents=frozenset({"A", "B"}),
        novel_intents=frozenset(),
        labeled_count=8,
        test_count=0,
        seed=1,
    )
    pool = make_split(corpus, spec)
    return pool


def alc_callbacks(pool):
    cfg = FeaturizerConfig(char_ngrams=False)

    def retrain(labeled):
        texts = pool.texts([i for i, _ in labeled])
        vocab = fit_vocabulary(texts, cfg)
        X = featurize_all(texts, vocab)
        return train_base_matrix(X, [lab for _, lab in labeled], FAST), vocab

    def features_for(vocab, ids):
        return featurize_all(pool.texts(ids), vocab)

    def evaluate_cycle(model, vocab, phase):
        return phase

    return retrain, features_for, evaluate_cycle


def test_run_alc_conservation_and_metrics():
    pool = word_world()
    retrain, features_for, evaluate_cycle = alc_callbacks(pool)
    labeled = list(pool.labeled)
    remainder = list(pool.unlabeled_ids)
    model, vocab = retrain(labeled)
    ledger = pool.new_ledger()
    result = run_alc(
        pool, model, vocab, labeled, remainder, AlcConfig(), ledger,
        retrain, features_for, evaluate_cycle, train_config=FAST, seed=0,
    )
    assert isinstance(result, AlcResult)
    before = set(i for i, _ in pool.labeled) | set(pool.unlabeled_ids)
    after = set(i for i, _ in result.labeled) | set(result.remainder_ids)
    assert before == after
    moved_total = sum(len(o.auto_corrected) + len(o.rejected) for o in result.outcomes)
    assert len(result.labeled) == len(pool.labeled) + moved_total
    assert len(result.remainder_ids) == len(pool.unlabeled_ids) - moved_total
    assert ledger.alc_phase_calls == sum(len(o.rejected) for o in result.outcomes)
    assert 1 <= len(result.cycle_metrics) <= 2
    assert result.cycle_metrics[0] == "ALC(1)"


def test_run_alc_empty_remainder_logs_and_stops():
    pool = word_world()
    retrain, features_for, evaluate_cycle = alc_callbacks(pool)
    labeled = list(pool.labeled)
    model, vocab = retrain(labeled)
    ledger = pool.new_ledger()
    result = run_alc(
        pool, model, vocab, labeled, [], AlcConfig(), ledger,
        retrain, features_for, evaluate_cycle, train_config=FAST,
    )
    assert result.cycle_metrics == ["ALC(1)"]
    assert result.outcomes == []
    assert result.labeled == labeled


def test_run_alc_zero_below_threshold_early_stop():
    pool = word_world()
    retrain, features_for, evaluate_cycle = alc_callbacks(pool)
    labeled = list(pool.labeled)
    # remainder restricted to the two pure, confidently-scored texts
    confident_ids = [i for i in pool.unlabeled_ids if pool.text(i) in ("red scarlet crimson", "azure navy blue")]
    model, vocab = retrain(labeled)
    ledger = pool.new_ledger()
    result = run_alc(
        pool, model, vocab, labeled, confident_ids, AlcConfig(), ledger,
        retrain, features_for, evaluate_cycle, train_config=FAST,
    )
    assert len(result.cycle_metrics) == 1
    assert result.labeled == labeled
    assert result.remainder_ids == confident_ids
    assert ledger.total_calls == 0


def test_run_alc_quorum_sweep_monotone():
    pool = word_world()
    retrain, features_for, evaluate_cycle = alc_callbacks(pool)
    calls = []
    for quorum in (3, 4, 5, None):
        labeled = list(pool.labeled)
        remainder = list(pool.unlabeled_ids)
        model, vocab = retrain(labeled)
        ledger = pool.new_ledger()
        run_alc(
            pool, model, vocab, labeled, remainder, AlcConfig(quorum=quorum), ledger,
            retrain, features_for, evaluate_cycle, train_config=FAST, seed=1,
        )
        calls.append(ledger.alc_phase_calls)
    assert calls[0] <= calls[1] <= calls[2] <= calls[3]
