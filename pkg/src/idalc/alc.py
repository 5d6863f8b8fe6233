"""Active-learning correction of low-confidence predictions.

Each cycle: compute a rejection threshold as a fixed fraction of the best
confidence seen on the remainder, let the five-member ensemble vote on the
samples below it, auto-correct those where a quorum agrees, send the rest
to the oracle, fold both groups into the labeled set, retrain, repeat.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .corpus import PHASE_ALC, AnnotationLedger, DataPool
from .errors import DataError
from .labeling import plurality_vote
from .models import (
    ENSEMBLE_KINDS,
    EnsembleMember,
    ModelHandle,
    TrainingConfig,
    predict_proba_matrix,
    train_ensemble_matrix,
)


@dataclass(frozen=True)
class AlcConfig:
    threshold_factor: float = 0.75
    quorum: int | None = 3  # None disables auto-correction entirely
    cycles: int = 2

    def __post_init__(self):
        if not 0.0 < self.threshold_factor < 1.0:
            raise DataError("threshold_factor must be strictly between 0 and 1")
        if self.quorum is not None and not 1 <= self.quorum <= 5:
            raise DataError("quorum must be between 1 and 5 votes")
        if not 2 <= self.cycles <= 5:
            raise DataError("cycle count must be between 2 and 5")


@dataclass(frozen=True)
class VoteRecord:
    sample_id: int
    votes: tuple[str | None, ...]  # one slot per member, None = abstain
    winner: str | None
    winner_count: int


@dataclass
class CorrectionOutcome:
    auto_corrected: list[tuple[int, str]]
    rejected: list[int]
    rejected_labels: list[tuple[int, str]]
    threshold_used: float
    vote_records: list[VoteRecord] = field(default_factory=list)


def compute_threshold_from_confidences(confidences: np.ndarray, factor: float) -> float:
    if confidences.size == 0:
        raise DataError("cannot compute a threshold over an empty remainder")
    return factor * float(confidences.max())


def compute_threshold(model: ModelHandle, X_remainder, factor: float) -> float:
    """factor times the highest max-class probability over the remainder."""
    top = predict_proba_matrix(model, X_remainder).max(axis=1)
    return compute_threshold_from_confidences(top, factor)


def vote_decision(
    votes: Sequence[str | None],
    quorum: int | None,
    mean_probs: dict[str, float] | None = None,
) -> tuple[str | None, int]:
    """Winner and plurality count for one sample's member votes.

    The winner is present only when a quorum is configured and the
    plurality count reaches it; abstentions never count toward a label.
    """
    cast = [v for v in votes if v is not None]
    if not cast:
        return None, 0
    top = plurality_vote(cast, mean_probs or {})
    count = cast.count(top)
    if quorum is not None and count >= quorum:
        return top, count
    return None, count


def correct_cycle(
    model: ModelHandle,
    remainder_ids: list[int],
    X_remainder,
    ensemble: list[EnsembleMember],
    config: AlcConfig,
    pool: DataPool,
    ledger: AnnotationLedger,
) -> CorrectionOutcome:
    """One voting pass over the below-threshold part of the remainder.

    Samples whose plurality reaches the quorum are auto-corrected with the
    voted label; the rest are oracle-annotated (metered on the ledger).
    Above-threshold samples are left untouched.
    """
    threshold = compute_threshold(model, X_remainder, config.threshold_factor)
    top = predict_proba_matrix(model, X_remainder).max(axis=1)
    below_rows = [r for r in range(len(remainder_ids)) if top[r] < threshold]

    auto: list[tuple[int, str]] = []
    rejected: list[int] = []
    records: list[VoteRecord] = []
    if below_rows:
        X_below = X_remainder[below_rows]
        member_probs: list[np.ndarray | None] = []
        member_preds: list[list[str] | None] = []
        for member in ensemble:
            if member.usable:
                probs = member.predict_proba(X_below)
                member_probs.append(probs)
                member_preds.append([member.label_list[i] for i in probs.argmax(axis=1)])
            else:
                member_probs.append(None)
                member_preds.append(None)

        for col, row in enumerate(below_rows):
            sample_id = remainder_ids[row]
            votes = tuple(
                preds[col] if preds is not None else None for preds in member_preds
            )
            mean_probs: dict[str, float] = {}
            for lab in {v for v in votes if v is not None}:
                vals = []
                for mi, member in enumerate(ensemble):
                    if member_probs[mi] is None:
                        continue
                    if lab in member.label_list:
                        vals.append(member_probs[mi][col][member.label_list.index(lab)])
                    else:
                        vals.append(0.0)
                mean_probs[lab] = float(np.mean(vals))
            winner, count = vote_decision(votes, config.quorum, mean_probs)
            records.append(VoteRecord(sample_id, votes, winner, count))
            if winner is not None:
                auto.append((sample_id, winner))
            else:
                rejected.append(sample_id)

    rejected_labels = pool.oracle_annotate(rejected, PHASE_ALC, ledger) if rejected else []
    return CorrectionOutcome(
        auto_corrected=auto,
        rejected=rejected,
        rejected_labels=rejected_labels,
        threshold_used=threshold,
        vote_records=records,
    )


@dataclass
class AlcResult:
    model: ModelHandle
    vocab: Any
    cycle_metrics: list[Any]
    outcomes: list[CorrectionOutcome]
    labeled: list[tuple[int, str]]
    remainder_ids: list[int]


def run_alc(
    pool: DataPool,
    model: ModelHandle,
    vocab: Any,
    labeled: list[tuple[int, str]],
    remainder_ids: list[int],
    config: AlcConfig,
    ledger: AnnotationLedger,
    retrain: Callable[[list[tuple[int, str]]], tuple[ModelHandle, Any]],
    features_for: Callable[[Any, list[int]], Any],
    evaluate_cycle: Callable[[ModelHandle, Any, str], Any],
    train_config: TrainingConfig = TrainingConfig(),
    ensemble_kinds: Sequence[str] = ENSEMBLE_KINDS,
    seed: int = 0,
) -> AlcResult:
    """Run up to config.cycles correction cycles, retraining after each.

    ``retrain`` refits the base model (and its vocabulary) on the labeled
    pairs; ``features_for`` featurizes pool ids under a vocabulary;
    ``evaluate_cycle`` computes test metrics for a phase tag. Stops early
    once nothing falls below the threshold or the remainder empties.
    """
    labeled = list(labeled)
    remainder_ids = list(remainder_ids)
    metrics: list[Any] = []
    outcomes: list[CorrectionOutcome] = []

    for cycle in range(1, config.cycles + 1):
        phase = f"ALC({cycle})"
        if not remainder_ids:
            metrics.append(evaluate_cycle(model, vocab, phase))
            break

        labeled_ids = [i for i, _ in labeled]
        id_universe = set(labeled_ids) | set(remainder_ids)
        assert len(labeled_ids) + len(remainder_ids) == len(id_universe), "id sets overlap"

        ensemble = train_ensemble_matrix(
            features_for(vocab, labeled_ids),
            [lab for _, lab in labeled],
            ensemble_kinds,
            seed + cycle,
            train_config,
        )
        outcome = correct_cycle(
            model,
            remainder_ids,
            features_for(vocab, remainder_ids),
            ensemble,
            config,
            pool,
            ledger,
        )
        outcomes.append(outcome)

        moved = outcome.auto_corrected + outcome.rejected_labels
        if not moved:
            metrics.append(evaluate_cycle(model, vocab, phase))
            break

        moved_ids = {i for i, _ in moved}
        labeled = labeled + sorted(moved)
        remainder_ids = [i for i in remainder_ids if i not in moved_ids]

        assert len(labeled) == len(labeled_ids) + len(moved), "labeled growth mismatch"
        assert set(i for i, _ in labeled) | set(remainder_ids) == id_universe, "ids lost or duplicated"

        model, vocab = retrain(labeled)
        metrics.append(evaluate_cycle(model, vocab, phase))

    return AlcResult(
        model=model,
        vocab=vocab,
        cycle_metrics=metrics,
        outcomes=outcomes,
        labeled=labeled,
        remainder_ids=remainder_ids,
    )
