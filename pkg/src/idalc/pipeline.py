"""Top-level orchestration: the full ID-ALC run, metrics, and reports.

A run walks four or more phases in a fixed order: train and score the
cycle-0 model on the starting labeled set, flag out-of-domain samples in
the unlabeled pool, annotate a small seed of the flagged set and spread
its labels with the configured strategy, retrain (cycle 1), then hand the
unflagged remainder to the correction loop. Every phase appends one
Metrics entry, so the report shows the whole trajectory.
"""

from __future__ import annotations

import itertools
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .alc import run_alc
from .config import DetectorConfig, RunConfig, config_summary
from .corpus import PHASE_ID, AnnotationLedger, DataPool, load_corpus, make_split
from .errors import DataError, IdalcError, PhaseError
from .features import FeatureVector, Vocabulary, featurize_all, fit_vocabulary, stack_vectors
from .labeling import AnnotatedSeed, cl_label, km_label, mv_label, sample_seed
from .models import ModelHandle, TrainingConfig, predict_proba_matrix, train_base_matrix
from .ood import OodPartition, doc_detect, doc_fit, evaluate_ood, lof_detect, msp_detect

logger = logging.getLogger("idalc.pipeline")

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Metrics:
    """Test-set scores for one phase of one run."""

    phase: str
    cycle: int
    accuracy: float
    macro_f1: float
    per_class: dict[str, dict[str, float]]

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "cycle": self.cycle,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": {c: dict(v) for c, v in self.per_class.items()},
        }

    @staticmethod
    def from_dict(doc: dict) -> "Metrics":
        return Metrics(
            phase=doc["phase"],
            cycle=doc["cycle"],
            accuracy=doc["accuracy"],
            macro_f1=doc["macro_f1"],
            per_class={c: dict(v) for c, v in doc["per_class"].items()},
        )


def evaluate_matrix(
    model: ModelHandle,
    X_test,
    gold: list[str],
    phase: str = "",
    cycle: int = 0,
) -> Metrics:
    """Accuracy and macro-F1 of ``model`` against gold test labels.

    The macro average runs over every distinct gold class, so classes the
    model cannot emit yet (novel intents at cycle 0) contribute an F1 of
    zero instead of shrinking the denominator.
    """
    if not gold:
        raise DataError("test set is empty")
    probs = predict_proba_matrix(model, X_test)
    predicted = [model.label_list[j] for j in np.argmax(probs, axis=1)]

    correct = sum(1 for p, g in zip(predicted, gold) if p == g)
    accuracy = correct / len(gold)

    per_class: dict[str, dict[str, float]] = {}
    f1_sum = 0.0
    classes = sorted(set(gold))
    for cls in classes:
        tp = sum(1 for p, g in zip(predicted, gold) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(predicted, gold) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(predicted, gold) if p != cls and g == cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[cls] = {"precision": precision, "recall": recall, "f1": f1}
        f1_sum += f1
    return Metrics(
        phase=phase,
        cycle=cycle,
        accuracy=accuracy,
        macro_f1=f1_sum / len(classes),
        per_class=per_class,
    )


def evaluate(
    model: ModelHandle,
    test: list[FeatureVector],
    gold: list[str],
    phase: str = "",
    cycle: int = 0,
) -> Metrics:
    dim = model.weights.shape[0]
    return evaluate_matrix(model, stack_vectors(test, dim), gold, phase, cycle)


@dataclass
class RunReport:
    """Everything a finished run produced, ready for rendering."""

    config: dict
    phases: list[Metrics]
    ledger: dict
    detection: dict
    correction: dict
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "phases": [m.to_dict() for m in self.phases],
            "ledger": dict(self.ledger),
            "detection": dict(self.detection),
            "correction": dict(self.correction),
        }

    @staticmethod
    def from_dict(doc: dict) -> "RunReport":
        return RunReport(
            schema_version=doc["schema_version"],
            config=doc["config"],
            phases=[Metrics.from_dict(m) for m in doc["phases"]],
            ledger=doc["ledger"],
            detection=doc["detection"],
            correction=doc["correction"],
        )


@contextmanager
def _phase_context(phase: str):
    # Tag failures with the phase they happened in; never double-wrap.
    try:
        yield
    except PhaseError:
        raise
    except (IdalcError, OSError) as exc:
        raise PhaseError(phase, exc) from exc


def detect_ood(
    detector: DetectorConfig,
    model: ModelHandle,
    X_labeled,
    labeled_labels: list[str],
    ids: list[int],
    X_unlabeled,
    training: TrainingConfig,
) -> OodPartition:
    """Dispatch to the configured out-of-domain detector."""
    if detector.kind == "msp":
        return msp_detect(model, ids, X_unlabeled, detector.msp_threshold)
    if detector.kind == "doc":
        doc = doc_fit(X_labeled, labeled_labels, config=training)
        return doc_detect(doc, ids, X_unlabeled)
    if detector.kind == "lof":
        return lof_detect(X_labeled, ids, X_unlabeled, detector.lof_k, detector.lof_contamination)
    raise DataError(f"unknown detector kind {detector.kind!r}")


def _strategy_label(config: RunConfig, flagged: list[int], X_flagged, seed_ann: AnnotatedSeed):
    strategy = config.labeling.strategy
    if strategy == "km":
        return km_label(flagged, X_flagged, seed_ann, rng_seed=config.seed)
    if strategy == "mv":
        return mv_label(flagged, X_flagged, seed_ann, seed=config.seed, config=config.training)
    if strategy == "cl":
        known_count = len(config.split.known_intents)
        return cl_label(flagged, X_flagged, seed_ann, known_count, rng_seed=config.seed)
    raise DataError(f"unknown labeling strategy {strategy!r}")


def run_idalc(config: RunConfig) -> RunReport:
    """Execute one full run and collect its report.

    Cycle-0 metrics are computed before the unlabeled pool is touched, and
    the ledger starts metering only at the seed-annotation step.
    """
    with _phase_context("load"):
        corpus = load_corpus(config.dataset_path, config.dataset_format)
        pool = make_split(corpus, config.split)
    ledger = pool.new_ledger()

    test_texts = pool.texts(pool.test_ids)
    gold_map = pool.eval_gold(pool.test_ids)
    gold = [gold_map[i] for i in pool.test_ids]

    def retrain(labeled: list[tuple[int, str]]) -> tuple[ModelHandle, Vocabulary]:
        texts = pool.texts([i for i, _ in labeled])
        vocab = fit_vocabulary(texts, config.featurizer)
        X = featurize_all(texts, vocab)
        return train_base_matrix(X, [lab for _, lab in labeled], config.training), vocab

    def features_for(vocab: Vocabulary, ids: list[int]):
        return featurize_all(pool.texts(ids), vocab)

    phases: list[Metrics] = []

    with _phase_context("ID(0)"):
        labeled = list(pool.labeled)
        model, vocab = retrain(labeled)
        X_labeled = features_for(vocab, [i for i, _ in labeled])
        phases.append(evaluate_matrix(model, featurize_all(test_texts, vocab), gold, "ID(0)", 0))
        assert ledger.total_calls == 0, "annotation before detection"
    logger.info("ID(0): accuracy=%.4f", phases[-1].accuracy)

    with _phase_context("detect"):
        partition = detect_ood(
            config.detector,
            model,
            X_labeled,
            [lab for _, lab in labeled],
            pool.unlabeled_ids,
            features_for(vocab, pool.unlabeled_ids),
            config.training,
        )
    logger.info(
        "detect[%s]: flagged=%d remainder=%d",
        config.detector.kind, len(partition.flagged), len(partition.remainder),
    )

    seed_size = 0
    if partition.flagged:
        with _phase_context("annotate"):
            seed_ids = sample_seed(partition.flagged, config.labeling.seed_fraction, config.seed)
            seed_pairs = pool.oracle_annotate(seed_ids, PHASE_ID, ledger)
            seed_ann = AnnotatedSeed(tuple(seed_pairs))
            seed_size = len(seed_ids)
        with _phase_context("label"):
            vocab_flagged = fit_vocabulary(pool.texts(partition.flagged), config.featurizer)
            X_flagged = featurize_all(pool.texts(partition.flagged), vocab_flagged)
            additions = _strategy_label(config, partition.flagged, X_flagged, seed_ann)
        logger.info("label[%s]: seed=%d spread=%d", config.labeling.strategy, seed_size, len(additions))
    else:
        additions = []

    with _phase_context("ID(1)"):
        labeled = sorted(labeled + additions)
        model, vocab = retrain(labeled)
        phases.append(evaluate_matrix(model, featurize_all(test_texts, vocab), gold, "ID(1)", 1))
    logger.info("ID(1): accuracy=%.4f", phases[-1].accuracy)

    cycle_numbers = itertools.count(2)

    def evaluate_cycle(model_: ModelHandle, vocab_: Vocabulary, phase: str) -> Metrics:
        return evaluate_matrix(
            model_, featurize_all(test_texts, vocab_), gold, phase, next(cycle_numbers)
        )

    with _phase_context("ALC"):
        result = run_alc(
            pool,
            model,
            vocab,
            labeled,
            partition.remainder,
            config.alc,
            ledger,
            retrain,
            features_for,
            evaluate_cycle,
            train_config=config.training,
            seed=config.seed,
        )
    phases.extend(result.cycle_metrics)
    for m in result.cycle_metrics:
        logger.info("%s: accuracy=%.4f", m.phase, m.accuracy)

    return build_report(config, pool, ledger, phases, partition, seed_size, result.outcomes)


def build_report(
    config: RunConfig,
    pool: DataPool,
    ledger: AnnotationLedger,
    phases: list[Metrics],
    partition: OodPartition,
    seed_size: int,
    outcomes,
) -> RunReport:
    novel = pool.novel_intents
    if pool.unlabeled_ids:
        unlabeled_gold = pool.eval_gold(pool.unlabeled_ids)
        novel_ids = {i for i, lab in unlabeled_gold.items() if lab in novel}
        ood_eval = evaluate_ood(partition, novel_ids)
    else:
        ood_eval = None

    per_cycle = []
    auto_pairs: list[tuple[int, str]] = []
    rejected_total = 0
    for index, outcome in enumerate(outcomes, start=1):
        auto_pairs.extend(outcome.auto_corrected)
        rejected_total += len(outcome.rejected)
        per_cycle.append(
            {
                "phase": f"ALC({index})",
                "threshold": outcome.threshold_used,
                "below": len(outcome.auto_corrected) + len(outcome.rejected),
                "auto_corrected": len(outcome.auto_corrected),
                "rejected": len(outcome.rejected),
            }
        )
    below_total = len(auto_pairs) + rejected_total
    if below_total:
        auto_fraction = len(auto_pairs) / below_total
    else:
        auto_fraction = None
    if auto_pairs:
        auto_gold = pool.eval_gold([i for i, _ in auto_pairs])
        auto_accuracy = sum(1 for i, lab in auto_pairs if auto_gold[i] == lab) / len(auto_pairs)
    else:
        auto_accuracy = None

    ledger_doc = {
        "id_calls": ledger.id_phase_calls,
        "alc_calls": ledger.alc_phase_calls,
        "total_calls": ledger.total_calls,
        "unlabeled_size": ledger.unlabeled_size,
        "percentage": ledger.percentage,
    }
    detection_doc = {
        "kind": config.detector.kind,
        "flagged": len(partition.flagged),
        "remainder": len(partition.remainder),
        "seed_size": seed_size,
        "evaluation": ood_eval,
    }
    correction_doc = {
        "below_threshold": below_total,
        "auto_corrected": len(auto_pairs),
        "rejected": rejected_total,
        "auto_fraction": auto_fraction,
        "auto_accuracy": auto_accuracy,
        "per_cycle": per_cycle,
    }
    return RunReport(
        config=config_summary(config),
        phases=phases,
        ledger=ledger_doc,
        detection=detection_doc,
        correction=correction_doc,
    )


def _fmt(value, decimals: int = 2) -> str:
    # Half-even rounding happens here and nowhere else; missing -> dash.
    if value is None:
        return "–"
    if isinstance(value, bool) or isinstance(value, int):
        return str(value)
    return f"{round(float(value), decimals):.{decimals}f}"


def render_report(report: RunReport, format: str = "json") -> str:
    """Serialize a report as machine-readable JSON or a markdown summary.

    JSON keeps full precision and sorted keys, so identical runs yield
    byte-identical documents. Markdown rounds to two decimals for display.
    """
    if format == "json":
        return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    if format != "markdown":
        raise DataError(f"unknown report format {format!r}")

    lines: list[str] = []
    lines.append("# Run report")
    lines.append("")
    cfg = report.config
    lines.append(
        f"dataset `{cfg['dataset']['path']}` | detector {cfg['detector']['kind']}"
        f" | strategy {cfg['labeling']['strategy']} | quorum {cfg['alc']['quorum']}"
        f" | seed {cfg['seed']}"
    )
    lines.append("")

    lines.append("## Phase metrics")
    lines.append("")
    lines.append("| Phase | Cycle | Accuracy | Macro F1 |")
    lines.append("| --- | --- | --- | --- |")
    for m in report.phases:
        lines.append(f"| {m.phase} | {m.cycle} | {_fmt(m.accuracy)} | {_fmt(m.macro_f1)} |")
    lines.append("")

    det = report.detection
    lines.append("## Out-of-domain detection")
    lines.append("")
    lines.append("| Detector | Flagged | Remainder | Seed | Accuracy | Macro F1 |")
    lines.append("| --- | --- | --- | --- | --- | --- |")
    det_eval = det["evaluation"] or {}
    lines.append(
        f"| {det['kind']} | {det['flagged']} | {det['remainder']} | {det['seed_size']}"
        f" | {_fmt(det_eval.get('accuracy'))} | {_fmt(det_eval.get('macro_f1'))} |"
    )
    lines.append("")

    led = report.ledger
    lines.append("## Annotation ledger")
    lines.append("")
    lines.append("| #ID | #ALC | #Total | Unlabeled | % |")
    lines.append("| --- | --- | --- | --- | --- |")
    if led["unlabeled_size"]:
        percentage = 100.0 * led["total_calls"] / led["unlabeled_size"]
    else:
        percentage = 0.0
    lines.append(
        f"| {led['id_calls']} | {led['alc_calls']} | {led['total_calls']}"
        f" | {led['unlabeled_size']} | {_fmt(percentage)} |"
    )
    lines.append("")

    cor = report.correction
    lines.append("## Corrections")
    lines.append("")
    lines.append("| Cycle | Threshold | Below | Auto | Rejected |")
    lines.append("| --- | --- | --- | --- | --- |")
    if cor["per_cycle"]:
        for row in cor["per_cycle"]:
            lines.append(
                f"| {row['phase']} | {_fmt(row['threshold'])} | {row['below']}"
                f" | {row['auto_corrected']} | {row['rejected']} |"
            )
    else:
        lines.append("| – | – | – | – | – |")
    lines.append(
        f"| total | – | {cor['below_threshold']} | {cor['auto_corrected']} | {cor['rejected']} |"
    )
    lines.append("")
    lines.append(
        f"Auto-corrected share {_fmt(cor['auto_fraction'])}"
        f" | auto-correction accuracy {_fmt(cor['auto_accuracy'])}"
    )
    lines.append("")
    return "\n".join(lines)
