"""Detectors that split the unlabeled pool into flagged (out-of-domain)
and remainder (in-domain) sets, plus the binary detector evaluation.

Three detectors: max-softmax-probability thresholding, one-vs-rest sigmoid
scorers with per-class rejection thresholds, and a local-outlier-factor
novelty score against the labeled points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DataError
from .models import ModelHandle, TrainingConfig, predict_proba_matrix, train_base_matrix

DOC_ALPHA = 3.0
DOC_THRESHOLD_CAP = 0.999
LOF_DEFAULT_K = 20
LOF_DEFAULT_CONTAMINATION = 0.3
_REACH_EPS = 1e-12


@dataclass(frozen=True)
class OodPartition:
    """Disjoint split of the unlabeled ids; flagged is the suspected-novel set."""

    flagged: list[int]
    remainder: list[int]

    def __post_init__(self):
        if set(self.flagged) & set(self.remainder):
            raise DataError("flagged and remainder overlap")


def _partition(ids: list[int], flag_mask: np.ndarray) -> OodPartition:
    flagged = sorted(i for i, f in zip(ids, flag_mask) if f)
    remainder = sorted(i for i, f in zip(ids, flag_mask) if not f)
    return OodPartition(flagged=flagged, remainder=remainder)


def msp_detect(model: ModelHandle, ids: list[int], X: sparse.csr_matrix, threshold: float) -> OodPartition:
    """Flag a sample iff its maximum softmax probability is below threshold."""
    top = predict_proba_matrix(model, X).max(axis=1)
    return _partition(ids, top < threshold)


def doc_threshold(positive_scores: list[float], alpha: float = DOC_ALPHA) -> float:
    """Per-class rejection threshold from the positive-score spread.

    Scores are mirrored around 1 (set {s} union {2-s}), whose population
    standard deviation is sqrt(mean((s-1)^2)); the threshold is
    max(0.5, 1 - alpha*sigma), capped below 1. Fewer than two positive
    scores fall back to 0.5.
    """
    if len(positive_scores) < 2:
        return 0.5
    sigma = math.sqrt(sum((s - 1.0) ** 2 for s in positive_scores) / len(positive_scores))
    return min(DOC_THRESHOLD_CAP, max(0.5, 1.0 - alpha * sigma))


@dataclass(frozen=True)
class DocModel:
    """One binary scorer and one rejection threshold per known class."""

    class_list: list[str]
    scorers: list[ModelHandle]
    thresholds: np.ndarray

    def scores(self, X: sparse.csr_matrix) -> np.ndarray:
        """(n, n_classes) matrix of positive-class probabilities."""
        cols = [predict_proba_matrix(s, X)[:, s.label_list.index("pos")] for s in self.scorers]
        return np.column_stack(cols)


def doc_fit(
    X: sparse.csr_matrix,
    labels: list[str],
    alpha: float = DOC_ALPHA,
    config: TrainingConfig = TrainingConfig(),
) -> DocModel:
    """Fit one one-vs-rest scorer per known class plus its threshold.

    The scorer reuses the softmax trainer on pos/neg labels; the positive
    probability is a sigmoid of the learned score difference.
    """
    class_list = sorted(set(labels))
    if len(class_list) < 2:
        raise DataError("one-vs-rest fitting needs at least two known classes")
    scorers = []
    thresholds = []
    labels_arr = np.asarray(labels, dtype=object)
    for cls in class_list:
        binary = ["pos" if lab == cls else "neg" for lab in labels_arr]
        scorer = train_base_matrix(X, binary, config)
        pos_rows = np.where(labels_arr == cls)[0]
        pos_scores = predict_proba_matrix(scorer, X[pos_rows])[:, scorer.label_list.index("pos")]
        scorers.append(scorer)
        thresholds.append(doc_threshold(pos_scores.tolist(), alpha))
    return DocModel(class_list=class_list, scorers=scorers, thresholds=np.array(thresholds))


def doc_detect(doc: DocModel, ids: list[int], X: sparse.csr_matrix) -> OodPartition:
    """Flag a sample iff every class scorer stays below its threshold."""
    scores = doc.scores(X)
    flag = np.all(scores < doc.thresholds, axis=1)
    return _partition(ids, flag)


def _cosine_distances(A: sparse.csr_matrix, B: sparse.csr_matrix) -> np.ndarray:
    # Rows are unit-norm TF-IDF (zero rows give distance 1 to everything).
    return 1.0 - np.asarray((A @ B.T).todense())


def _labeled_neighborhoods(D_ll: np.ndarray, k: int):
    m = D_ll.shape[0]
    D = D_ll.copy()
    np.fill_diagonal(D, np.inf)
    kdist = np.partition(D, k - 1, axis=1)[:, k - 1]
    neighborhoods = [np.where(D[o] <= kdist[o])[0] for o in range(m)]
    lrd = np.empty(m)
    for o in range(m):
        reach = np.maximum(kdist[neighborhoods[o]], D[o, neighborhoods[o]])
        lrd[o] = 1.0 / max(reach.mean(), _REACH_EPS)
    return kdist, lrd


def lof_scores(labeled_X: sparse.csr_matrix, unlabeled_X: sparse.csr_matrix, k: int) -> np.ndarray:
    """Novelty scores of unlabeled points against the labeled set.

    Neighborhoods follow the classical rule: every point within the k-th
    nearest distance belongs (ties can widen a neighborhood past k).
    """
    m = labeled_X.shape[0]
    if k < 1:
        raise DataError("neighbor count must be at least 1")
    if k >= m:
        raise DataError(f"neighbor count {k} must be below the labeled size {m}")
    kdist_l, lrd_l = _labeled_neighborhoods(_cosine_distances(labeled_X, labeled_X), k)

    D_ul = _cosine_distances(unlabeled_X, labeled_X)
    n = D_ul.shape[0]
    scores = np.empty(n)
    for u in range(n):
        row = D_ul[u]
        kdist_u = np.partition(row, k - 1)[k - 1]
        neigh = np.where(row <= kdist_u)[0]
        reach = np.maximum(kdist_l[neigh], row[neigh])
        lrd_u = 1.0 / max(reach.mean(), _REACH_EPS)
        scores[u] = lrd_l[neigh].mean() / lrd_u
    return scores


def lof_scores_bruteforce(labeled_X: sparse.csr_matrix, unlabeled_X: sparse.csr_matrix, k: int) -> np.ndarray:
    """Direct-formula reference implementation; O(n^2) python loops."""
    m = labeled_X.shape[0]
    if k < 1 or k >= m:
        raise DataError("invalid neighbor count")
    D_ll = _cosine_distances(labeled_X, labeled_X)
    D_ul = _cosine_distances(unlabeled_X, labeled_X)

    def kdist_and_neigh(dists):
        ordered = sorted(dists)
        kd = ordered[k - 1]
        return kd, [j for j, d in enumerate(dists) if d <= kd]

    kdist_l, neigh_l = [], []
    for o in range(m):
        dists = [D_ll[o, j] if j != o else float("inf") for j in range(m)]
        kd, nb = kdist_and_neigh(dists)
        kdist_l.append(kd)
        neigh_l.append(nb)

    lrd_l = []
    for o in range(m):
        reach = [max(kdist_l[p], D_ll[o, p]) for p in neigh_l[o]]
        lrd_l.append(1.0 / max(sum(reach) / len(reach), _REACH_EPS))

    scores = []
    for u in range(unlabeled_X.shape[0]):
        dists = [D_ul[u, j] for j in range(m)]
        _, nb = kdist_and_neigh(dists)
        reach = [max(kdist_l[o], D_ul[u, o]) for o in nb]
        lrd_u = 1.0 / max(sum(reach) / len(reach), _REACH_EPS)
        scores.append(sum(lrd_l[o] for o in nb) / len(nb) / lrd_u)
    return np.array(scores)


def lof_detect(
    labeled_X: sparse.csr_matrix,
    ids: list[int],
    unlabeled_X: sparse.csr_matrix,
    k: int = LOF_DEFAULT_K,
    contamination: float = LOF_DEFAULT_CONTAMINATION,
) -> OodPartition:
    """Flag the top contamination fraction of the pool by LOF score.

    The flag count is floor(contamination * n); score ties break toward
    the smaller id.
    """
    if not 0.0 <= contamination <= 1.0:
        raise DataError("contamination must be within [0, 1]")
    scores = lof_scores(labeled_X, unlabeled_X, k)
    n_flag = int(math.floor(contamination * len(ids)))
    order = sorted(range(len(ids)), key=lambda j: (-scores[j], ids[j]))
    flag_mask = np.zeros(len(ids), dtype=bool)
    for j in order[:n_flag]:
        flag_mask[j] = True
    return _partition(ids, flag_mask)


def evaluate_ood(partition: OodPartition, novel_ids: set[int]) -> dict[str, float]:
    """Binary accuracy and macro-F1 over the {in-domain, OOD} classes."""
    tp = sum(1 for i in partition.flagged if i in novel_ids)
    fp = len(partition.flagged) - tp
    fn = sum(1 for i in partition.remainder if i in novel_ids)
    tn = len(partition.remainder) - fn
    total = tp + fp + fn + tn
    if total == 0:
        raise DataError("cannot evaluate an empty partition")
    accuracy = (tp + tn) / total

    def f1(tp_, fp_, fn_):
        p = tp_ / (tp_ + fp_) if tp_ + fp_ else 0.0
        r = tp_ / (tp_ + fn_) if tp_ + fn_ else 0.0
        return 2 * p * r / (p + r) if p + r else 0.0

    macro_f1 = (f1(tp, fp, fn) + f1(tn, fn, fp)) / 2.0
    return {"accuracy": accuracy, "macro_f1": macro_f1}
