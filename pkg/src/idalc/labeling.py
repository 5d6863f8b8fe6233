"""Labeling of detected out-of-domain samples.

A small oracle-annotated seed (default 20% of the flagged set) anchors one
of three strategies that extend labels to every flagged sample: clustering
with majority-label cluster count (km), ensemble plurality voting (mv), or
clustering with double the known intent count (cl). Seed members always
keep their oracle label in the output.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import DataError, IdalcError
from .models import ENSEMBLE_KINDS, TrainingConfig, train_ensemble_matrix

KMEANS_MAX_ITER = 300
KMEANS_REL_TOL = 1e-6
KMEANS_RESTARTS = 5
DEFAULT_SEED_FRACTION = 0.2


@dataclass(frozen=True)
class AnnotatedSeed:
    """Oracle labels for the sampled part of the flagged set.

    majority_threshold is |pairs| / |discovered_labels|, kept real-valued;
    majority comparisons are strict (frequency > threshold).
    """

    pairs: tuple[tuple[int, str], ...]
    discovered_labels: frozenset[str] = field(init=False)
    majority_threshold: float = field(init=False)

    def __post_init__(self):
        if not self.pairs:
            raise DataError("annotated seed is empty")
        labels = frozenset(lab for _, lab in self.pairs)
        object.__setattr__(self, "discovered_labels", labels)
        object.__setattr__(self, "majority_threshold", len(self.pairs) / len(labels))

    def label_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for _, lab in self.pairs:
            counts[lab] = counts.get(lab, 0) + 1
        return counts

    def majority_labels(self) -> list[str]:
        """Labels whose seed frequency strictly exceeds the threshold.

        A single discovered label is its own majority (the threshold test
        degenerates to equality there).
        """
        if len(self.discovered_labels) == 1:
            return sorted(self.discovered_labels)
        counts = self.label_counts()
        return sorted(lab for lab, c in counts.items() if c > self.majority_threshold)


def sample_seed(flagged: list[int], m: float, seed: int) -> list[int]:
    """Uniformly draw ceil(m * |flagged|) ids without replacement."""
    if not 0.0 < m <= 1.0:
        raise DataError("seed fraction must be in (0, 1]")
    if not flagged:
        return []
    count = math.ceil(m * len(flagged))
    rng = np.random.default_rng(seed)
    flagged_sorted = sorted(flagged)
    picked = rng.choice(len(flagged_sorted), size=count, replace=False)
    return sorted(flagged_sorted[j] for j in picked)


@dataclass
class ClusterAssignment:
    k: int
    centroids: np.ndarray
    point_cluster: np.ndarray
    cluster_labels: list[str | None]
    inertia: float
    inertia_history: list[float]


def _squared_distances(X, centroids: np.ndarray) -> np.ndarray:
    row_norms = np.asarray(X.multiply(X).sum(axis=1)).ravel() if sparse.issparse(X) else (X * X).sum(axis=1)
    cent_norms = (centroids * centroids).sum(axis=1)
    cross = np.asarray(X @ centroids.T)
    return np.maximum(row_norms[:, None] - 2.0 * cross + cent_norms[None, :], 0.0)


def kmeans(X, k: int, rng_seed: int, max_iter: int = KMEANS_MAX_ITER) -> ClusterAssignment:
    """Lloyd iterations from a D^2-weighted seeding; one run, no restarts.

    The recorded inertia history is asserted non-increasing; an empty
    cluster is refilled with the point farthest from its centroid.
    """
    n = X.shape[0]
    if k < 1:
        raise DataError("cluster count must be at least 1")
    if k > n:
        raise DataError(f"cannot form {k} clusters from {n} points")
    rng = np.random.default_rng(rng_seed)

    chosen = [int(rng.integers(0, n))]
    dense = lambda idx: np.asarray(X[idx].todense()).ravel() if sparse.issparse(X) else X[idx]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = dense(chosen[0])
    if k > 1:
        d2 = _squared_distances(X, centroids[:1]).ravel()
        for j in range(1, k):
            total = d2.sum()
            if total > 0:
                pick = int(rng.choice(n, p=d2 / total))
            else:
                pick = int(rng.integers(0, n))
            chosen.append(pick)
            centroids[j] = dense(pick)
            d2 = np.minimum(d2, _squared_distances(X, centroids[j : j + 1]).ravel())

    history: list[float] = []
    assignment = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dists = _squared_distances(X, centroids)
        assignment = dists.argmin(axis=1)
        empties = [c for c in range(k) if not np.any(assignment == c)]
        if empties:
            # Refill each empty cluster with the farthest point of any
            # multi-member cluster; the centroid moves onto that point, so
            # the relocation can only lower the inertia.
            assigned_dist = dists[np.arange(n), assignment]
            for cluster in empties:
                sizes = np.bincount(assignment, minlength=k)
                candidates = np.where(sizes[assignment] >= 2)[0]
                farthest = int(candidates[np.argmax(assigned_dist[candidates])])
                assignment[farthest] = cluster
                centroids[cluster] = dense(farthest)
                assigned_dist[farthest] = 0.0
        inertia = float(_squared_distances(X, centroids)[np.arange(n), assignment].sum())
        if history:
            assert inertia <= history[-1] * (1 + 1e-12) + 1e-9, "inertia increased"
        history.append(inertia)
        for cluster in range(k):
            members = np.where(assignment == cluster)[0]
            mean = X[members].mean(axis=0)
            centroids[cluster] = np.asarray(mean).ravel()
        if len(history) >= 2 and history[-2] - history[-1] <= KMEANS_REL_TOL * max(history[-2], 1e-12):
            break

    final_inertia = float(_squared_distances(X, centroids)[np.arange(n), assignment].sum())
    return ClusterAssignment(
        k=k,
        centroids=centroids,
        point_cluster=assignment,
        cluster_labels=[None] * k,
        inertia=final_inertia,
        inertia_history=history,
    )


def kmeans_best(X, k: int, rng_seed: int, restarts: int = KMEANS_RESTARTS, max_iter: int = KMEANS_MAX_ITER) -> ClusterAssignment:
    """Best-inertia result over seeded restarts."""
    best: ClusterAssignment | None = None
    for r in range(max(1, restarts)):
        run = kmeans(X, k, rng_seed * 31 + r, max_iter)
        if best is None or run.inertia < best.inertia:
            best = run
    return best


def _label_clusters_by_seed(
    assignment: ClusterAssignment,
    flagged_ids: list[int],
    seed_pairs: dict[int, str],
    eligible_labels: set[str] | None,
) -> list[str | None]:
    """Majority label of a cluster's seed members; count ties go lexicographic."""
    id_to_row = {i: r for r, i in enumerate(flagged_ids)}
    votes: list[dict[str, int]] = [{} for _ in range(assignment.k)]
    for sid, lab in seed_pairs.items():
        if eligible_labels is not None and lab not in eligible_labels:
            continue
        cluster = int(assignment.point_cluster[id_to_row[sid]])
        votes[cluster][lab] = votes[cluster].get(lab, 0) + 1
    labels: list[str | None] = []
    for cluster_votes in votes:
        if not cluster_votes:
            labels.append(None)
            continue
        top = max(cluster_votes.values())
        labels.append(sorted(lab for lab, c in cluster_votes.items() if c == top)[0])
    return labels


def _resolve_seedless_clusters(assignment: ClusterAssignment, labels: list[str | None]) -> list[str]:
    """Seedless clusters inherit the nearest labeled centroid's label."""
    labeled = [c for c, lab in enumerate(labels) if lab is not None]
    if not labeled:
        raise IdalcError("no cluster received a seed label")
    resolved = list(labels)
    for cluster, lab in enumerate(labels):
        if lab is not None:
            continue
        diffs = assignment.centroids[labeled] - assignment.centroids[cluster]
        nearest = labeled[int((diffs * diffs).sum(axis=1).argmin())]
        resolved[cluster] = labels[nearest]
    return resolved  # type: ignore[return-value]


def _emit(flagged_ids: list[int], seed_pairs: dict[int, str], cluster_of, label_of) -> list[tuple[int, str]]:
    out = []
    for row, i in enumerate(flagged_ids):
        if i in seed_pairs:
            out.append((i, seed_pairs[i]))
        else:
            out.append((i, label_of(int(cluster_of(row)))))
    return out


def km_label(
    flagged_ids: list[int],
    X,
    seed_annotations: AnnotatedSeed,
    rng_seed: int,
    restarts: int = KMEANS_RESTARTS,
    max_iter: int = KMEANS_MAX_ITER,
) -> list[tuple[int, str]]:
    """Cluster count = number of majority seed labels; clusters take the
    majority label of their majority-label seed members.
    """
    majority = seed_annotations.majority_labels()
    if not majority:
        raise DataError(
            "no seed label reaches a majority; annotate a larger seed fraction m"
        )
    k = min(len(majority), len(flagged_ids))
    assignment = kmeans_best(X, k, rng_seed, restarts, max_iter)
    seed_pairs = dict(seed_annotations.pairs)
    labels = _label_clusters_by_seed(assignment, flagged_ids, seed_pairs, set(majority))
    resolved = _resolve_seedless_clusters(assignment, labels)
    assignment.cluster_labels = list(resolved)
    return _emit(flagged_ids, seed_pairs, lambda r: assignment.point_cluster[r], lambda c: resolved[c])


def plurality_vote(predictions: list[str], mean_probs: dict[str, float]) -> str:
    """Plurality over non-abstaining predictions; ties broken by the higher
    mean predicted probability, then lexicographically."""
    if not predictions:
        raise DataError("no votes cast")
    counts: dict[str, int] = {}
    for lab in predictions:
        counts[lab] = counts.get(lab, 0) + 1
    top = max(counts.values())
    tied = [lab for lab, c in counts.items() if c == top]
    if len(tied) == 1:
        return tied[0]
    best_prob = max(mean_probs.get(lab, 0.0) for lab in tied)
    return sorted(lab for lab in tied if mean_probs.get(lab, 0.0) == best_prob)[0]


def mv_label(
    flagged_ids: list[int],
    X,
    seed_annotations: AnnotatedSeed,
    ensemble_kinds=ENSEMBLE_KINDS,
    seed: int = 0,
    config: TrainingConfig = TrainingConfig(),
) -> list[tuple[int, str]]:
    """Train the ensemble on the seed and let it vote on the rest."""
    seed_pairs = dict(seed_annotations.pairs)
    if len(seed_annotations.discovered_labels) < 2:
        only = next(iter(seed_annotations.discovered_labels))
        warnings.warn(
            f"seed covers a single label {only!r}; falling back to constant labeling",
            stacklevel=2,
        )
        return [(i, seed_pairs.get(i, only)) for i in flagged_ids]

    id_to_row = {i: r for r, i in enumerate(flagged_ids)}
    seed_rows = [id_to_row[i] for i in seed_pairs]
    seed_labels = [seed_pairs[i] for i in seed_pairs]
    members = train_ensemble_matrix(X[seed_rows], seed_labels, ensemble_kinds, seed, config)
    usable = [m for m in members if m.usable]
    if not usable:
        raise IdalcError("every ensemble member failed to fit on the seed")

    rest_rows = [r for r, i in enumerate(flagged_ids) if i not in seed_pairs]
    out = [(i, seed_pairs[i]) for i in flagged_ids if i in seed_pairs]
    if rest_rows:
        X_rest = X[rest_rows]
        preds = [m.predict(X_rest) for m in usable]
        probs = [m.predict_proba(X_rest) for m in usable]
        label_lists = [m.label_list for m in usable]
        for col, row in enumerate(rest_rows):
            votes = [p[col] for p in preds]
            mean_probs: dict[str, float] = {}
            for lab in set(votes):
                vals = [
                    probs[mi][col][label_lists[mi].index(lab)] if lab in label_lists[mi] else 0.0
                    for mi in range(len(usable))
                ]
                mean_probs[lab] = float(np.mean(vals))
            out.append((flagged_ids[row], plurality_vote(votes, mean_probs)))
    out.sort()
    return out


def merge_same_label_clusters(assignment: ClusterAssignment, X) -> ClusterAssignment:
    """Collapse clusters that share a label into one group per label.

    Unresolved clusters keep their own group. Centroids are recomputed as
    the mean of the merged membership.
    """
    groups: dict[str | int, list[int]] = {}
    for cluster, lab in enumerate(assignment.cluster_labels):
        key: str | int = lab if lab is not None else -(cluster + 1)
        groups.setdefault(key, []).append(cluster)

    ordered = sorted(groups.items(), key=lambda kv: (isinstance(kv[0], int), str(kv[0])))
    remap = {}
    new_labels: list[str | None] = []
    for new_idx, (key, clusters) in enumerate(ordered):
        for c in clusters:
            remap[c] = new_idx
        new_labels.append(key if isinstance(key, str) else None)

    new_assignment = np.array([remap[int(c)] for c in assignment.point_cluster], dtype=np.int64)
    k = len(ordered)
    centroids = np.empty((k, assignment.centroids.shape[1]))
    for new_idx in range(k):
        members = np.where(new_assignment == new_idx)[0]
        centroids[new_idx] = np.asarray(X[members].mean(axis=0)).ravel()
    inertia = float(_squared_distances(X, centroids)[np.arange(X.shape[0]), new_assignment].sum())
    return ClusterAssignment(
        k=k,
        centroids=centroids,
        point_cluster=new_assignment,
        cluster_labels=new_labels,
        inertia=inertia,
        inertia_history=list(assignment.inertia_history),
    )


def cl_label(
    flagged_ids: list[int],
    X,
    seed_annotations: AnnotatedSeed,
    known_count: int,
    rng_seed: int,
    restarts: int = KMEANS_RESTARTS,
    max_iter: int = KMEANS_MAX_ITER,
) -> list[tuple[int, str]]:
    """Cluster with k = 2 * known_count, then label clusters from the seed.

    Every seed label is eligible here (unlike km_label); clusters sharing a
    label are merged afterwards, and seedless clusters inherit the nearest
    labeled centroid's label.
    """
    if known_count < 1:
        raise DataError("known intent count must be at least 1")
    k = min(2 * known_count, len(flagged_ids))
    assignment = kmeans_best(X, k, rng_seed, restarts, max_iter)
    seed_pairs = dict(seed_annotations.pairs)
    labels = _label_clusters_by_seed(assignment, flagged_ids, seed_pairs, eligible_labels=None)
    resolved = _resolve_seedless_clusters(assignment, labels)
    assignment.cluster_labels = list(resolved)
    merged = merge_same_label_clusters(assignment, X)
    return _emit(
        flagged_ids,
        seed_pairs,
        lambda r: merged.point_cluster[r],
        lambda c: merged.cluster_labels[c],
    )
