"""Base softmax classifier and the five-member classical ensemble.

The base model is multinomial logistic regression over TF-IDF, trained
full-batch with step-halving so the loss never increases. The ensemble
holds RandomForest, Bagging, KNearestNeighbor, LinearDiscriminant, and
LogisticRegression members; a member whose fit fails is kept but flagged
unusable and abstains from any later vote.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import linalg, sparse
from sklearn.ensemble import BaggingClassifier, RandomForestClassifier
from sklearn.tree import DecisionTreeClassifier

from .errors import DataError, IdalcError
from .features import FeatureVector, stack_vectors

ENSEMBLE_KINDS = (
    "RandomForest",
    "Bagging",
    "KNearestNeighbor",
    "LinearDiscriminant",
    "LogisticRegression",
)

BAGGING_TREES = 25
TREE_DEPTH = 32
LDA_SHRINKAGE = 1e-3
MAX_HALVINGS = 30


@dataclass(frozen=True)
class TrainingConfig:
    lr: float = 0.1
    epochs: int = 300
    l2: float = 1e-4
    seed: int = 0
    knn_k: int = 5
    rf_trees: int = 100
    projection_dim: int = 256


def softmax_loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    X: sparse.csr_matrix,
    y_idx: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Summed cross-entropy with a per-sample L2 penalty, plus its gradient.

    weights is (K, d), bias (K,), y_idx the true class index per row. The
    loss is a sum, not a mean, so the gradient grows with the batch and
    the halving line search in the trainer scales the step back as needed;
    the penalty is multiplied by n to keep l2 meaning the same per-sample
    strength at every batch size.
    """
    n = X.shape[0]
    logits = X @ weights.T + bias
    logits -= logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(logits).sum(axis=1))
    nll = float(np.sum(log_z - logits[np.arange(n), y_idx]))
    loss = nll + 0.5 * l2 * n * float(np.sum(weights * weights))

    probs = np.exp(logits - log_z[:, None])
    dlogits = probs
    dlogits[np.arange(n), y_idx] -= 1.0
    grad_w = np.asarray((X.T @ dlogits).T) + l2 * n * weights
    grad_b = dlogits.sum(axis=0)
    return loss, grad_w, grad_b


@dataclass
class ModelHandle:
    label_list: list[str]
    weights: np.ndarray
    bias: np.ndarray
    training_meta: dict[str, Any] = field(default_factory=dict)


def train_base_matrix(X: sparse.csr_matrix, labels: Sequence[str], config: TrainingConfig) -> ModelHandle:
    """Fit the softmax base model on a feature matrix.

    Full-batch gradient descent; a step that would raise the loss is halved
    up to MAX_HALVINGS times, after which training stops, so the recorded
    loss history is non-increasing.
    """
    label_list = sorted(set(labels))
    if len(label_list) < 2:
        raise DataError("softmax training needs at least two distinct labels")
    index = {lab: i for i, lab in enumerate(label_list)}
    y_idx = np.array([index[lab] for lab in labels], dtype=np.int64)

    K, d = len(label_list), X.shape[1]
    W = np.zeros((K, d))
    b = np.zeros(K)
    loss, gw, gb = softmax_loss_and_grad(W, b, X, y_idx, config.l2)
    history = [loss]
    epochs_run = 0
    for _ in range(config.epochs):
        step = config.lr
        accepted = False
        for _ in range(MAX_HALVINGS):
            W2 = W - step * gw
            b2 = b - step * gb
            new_loss, gw2, gb2 = softmax_loss_and_grad(W2, b2, X, y_idx, config.l2)
            if new_loss <= loss:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        W, b, loss, gw, gb = W2, b2, new_loss, gw2, gb2
        history.append(loss)
        epochs_run += 1

    return ModelHandle(
        label_list=label_list,
        weights=W,
        bias=b,
        training_meta={
            "epochs": epochs_run,
            "learning_rate": config.lr,
            "final_loss": loss,
            "loss_history": history,
        },
    )


def train_base(
    labeled: list[tuple[FeatureVector, str]],
    config: TrainingConfig,
    dim: int | None = None,
) -> ModelHandle:
    if not labeled:
        raise DataError("empty training set")
    vectors = [v for v, _ in labeled]
    labels = [lab for _, lab in labeled]
    if dim is None:
        dim = 1 + max((int(v.indices.max()) for v in vectors if len(v)), default=0)
    return train_base_matrix(stack_vectors(vectors, dim), labels, config)


def predict_proba_matrix(model: ModelHandle, X: sparse.csr_matrix) -> np.ndarray:
    logits = X @ model.weights.T + model.bias
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    return exp / exp.sum(axis=1, keepdims=True)


def predict_proba(model: ModelHandle, x: FeatureVector) -> np.ndarray:
    X = stack_vectors([x], model.weights.shape[1])
    return predict_proba_matrix(model, X)[0]


class EnsembleMember:
    """One fitted classifier of a fixed kind, or an unusable placeholder.

    predict breaks probability ties toward the lexicographically smallest
    label so all five kinds share one tie rule.
    """

    def __init__(self, kind: str, label_list: list[str], seed: int, state: Any, usable: bool):
        self.kind = kind
        self.label_list = label_list
        self.seed = seed
        self._state = state
        self.usable = usable

    def predict_proba(self, X: sparse.csr_matrix) -> np.ndarray:
        if not self.usable:
            raise IdalcError(f"{self.kind} member is unusable and cannot predict")
        return self._state.proba(X)

    def predict(self, X: sparse.csr_matrix) -> list[str]:
        probs = self.predict_proba(X)
        return [self.label_list[i] for i in probs.argmax(axis=1)]


class _SklearnState:
    def __init__(self, clf, label_list):
        self._clf = clf
        self._order = np.array([list(clf.classes_).index(lab) for lab in label_list])

    def proba(self, X):
        return self._clf.predict_proba(X)[:, self._order]


class _KnnState:
    """Cosine k-NN on unit-norm rows; similarity ties go to the lower index."""

    def __init__(self, train_X, y_idx, k, n_labels):
        self._X = train_X
        self._y = y_idx
        self._k = min(k, train_X.shape[0])
        self._n_labels = n_labels

    def proba(self, X):
        n = X.shape[0]
        out = np.zeros((n, self._n_labels))
        for start in range(0, n, 1024):
            chunk = X[start : start + 1024]
            sims = np.asarray((chunk @ self._X.T).todense())
            top = np.argsort(-sims, axis=1, kind="stable")[:, : self._k]
            for r in range(top.shape[0]):
                for j in top[r]:
                    out[start + r, self._y[j]] += 1.0
        return out / self._k


class _LdaState:
    def __init__(self, projection, coefs, intercepts):
        self._R = projection
        self._coefs = coefs
        self._intercepts = intercepts

    def proba(self, X):
        Z = np.asarray(X.todense()) if self._R is None else np.asarray(X @ self._R)
        scores = Z @ self._coefs.T + self._intercepts
        scores -= scores.max(axis=1, keepdims=True)
        exp = np.exp(scores)
        return exp / exp.sum(axis=1, keepdims=True)


class _SoftmaxState:
    def __init__(self, model):
        self._model = model

    def proba(self, X):
        return predict_proba_matrix(self._model, X)


def _fit_lda(X, y_idx, label_list, seed, config):
    n, d = X.shape
    K = len(label_list)
    counts = np.bincount(y_idx, minlength=K)
    if counts.min() < 2 or n - K <= 0:
        raise DataError("LinearDiscriminant needs at least two samples per class")

    if d > config.projection_dim:
        rng = np.random.default_rng(seed)
        R = rng.standard_normal((d, config.projection_dim)) / np.sqrt(config.projection_dim)
        Z = np.asarray(X @ R)
    else:
        R = None
        Z = np.asarray(X.todense())

    p = Z.shape[1]
    means = np.vstack([Z[y_idx == c].mean(axis=0) for c in range(K)])
    centered = Z - means[y_idx]
    cov = (centered.T @ centered) / (n - K)
    cov = (1.0 - LDA_SHRINKAGE) * cov + LDA_SHRINKAGE * (np.trace(cov) / p) * np.eye(p)

    alpha = linalg.solve(cov, means.T, assume_a="pos")  # (p, K)
    coefs = alpha.T
    intercepts = np.array(
        [-0.5 * means[c] @ alpha[:, c] + np.log(counts[c] / n) for c in range(K)]
    )
    return _LdaState(R, coefs, intercepts)


def _fit_member(kind: str, X, labels: Sequence[str], seed: int, config: TrainingConfig) -> EnsembleMember:
    if kind not in ENSEMBLE_KINDS:
        raise DataError(f"unknown ensemble member kind: {kind!r}")
    label_list = sorted(set(labels))
    index = {lab: i for i, lab in enumerate(label_list)}
    y_idx = np.array([index[lab] for lab in labels], dtype=np.int64)
    y_arr = np.asarray(labels, dtype=object)
    try:
        if kind == "RandomForest":
            clf = RandomForestClassifier(
                n_estimators=config.rf_trees,
                max_depth=TREE_DEPTH,
                criterion="gini",
                random_state=seed,
                n_jobs=1,
            )
            clf.fit(X, y_arr)
            state: Any = _SklearnState(clf, label_list)
        elif kind == "Bagging":
            clf = BaggingClassifier(
                estimator=DecisionTreeClassifier(max_depth=TREE_DEPTH),
                n_estimators=BAGGING_TREES,
                random_state=seed,
            )
            clf.fit(X, y_arr)
            state = _SklearnState(clf, label_list)
        elif kind == "KNearestNeighbor":
            if X.shape[0] == 0:
                raise DataError("KNearestNeighbor needs at least one sample")
            state = _KnnState(X.tocsr(), y_idx, config.knn_k, len(label_list))
        elif kind == "LinearDiscriminant":
            state = _fit_lda(X, y_idx, label_list, seed, config)
        else:
            state = _SoftmaxState(train_base_matrix(X, list(labels), config))
    except (DataError, ValueError, linalg.LinAlgError):
        return EnsembleMember(kind, label_list, seed, state=None, usable=False)
    return EnsembleMember(kind, label_list, seed, state=state, usable=True)


def train_ensemble_matrix(
    X: sparse.csr_matrix,
    labels: Sequence[str],
    kinds: Sequence[str] = ENSEMBLE_KINDS,
    seed: int = 0,
    config: TrainingConfig = TrainingConfig(),
) -> list[EnsembleMember]:
    if len(set(labels)) < 2:
        raise DataError("ensemble training needs at least two distinct labels")
    members = []
    for idx, kind in enumerate(kinds):
        member_seed = (seed * 1000003 + idx) % (2**31)
        members.append(_fit_member(kind, X, labels, member_seed, config))
    return members


def train_ensemble(
    labeled: list[tuple[FeatureVector, str]],
    kinds: Sequence[str] = ENSEMBLE_KINDS,
    seed: int = 0,
    config: TrainingConfig = TrainingConfig(),
    dim: int | None = None,
) -> list[EnsembleMember]:
    vectors = [v for v, _ in labeled]
    labels = [lab for _, lab in labeled]
    if dim is None:
        dim = 1 + max((int(v.indices.max()) for v in vectors if len(v)), default=0)
    return train_ensemble_matrix(stack_vectors(vectors, dim), labels, kinds, seed, config)


@dataclass
class CvReport:
    kinds: list[str]
    mean_accuracy: dict[str, float]
    per_fold: dict[str, list[float]]
    fold_index: np.ndarray


KindOrFactory = str | Callable[[sparse.csr_matrix, Sequence[str], int], Any]


def cross_validate_matrix(
    X: sparse.csr_matrix,
    labels: Sequence[str],
    kinds: Sequence[KindOrFactory] = ENSEMBLE_KINDS,
    folds: int = 5,
    seed: int = 0,
    config: TrainingConfig = TrainingConfig(),
) -> CvReport:
    """Score each kind by mean accuracy over k folds.

    Fold sizes differ by at most one. Entries of ``kinds`` may also be
    callables (X_train, labels_train, seed) -> classifier with a predict
    method, so non-standard classifiers can be scored by the same harness.
    An unusable member scores zero on that fold.
    """
    n = X.shape[0]
    if folds > n:
        raise DataError(f"cannot make {folds} folds from {n} samples")
    rng = np.random.default_rng(seed)
    fold_index = np.empty(n, dtype=np.int64)
    fold_index[rng.permutation(n)] = np.arange(n) % folds

    labels_arr = np.asarray(labels, dtype=object)
    names = [k if isinstance(k, str) else getattr(k, "__name__", f"custom{i}") for i, k in enumerate(kinds)]
    per_fold: dict[str, list[float]] = {name: [] for name in names}
    for f in range(folds):
        test_mask = fold_index == f
        train_idx = np.where(~test_mask)[0]
        test_idx = np.where(test_mask)[0]
        X_train, X_test = X[train_idx], X[test_idx]
        y_train = labels_arr[train_idx].tolist()
        y_test = labels_arr[test_idx]
        for name, kind in zip(names, kinds):
            if isinstance(kind, str):
                member = _fit_member(kind, X_train, y_train, seed, config)
                if not member.usable:
                    per_fold[name].append(0.0)
                    continue
                preds = member.predict(X_test)
            else:
                preds = kind(X_train, y_train, seed).predict(X_test)
            acc = float(np.mean([p == g for p, g in zip(preds, y_test)]))
            per_fold[name].append(acc)

    mean_accuracy = {name: float(np.mean(scores)) for name, scores in per_fold.items()}
    return CvReport(kinds=names, mean_accuracy=mean_accuracy, per_fold=per_fold, fold_index=fold_index)


def cross_validate(
    labeled: list[tuple[FeatureVector, str]],
    kinds: Sequence[KindOrFactory] = ENSEMBLE_KINDS,
    folds: int = 5,
    seed: int = 0,
    config: TrainingConfig = TrainingConfig(),
    dim: int | None = None,
) -> CvReport:
    vectors = [v for v, _ in labeled]
    labels = [lab for _, lab in labeled]
    if dim is None:
        dim = 1 + max((int(v.indices.max()) for v in vectors if len(v)), default=0)
    return cross_validate_matrix(stack_vectors(vectors, dim), labels, kinds, folds, seed, config)
