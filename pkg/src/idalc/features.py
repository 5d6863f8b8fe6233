"""Sparse TF-IDF featurization.

Tokens are unicode-lowercased alphanumeric runs. With ``char_ngrams`` on
(the default), character 3..5-grams of each surviving token are added so
scripts written without spaces still produce features; gram terms carry a
``#`` prefix, which no word token can contain, so the two term kinds never
collide.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import DataError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Minimal English function-word list; only consulted when the stopwords flag
# is on.
ENGLISH_STOPWORDS = frozenset(
    """a an and are as at be but by for from has have i in is it its me my of on
    or that the this to was we what when where which who will with you your""".split()
)


@dataclass(frozen=True)
class FeaturizerConfig:
    min_df: int = 1
    char_ngrams: bool = True
    stopwords: bool = False


def tokenize(text: str, config: FeaturizerConfig) -> list[str]:
    """Terms for one text: lowercased alphanumeric runs plus optional grams."""
    words = _TOKEN_RE.findall(text.lower())
    if config.stopwords:
        words = [w for w in words if w not in ENGLISH_STOPWORDS]
    terms = list(words)
    if config.char_ngrams:
        for word in words:
            for n in (3, 4, 5):
                for start in range(len(word) - n + 1):
                    terms.append("#" + word[start : start + n])
    return terms


@dataclass(frozen=True)
class Vocabulary:
    index: dict[str, int]
    document_frequency: dict[str, int]
    n_docs: int
    config: FeaturizerConfig = field(default_factory=FeaturizerConfig)
    idf_vector: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return len(self.index)

    def idf(self, term: str) -> float:
        return math.log((1 + self.n_docs) / (1 + self.document_frequency[term])) + 1.0


@dataclass(frozen=True)
class FeatureVector:
    """Sorted sparse (index, weight) pairs with unit L2 norm when non-empty."""

    indices: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


def fit_vocabulary(texts: list[str], config: FeaturizerConfig = FeaturizerConfig()) -> Vocabulary:
    """Build a vocabulary over ``texts``; term order is lexicographic."""
    if not texts:
        raise DataError("cannot fit a vocabulary on an empty text list")
    df: dict[str, int] = {}
    for text in texts:
        for term in set(tokenize(text, config)):
            df[term] = df.get(term, 0) + 1
    kept = {t: c for t, c in df.items() if c >= config.min_df}
    if not kept:
        raise DataError("no terms survive tokenization and frequency filtering")
    terms = sorted(kept)
    index = {term: i for i, term in enumerate(terms)}
    n_docs = len(texts)
    idf_vector = np.array(
        [math.log((1 + n_docs) / (1 + kept[t])) + 1.0 for t in terms], dtype=np.float64
    )
    return Vocabulary(
        index=index, document_frequency=kept, n_docs=n_docs, config=config, idf_vector=idf_vector
    )


def featurize(text: str, vocab: Vocabulary) -> FeatureVector:
    """L2-normalized TF-IDF vector for one text; OOV terms are dropped."""
    counts: dict[int, int] = {}
    for term in tokenize(text, vocab.config):
        col = vocab.index.get(term)
        if col is not None:
            counts[col] = counts.get(col, 0) + 1
    if not counts:
        return FeatureVector(indices=np.empty(0, dtype=np.int64), weights=np.empty(0, dtype=np.float64))
    cols = np.array(sorted(counts), dtype=np.int64)
    tf = np.array([counts[c] for c in cols], dtype=np.float64)
    weights = tf * vocab.idf_vector[cols]
    weights /= np.linalg.norm(weights)
    return FeatureVector(indices=cols, weights=weights)


def stack_vectors(vectors: list[FeatureVector], dim: int) -> sparse.csr_matrix:
    """Stack sparse vectors into a CSR matrix of shape (len(vectors), dim)."""
    indptr = [0]
    indices: list[np.ndarray] = []
    data: list[np.ndarray] = []
    for vec in vectors:
        indices.append(vec.indices)
        data.append(vec.weights)
        indptr.append(indptr[-1] + len(vec))
    if indices:
        all_indices = np.concatenate(indices)
        all_data = np.concatenate(data)
    else:
        all_indices = np.empty(0, dtype=np.int64)
        all_data = np.empty(0, dtype=np.float64)
    return sparse.csr_matrix(
        (all_data, all_indices, np.array(indptr, dtype=np.int64)),
        shape=(len(vectors), dim),
    )


def featurize_all(texts: list[str], vocab: Vocabulary) -> sparse.csr_matrix:
    """Stack per-text vectors into a CSR matrix of shape (len(texts), |vocab|)."""
    return stack_vectors([featurize(t, vocab) for t in texts], len(vocab))
