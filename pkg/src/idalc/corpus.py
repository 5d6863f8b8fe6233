"""Dataset ingestion, labeled/unlabeled/test splitting, and the annotation oracle.

Gold labels are masked by construction: after a pool is built, the only
readers of gold labels are ``DataPool.oracle_annotate`` (metered through an
``AnnotationLedger``) and ``DataPool.eval_gold`` (reserved for test-time
evaluation and report statistics).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

PHASE_ID = "ID"
PHASE_ALC = "ALC"


@dataclass(frozen=True)
class Utterance:
    """A single user query. The gold intent is not stored here."""

    id: int
    text: str


class Corpus:
    """An immutable collection of utterances with a hidden gold labeling."""

    def __init__(self, texts: list[str], labels: list[str], ids: list[int] | None = None):
        if not texts:
            raise DataError("corpus is empty")
        if ids is None:
            ids = list(range(len(texts)))
        seen: set[int] = set()
        dupes = sorted({i for i in ids if i in seen or seen.add(i)})  # type: ignore[func-returns-value]
        if dupes:
            raise DataError(f"duplicate utterance ids: {dupes}")
        for pos, text in enumerate(texts):
            if not text.strip():
                raise DataError(f"record {pos}: empty text")
        self._ids = list(ids)
        self._texts = dict(zip(ids, texts))
        self._gold = dict(zip(ids, labels))
        self.label_inventory = frozenset(labels)

    def __len__(self) -> int:
        return len(self._ids)

    def ids(self) -> list[int]:
        return list(self._ids)

    def text(self, id: int) -> str:
        return self._texts[id]

    def utterance(self, id: int) -> Utterance:
        return Utterance(id=id, text=self._texts[id])

    def label_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for label in self._gold.values():
            counts[label] = counts.get(label, 0) + 1
        return counts


def load_corpus(path: str, format: str = "tsv") -> Corpus:
    """Read a dataset file into a Corpus.

    ``tsv``: one record per line, ``text<TAB>label``, UTF-8, ids assigned in
    file order. ``jsonl``: one JSON object per line with fields ``text`` and
    ``label`` and an optional explicit ``id``.
    """
    if format == "tsv":
        return _load_tsv(path)
    if format == "jsonl":
        return _load_jsonl(path)
    raise DataError(f"unknown dataset format: {format!r}")


def _load_tsv(path: str) -> Corpus:
    texts: list[str] = []
    labels: list[str] = []
    with open(path, encoding="utf-8") as handle:
        for index, line in enumerate(handle):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"record {index}: expected text<TAB>label, got {len(parts)} fields")
            text, label = parts
            if not label.strip():
                raise DataError(f"record {index}: missing label")
            texts.append(text)
            labels.append(label.strip())
    return Corpus(texts, labels)


def _load_jsonl(path: str) -> Corpus:
    texts: list[str] = []
    labels: list[str] = []
    ids: list[int] = []
    explicit = False
    with open(path, encoding="utf-8") as handle:
        for index, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"record {index}: invalid JSON ({exc})") from exc
            if "text" not in record:
                raise DataError(f"record {index}: missing text field")
            if "label" not in record:
                raise DataError(f"record {index}: missing label field")
            texts.append(str(record["text"]))
            labels.append(str(record["label"]).strip())
            if "id" in record:
                explicit = True
                ids.append(int(record["id"]))
            else:
                ids.append(index)
    if not texts:
        raise DataError("corpus is empty")
    return Corpus(texts, labels, ids=ids if explicit else None)


@dataclass(frozen=True)
class SplitSpec:
    """How to carve a corpus into labeled, unlabeled, and test sets.

    ``test_count`` is required because the published split sizes for the
    benchmark datasets are not derivable from the other fields.
    """

    known_intents: frozenset[str]
    novel_intents: frozenset[str]
    labeled_count: int
    test_count: int
    seed: int

    def validate(self, inventory: frozenset[str]) -> None:
        if self.known_intents & self.novel_intents:
            raise DataError("known and novel intent sets overlap")
        if self.known_intents | self.novel_intents != inventory:
            missing = inventory - (self.known_intents | self.novel_intents)
            extra = (self.known_intents | self.novel_intents) - inventory
            raise DataError(f"intent sets do not cover the corpus inventory (missing={sorted(missing)}, unknown={sorted(extra)})")
        if self.labeled_count <= 0:
            raise DataError("labeled_count must be positive")
        if self.test_count < 0:
            raise DataError("test_count must be non-negative")


@dataclass
class AnnotationLedger:
    """Counts every oracle call, split by pipeline phase.

    Re-annotating an id already paid for in this run is free; the counters
    only ever increase.
    """

    unlabeled_size: int
    id_phase_calls: int = 0
    alc_phase_calls: int = 0
    _seen: set[int] = field(default_factory=set, repr=False)

    def charge(self, ids: list[int], phase: str) -> None:
        fresh = [i for i in ids if i not in self._seen]
        self._seen.update(fresh)
        if phase == PHASE_ID:
            self.id_phase_calls += len(fresh)
        elif phase == PHASE_ALC:
            self.alc_phase_calls += len(fresh)
        else:
            raise ValueError(f"unknown annotation phase: {phase!r}")

    @property
    def total_calls(self) -> int:
        return self.id_phase_calls + self.alc_phase_calls

    @property
    def percentage(self) -> float:
        if self.unlabeled_size == 0:
            return 0.0
        return 100.0 * self.total_calls / self.unlabeled_size


class DataPool:
    """The labeled/unlabeled/test partition of one corpus.

    Immutable after construction. Gold labels for unlabeled and test samples
    live behind ``oracle_annotate`` and ``eval_gold``; nothing else reads them.
    """

    def __init__(
        self,
        corpus: Corpus,
        spec: SplitSpec,
        labeled: list[tuple[int, str]],
        unlabeled_ids: list[int],
        test_ids: list[int],
    ):
        self._corpus = corpus
        self.spec = spec
        self.labeled = list(labeled)
        self.unlabeled_ids = list(unlabeled_ids)
        self.test_ids = list(test_ids)
        self._unlabeled_set = set(unlabeled_ids)
        labeled_ids = {i for i, _ in labeled}
        if labeled_ids & self._unlabeled_set or labeled_ids & set(test_ids) or self._unlabeled_set & set(test_ids):
            raise DataError("labeled, unlabeled, and test sets must be disjoint")

    def text(self, id: int) -> str:
        return self._corpus.text(id)

    def texts(self, ids: list[int]) -> list[str]:
        return [self._corpus.text(i) for i in ids]

    @property
    def known_intents(self) -> frozenset[str]:
        return self.spec.known_intents

    @property
    def novel_intents(self) -> frozenset[str]:
        return self.spec.novel_intents

    def new_ledger(self) -> AnnotationLedger:
        return AnnotationLedger(unlabeled_size=len(self.unlabeled_ids))

    def oracle_annotate(self, ids: list[int], phase: str, ledger: AnnotationLedger) -> list[tuple[int, str]]:
        """Replay gold labels for unlabeled-pool ids, metering the ledger.

        Every id must sit in the unlabeled pool. Ids already annotated in
        this run are returned again without incrementing the counter.
        """
        for i in ids:
            if i not in self._unlabeled_set:
                raise DataError(f"id {i} is not in the unlabeled pool")
        ledger.charge(list(ids), phase)
        return [(i, self._corpus._gold[i]) for i in ids]

    def eval_gold(self, ids: list[int]) -> dict[int, str]:
        """Gold labels for evaluation and report statistics only.

        This is the test-time reader; it must never feed labels back into
        training.
        """
        return {i: self._corpus._gold[i] for i in ids}


def make_split(corpus: Corpus, spec: SplitSpec) -> DataPool:
    """Carve ``corpus`` into a DataPool according to ``spec``.

    The labeled set draws only known-intent samples, allocated across known
    intents proportionally to their frequency (largest-remainder rounding).
    The test set is then drawn uniformly from the remainder and everything
    left is the unlabeled pool. Deterministic under ``spec.seed``.
    """
    spec.validate(corpus.label_inventory)
    rng = np.random.default_rng(spec.seed)

    by_intent: dict[str, list[int]] = {label: [] for label in corpus.label_inventory}
    for i in corpus.ids():
        by_intent[corpus._gold[i]].append(i)

    known_total = sum(len(by_intent[k]) for k in spec.known_intents)
    if spec.labeled_count > known_total:
        raise DataError(f"labeled_count {spec.labeled_count} exceeds the {known_total} available known-intent samples")

    quotas = _proportional_quotas(
        {k: len(by_intent[k]) for k in sorted(spec.known_intents)}, spec.labeled_count
    )
    labeled: list[tuple[int, str]] = []
    labeled_ids: set[int] = set()
    for intent in sorted(spec.known_intents):
        candidates = sorted(by_intent[intent])
        take = rng.choice(len(candidates), size=quotas[intent], replace=False)
        for pos in sorted(take.tolist()):
            labeled.append((candidates[pos], intent))
            labeled_ids.add(candidates[pos])

    remainder = [i for i in corpus.ids() if i not in labeled_ids]
    if spec.test_count > len(remainder):
        raise DataError(f"test_count {spec.test_count} exceeds the {len(remainder)} samples left after labeling")
    test_pick = rng.choice(len(remainder), size=spec.test_count, replace=False)
    test_mask = np.zeros(len(remainder), dtype=bool)
    test_mask[test_pick] = True
    test_ids = [remainder[j] for j in range(len(remainder)) if test_mask[j]]
    unlabeled_ids = [remainder[j] for j in range(len(remainder)) if not test_mask[j]]

    labeled.sort()
    return DataPool(corpus, spec, labeled, unlabeled_ids, test_ids)


def _proportional_quotas(sizes: dict[str, int], total: int) -> dict[str, int]:
    # Largest-remainder apportionment, capped by availability.
    pool = sum(sizes.values())
    shares = {k: total * n / pool for k, n in sizes.items()}
    quotas = {k: min(int(share), sizes[k]) for k, share in shares.items()}
    leftover = total - sum(quotas.values())
    order = sorted(sizes, key=lambda k: (-(shares[k] - int(shares[k])), k))
    while leftover > 0:
        progressed = False
        for k in order:
            if leftover == 0:
                break
            if quotas[k] < sizes[k]:
                quotas[k] += 1
                leftover -= 1
                progressed = True
        if not progressed:
            raise DataError("cannot fill labeled_count from known intents")
    return quotas
