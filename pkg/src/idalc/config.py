"""Run configuration: file parsing, dotted-key overrides, validation.

The file format is flat INI, one section per module. Every key is checked
against a schema; unknown sections or keys fail fast instead of being
silently ignored. Seeds are mandatory so no run ever depends on wall-clock
state.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from .alc import AlcConfig
from .corpus import SplitSpec
from .errors import ConfigError
from .features import FeaturizerConfig
from .labeling import DEFAULT_SEED_FRACTION
from .models import TrainingConfig

DETECTOR_KINDS = ("msp", "doc", "lof")
STRATEGIES = ("km", "mv", "cl")


@dataclass(frozen=True)
class DetectorConfig:
    kind: str = "doc"
    msp_threshold: float = 0.5
    lof_k: int = 20
    lof_contamination: float = 0.3

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ConfigError(f"detector.kind must be one of {DETECTOR_KINDS}, got {self.kind!r}")
        if not 0.0 < self.msp_threshold < 1.0:
            raise ConfigError("detector.msp_threshold must sit strictly inside (0, 1)")
        if self.lof_k < 1:
            raise ConfigError("detector.lof_k must be at least 1")
        if not 0.0 <= self.lof_contamination <= 1.0:
            raise ConfigError("detector.lof_contamination must sit inside [0, 1]")


@dataclass(frozen=True)
class LabelingConfig:
    strategy: str = "km"
    seed_fraction: float = DEFAULT_SEED_FRACTION

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"labeling.strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not 0.0 < self.seed_fraction <= 1.0:
            raise ConfigError("labeling.seed_fraction must sit inside (0, 1]")


@dataclass(frozen=True)
class RunConfig:
    """Everything one reproducible run needs, sub-configs included."""

    dataset_path: str
    dataset_format: str
    split: SplitSpec
    featurizer: FeaturizerConfig
    training: TrainingConfig
    detector: DetectorConfig
    labeling: LabelingConfig
    alc: AlcConfig
    seed: int


def _to_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}") from None


def _to_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}") from None


def _to_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _to_str(raw: str) -> str:
    return raw.strip()


def _to_labels(raw: str) -> frozenset[str]:
    parts = [p.strip() for p in raw.split(",")]
    return frozenset(p for p in parts if p)


def _to_quorum(raw: str) -> int | None:
    if raw.strip().lower() == "none":
        return None
    return _to_int(raw)


# section -> key -> (converter, default); _REQUIRED marks keys with no default.
_REQUIRED = object()
_SCHEMA: dict[str, dict[str, tuple]] = {
    "dataset": {
        "path": (_to_str, _REQUIRED),
        "format": (_to_str, "tsv"),
    },
    "split": {
        "known": (_to_labels, _REQUIRED),
        "novel": (_to_labels, frozenset()),
        "labeled": (_to_int, _REQUIRED),
        "test": (_to_int, _REQUIRED),
    },
    "featurizer": {
        "min_df": (_to_int, 1),
        "char_ngrams": (_to_bool, True),
        "stopwords": (_to_bool, False),
    },
    "training": {
        "lr": (_to_float, 0.1),
        "epochs": (_to_int, 300),
        "l2": (_to_float, 1e-4),
        "knn_k": (_to_int, 5),
        "rf_trees": (_to_int, 100),
        "projection_dim": (_to_int, 256),
    },
    "detector": {
        "kind": (_to_str, "doc"),
        "msp_threshold": (_to_float, 0.5),
        "lof_k": (_to_int, 20),
        "lof_contamination": (_to_float, 0.3),
    },
    "labeling": {
        "strategy": (_to_str, "km"),
        "seed_fraction": (_to_float, DEFAULT_SEED_FRACTION),
    },
    "alc": {
        "threshold_factor": (_to_float, 0.75),
        "quorum": (_to_quorum, 3),
        "cycles": (_to_int, 2),
    },
    "run": {
        "seed": (_to_int, _REQUIRED),
    },
}


def parse_overrides(items: list[str]) -> list[tuple[str, str, str]]:
    """Split ``section.key=value`` strings, validating shape only."""
    parsed = []
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, value = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"override key {dotted!r} is not of the form section.key")
        section, key = dotted.split(".", 1)
        parsed.append((section.strip(), key.strip(), value))
    return parsed


def _read_raw(path: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    return {section: dict(parser.items(section)) for section in parser.sections()}


def load_run_config(path: str, overrides: list[str] | None = None) -> RunConfig:
    """Build a validated RunConfig from a file plus dotted-key overrides.

    Overrides win over file values. Any section or key outside the schema
    raises ConfigError, as does a missing mandatory key (dataset.path,
    the split sizes and intent sets, run.seed).
    """
    raw = _read_raw(path)
    for section, key, value in parse_overrides(overrides or []):
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section {section!r}")
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        raw.setdefault(section, {})[key] = value

    unknown_sections = sorted(set(raw) - set(_SCHEMA))
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {unknown_sections}")
    for section, keys in raw.items():
        unknown = sorted(set(keys) - set(_SCHEMA[section]))
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {unknown}")

    values: dict[str, dict] = {}
    for section, schema in _SCHEMA.items():
        values[section] = {}
        for key, (convert, default) in schema.items():
            if section in raw and key in raw[section]:
                try:
                    values[section][key] = convert(raw[section][key])
                except ConfigError as exc:
                    raise ConfigError(f"{section}.{key}: {exc}") from None
            elif default is _REQUIRED:
                raise ConfigError(f"missing mandatory config key {section}.{key}")
            else:
                values[section][key] = default

    seed = values["run"]["seed"]
    split = SplitSpec(
        known_intents=values["split"]["known"],
        novel_intents=values["split"]["novel"],
        labeled_count=values["split"]["labeled"],
        test_count=values["split"]["test"],
        seed=seed,
    )
    featurizer = FeaturizerConfig(
        min_df=values["featurizer"]["min_df"],
        char_ngrams=values["featurizer"]["char_ngrams"],
        stopwords=values["featurizer"]["stopwords"],
    )
    training = TrainingConfig(
        lr=values["training"]["lr"],
        epochs=values["training"]["epochs"],
        l2=values["training"]["l2"],
        seed=seed,
        knn_k=values["training"]["knn_k"],
        rf_trees=values["training"]["rf_trees"],
        projection_dim=values["training"]["projection_dim"],
    )
    detector = DetectorConfig(
        kind=values["detector"]["kind"],
        msp_threshold=values["detector"]["msp_threshold"],
        lof_k=values["detector"]["lof_k"],
        lof_contamination=values["detector"]["lof_contamination"],
    )
    labeling = LabelingConfig(
        strategy=values["labeling"]["strategy"],
        seed_fraction=values["labeling"]["seed_fraction"],
    )
    try:
        alc = AlcConfig(
            threshold_factor=values["alc"]["threshold_factor"],
            quorum=values["alc"]["quorum"],
            cycles=values["alc"]["cycles"],
        )
    except Exception as exc:
        raise ConfigError(f"alc: {exc}") from None

    if values["dataset"]["format"] not in ("tsv", "jsonl"):
        raise ConfigError(f"dataset.format must be tsv or jsonl, got {values['dataset']['format']!r}")

    return RunConfig(
        dataset_path=values["dataset"]["path"],
        dataset_format=values["dataset"]["format"],
        split=split,
        featurizer=featurizer,
        training=training,
        detector=detector,
        labeling=labeling,
        alc=alc,
        seed=seed,
    )


def config_summary(config: RunConfig) -> dict:
    """Flat echo of the effective configuration, for reports."""
    return {
        "dataset": {"path": config.dataset_path, "format": config.dataset_format},
        "split": {
            "known": sorted(config.split.known_intents),
            "novel": sorted(config.split.novel_intents),
            "labeled": config.split.labeled_count,
            "test": config.split.test_count,
        },
        "featurizer": {
            "min_df": config.featurizer.min_df,
            "char_ngrams": config.featurizer.char_ngrams,
            "stopwords": config.featurizer.stopwords,
        },
        "training": {
            "lr": config.training.lr,
            "epochs": config.training.epochs,
            "l2": config.training.l2,
            "knn_k": config.training.knn_k,
            "rf_trees": config.training.rf_trees,
            "projection_dim": config.training.projection_dim,
        },
        "detector": {
            "kind": config.detector.kind,
            "msp_threshold": config.detector.msp_threshold,
            "lof_k": config.detector.lof_k,
            "lof_contamination": config.detector.lof_contamination,
        },
        "labeling": {
            "strategy": config.labeling.strategy,
            "seed_fraction": config.labeling.seed_fraction,
        },
        "alc": {
            "threshold_factor": config.alc.threshold_factor,
            "quorum": config.alc.quorum,
            "cycles": config.alc.cycles,
        },
        "seed": config.seed,
    }
