"""Semi-supervised intent detection with active-learning based correction."""

from .alc import AlcConfig, CorrectionOutcome, correct_cycle, run_alc
from .config import DetectorConfig, LabelingConfig, RunConfig, load_run_config
from .corpus import (
    AnnotationLedger,
    Corpus,
    DataPool,
    SplitSpec,
    load_corpus,
    make_split,
)
from .errors import ConfigError, DataError, IdalcError, PhaseError
from .features import FeaturizerConfig, Vocabulary, featurize_all, fit_vocabulary
from .labeling import AnnotatedSeed, cl_label, km_label, mv_label, sample_seed
from .models import ModelHandle, TrainingConfig, train_base, train_ensemble
from .ood import OodPartition, doc_detect, doc_fit, evaluate_ood, lof_detect, msp_detect
from .pipeline import Metrics, RunReport, evaluate, render_report, run_idalc

__version__ = "0.1.0"

__all__ = [
    "AlcConfig",
    "AnnotatedSeed",
    "AnnotationLedger",
    "ConfigError",
    "CorrectionOutcome",
    "Corpus",
    "DataError",
    "DataPool",
    "DetectorConfig",
    "FeaturizerConfig",
    "IdalcError",
    "LabelingConfig",
    "Metrics",
    "ModelHandle",
    "OodPartition",
    "PhaseError",
    "RunConfig",
    "RunReport",
    "SplitSpec",
    "TrainingConfig",
    "Vocabulary",
    "cl_label",
    "correct_cycle",
    "doc_detect",
    "doc_fit",
    "evaluate",
    "evaluate_ood",
    "featurize_all",
    "fit_vocabulary",
    "km_label",
    "load_corpus",
    "load_run_config",
    "lof_detect",
    "make_split",
    "msp_detect",
    "mv_label",
    "render_report",
    "run_alc",
    "run_idalc",
    "sample_seed",
    "train_base",
    "train_ensemble",
]
