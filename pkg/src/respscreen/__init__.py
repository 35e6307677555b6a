"""Respiratory-audio screening: spectrogram front-ends, embedding fusion,
boosted-tree classification, and constrained-specificity evaluation."""

__version__ = "0.1.0"

from .audio import AudioClip, load_wav, normalize, resample, tile_to_duration
from .dataset import (
    ManifestRecord,
    SplitSummary,
    load_manifest,
    summarize_splits,
    synth_corpus,
)
from .embeddings import (
    EmbeddingSet,
    EmbeddingVector,
    average_time_embeddings,
    baseline_embed,
    concat_fusion,
    read_embeddings,
    write_embeddings,
)
from .gbdt import (
    BoostedModel,
    GradientBoostedClassifier,
    TrainConfig,
    load_model,
    predict_proba,
    save_model,
    train,
    train_linear_baseline,
)
from .metrics import (
    ConfidenceInterval,
    EvalReport,
    confidence_interval,
    roc_auc,
    sen_at_spec,
)
from .selection import (
    ClassMeanReducer,
    DimensionRanking,
    OversampleConfig,
    ReductionMask,
    SvmSmote,
    apply_reduction,
    rank_dimensions,
    svm_smote,
)
from .spectrograms import (
    Spectrogram,
    SpectrogramConfig,
    SpectrogramFrontend,
    compute_spectrogram,
    default_config,
)

__all__ = [
    "AudioClip",
    "BoostedModel",
    "ClassMeanReducer",
    "ConfidenceInterval",
    "DimensionRanking",
    "EmbeddingSet",
    "EmbeddingVector",
    "EvalReport",
    "GradientBoostedClassifier",
    "ManifestRecord",
    "OversampleConfig",
    "ReductionMask",
    "Spectrogram",
    "SpectrogramConfig",
    "SpectrogramFrontend",
    "SplitSummary",
    "SvmSmote",
    "TrainConfig",
    "apply_reduction",
    "average_time_embeddings",
    "baseline_embed",
    "compute_spectrogram",
    "concat_fusion",
    "confidence_interval",
    "default_config",
    "load_manifest",
    "load_model",
    "load_wav",
    "normalize",
    "predict_proba",
    "rank_dimensions",
    "read_embeddings",
    "resample",
    "roc_auc",
    "save_model",
    "sen_at_spec",
    "summarize_splits",
    "svm_smote",
    "synth_corpus",
    "tile_to_duration",
    "train",
    "train_linear_baseline",
    "write_embeddings",
]
