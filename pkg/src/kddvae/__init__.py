"""Unsupervised network intrusion detection on NSL-KDD with a beta-VAE.

Two interchangeable anomaly scores over one trained model: per-sample
reconstruction error, and mean Euclidean distance to the k nearest training
projections in latent space.
"""

__version__ = "0.1.0"

from .archive import EncodedSplit, build_encoded_split, load_archive, save_archive
from .dataset import (
    DatasetSplit,
    Record,
    map_attack_category,
    parse_nslkdd,
    split_dataset,
)
from .layout import FeatureLayout
from .metrics import (
    LabeledScores,
    RocCurve,
    auroc,
    per_category_eval,
    roc_curve,
)
from .model import (
    BetaVae,
    TrainReport,
    checkpoint_digest,
    load_checkpoint,
    save_checkpoint,
    train_model,
)
from .nn import (
    AdamState,
    DenseLayer,
    GaussianParams,
    LossBreakdown,
    VaeNet,
    adam_step,
    boolean_loss,
    categorical_loss,
    continuous_loss,
    dense_forward,
    kl_divergence,
    loss_breakdown,
    reparameterize,
)
from .preprocess import KddPreprocessor, fit_preprocessor
from .schema import AttackCategory
from .scoring import (
    DEFAULT_K_VALUES,
    DetectorConfig,
    LatentIndex,
    LatentKnnScorer,
    ReconstructionScorer,
    classify,
    is_anomaly,
    knn_distances,
    knn_query,
    latent_knn_scores,
    latent_knn_table,
    project_latent,
    reconstruction_error,
    reconstruction_errors,
)
from .sweep import SweepConfig, SweepResult, run_sweep

__all__ = [
    "AdamState",
    "AttackCategory",
    "BetaVae",
    "DEFAULT_K_VALUES",
    "DatasetSplit",
    "DenseLayer",
    "DetectorConfig",
    "EncodedSplit",
    "FeatureLayout",
    "GaussianParams",
    "KddPreprocessor",
    "LabeledScores",
    "LatentIndex",
    "LatentKnnScorer",
    "LossBreakdown",
    "ReconstructionScorer",
    "Record",
    "RocCurve",
    "SweepConfig",
    "SweepResult",
    "TrainReport",
    "VaeNet",
    "adam_step",
    "auroc",
    "boolean_loss",
    "build_encoded_split",
    "categorical_loss",
    "checkpoint_digest",
    "classify",
    "continuous_loss",
    "dense_forward",
    "fit_preprocessor",
    "is_anomaly",
    "kl_divergence",
    "knn_distances",
    "knn_query",
    "latent_knn_scores",
    "latent_knn_table",
    "load_archive",
    "load_checkpoint",
    "loss_breakdown",
    "map_attack_category",
    "parse_nslkdd",
    "per_category_eval",
    "project_latent",
    "reconstruction_error",
    "reconstruction_errors",
    "reparameterize",
    "roc_curve",
    "run_sweep",
    "save_archive",
    "save_checkpoint",
    "split_dataset",
    "train_model",
]
