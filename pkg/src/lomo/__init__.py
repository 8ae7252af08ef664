"""Weakly-supervised sequence classification with latent sub-event templates
and a learned cost table over their temporal orderings, plus MIL and
temporal-pooling baselines, preprocessing, synthetic benchmarks,
cross-validation, and metrics."""

from .core import LomoError, Rng, blend, child_seed, dot
from .data import (
    DatasetManifest,
    Fold,
    FoldPlan,
    PcaBasis,
    PreprocessConfig,
    SynthSpec,
    gen_synthetic,
    l2_normalize,
    make_folds,
    parse_manifest,
    pca_fit,
    pca_transform,
    pool,
    read_sequence,
    stack_frames,
    write_sequence,
)
from .evaluation import CvResult, avg_class_accuracy, roc_auc, roc_eer_rate, run_cv
from .inference import (
    FrameSequence,
    InferenceConfig,
    LatentAssignment,
    fuse_scores,
    latent_assign,
    ova_predict,
    score,
)
from .model import (
    LomoModel,
    init_model,
    load_model,
    perm_index,
    perm_unrank,
    rank_pattern,
    save_model,
)
from .training import LabeledSequence, TrainConfig, objective, sgd_step, train, train_ova

__version__ = "0.1.0"

__all__ = [
    "CvResult",
    "DatasetManifest",
    "Fold",
    "FoldPlan",
    "FrameSequence",
    "InferenceConfig",
    "LabeledSequence",
    "LatentAssignment",
    "LomoError",
    "LomoModel",
    "PcaBasis",
    "PreprocessConfig",
    "Rng",
    "SynthSpec",
    "TrainConfig",
    "avg_class_accuracy",
    "blend",
    "child_seed",
    "dot",
    "fuse_scores",
    "gen_synthetic",
    "init_model",
    "l2_normalize",
    "latent_assign",
    "load_model",
    "make_folds",
    "objective",
    "ova_predict",
    "parse_manifest",
    "pca_fit",
    "pca_transform",
    "perm_index",
    "perm_unrank",
    "pool",
    "rank_pattern",
    "read_sequence",
    "roc_auc",
    "roc_eer_rate",
    "run_cv",
    "save_model",
    "score",
    "sgd_step",
    "stack_frames",
    "train",
    "train_ova",
    "write_sequence",
]
