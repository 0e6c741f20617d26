"""Deprivation-change prediction."""

from .dataset import (
    FEATURE_CLASSES,
    FEATURE_NAMES,
    FEATURE_SETS,
    LabeledDataset,
    assemble_dataset,
    subset_by_change,
)
from .evaluation import (
    ablation_by_class,
    evaluate_cv,
    roc_auc,
    run_subset_evaluation,
    stratified_folds,
)
from .learners import LearnerSettings, TrainedModel, forest_importance, predict_proba, train_classifier

__all__ = [
    "FEATURE_CLASSES",
    "FEATURE_NAMES",
    "FEATURE_SETS",
    "LabeledDataset",
    "LearnerSettings",
    "TrainedModel",
    "ablation_by_class",
    "assemble_dataset",
    "evaluate_cv",
    "forest_importance",
    "predict_proba",
    "roc_auc",
    "run_subset_evaluation",
    "stratified_folds",
    "subset_by_change",
    "train_classifier",
]
