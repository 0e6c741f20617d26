"""
Cross-validated evaluation of the classifiers.

Folds are stratified and fixed per seed, so every classifier, feature set
and ablation run of one evaluation sees the same splits. Each fold trains
with its own seed derived from (seed, fold).
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.stats import rankdata
from sklearn.metrics import accuracy_score, precision_score
from sklearn.model_selection import StratifiedKFold

from ..core.config import config
from ..core.errors import ModelError
from ..core.models import EvaluationReport, EvaluationRow
from .dataset import FEATURE_SETS, LabeledDataset, subset_by_change
from .learners import LearnerSettings, predict_proba, train_classifier

logger = structlog.get_logger(__name__)

DECISION_THRESHOLD = 0.5


def stratified_folds(labels: Sequence[int], k: int = 10, seed: int = 0) -> np.ndarray:
    """
    Test-fold number (0..k-1) of every sample.

    Raises:
        ModelError: If a class has fewer than k samples
    """
    y = np.asarray(labels)
    classes, counts = np.unique(y, return_counts=True)
    if k < 2:
        raise ModelError("k must be at least 2")
    if len(classes) < 2:
        raise ModelError("stratified folds need two classes")
    if counts.min() < k:
        raise ModelError(f"smallest class has {counts.min()} samples; use k <= {counts.min()}")
    folds = np.empty(len(y), dtype=np.int64)
    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    for fold, (_, test) in enumerate(splitter.split(np.zeros(len(y)), y)):
        folds[test] = fold
    return folds


def fold_seed(seed: int, fold: int) -> int:
    """Training seed of one fold, independent of evaluation order."""
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """
    Area under the ROC curve via the rank-sum statistic; ties count one half.

    Raises:
        ModelError: If labels contain a single class
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ModelError("AUC is undefined for single-class labels")
    ranks = rankdata(scores)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass(frozen=True)
class FoldScore:
    auc: Optional[float]
    accuracy: float
    precision: float


def fold_metrics(scores: Sequence[float], labels: Sequence[int]) -> FoldScore:
    """AUC (None for a single-class fold), accuracy and precision at threshold 0.5."""
    y = np.asarray(labels, dtype=np.int64)
    predicted = (np.asarray(scores, dtype=float) >= DECISION_THRESHOLD).astype(np.int64)
    auc = roc_auc(scores, y) if len(np.unique(y)) == 2 else None
    return FoldScore(
        auc=auc,
        accuracy=float(accuracy_score(y, predicted)),
        precision=float(precision_score(y, predicted, pos_label=1, zero_division=0)),
    )


def cross_validate_scores(dataset: LabeledDataset, kind: str, folds: np.ndarray,
                          feature_set: str = "full", settings: Optional[LearnerSettings] = None,
                          seed: int = 0) -> List[FoldScore]:
    """Per-fold scores of one classifier on fixed folds."""
    features = dataset.features(feature_set)
    labels = dataset.labels()
    scores = []
    for fold in range(int(folds.max()) + 1):
        test = folds == fold
        model = train_classifier(kind, features[~test], labels[~test], settings, fold_seed(seed, fold))
        proba = predict_proba(model, features[test])
        scores.append(fold_metrics(proba, labels[test]))
    return scores


def _summarize(kind: str, threshold: int, feature_set: str, scores: List[FoldScore],
               samples: int) -> EvaluationRow:
    aucs = [s.auc for s in scores if s.auc is not None]
    return EvaluationRow(
        classifier=kind,
        threshold=threshold,
        feature_set=feature_set,
        auc=float(np.mean(aucs)) if aucs else None,
        accuracy=float(np.mean([s.accuracy for s in scores])),
        precision=float(np.mean([s.precision for s in scores])),
        folds=len(scores),
        samples=samples,
        skipped_auc_folds=len(scores) - len(aucs),
    )


def evaluate_cv(dataset: LabeledDataset, kinds: Optional[Sequence[str]] = None, k: int = 10,
                seed: int = 0, feature_set: str = "full", threshold: int = 0,
                settings: Optional[LearnerSettings] = None,
                folds: Optional[np.ndarray] = None) -> EvaluationReport:
    """
    Stratified k-fold evaluation of each classifier.

    Returns:
        EvaluationReport with one row per classifier holding the fold means
        of AUC, accuracy and precision (positive class improved)
    """
    kinds = list(kinds or config.CLASSIFIER_KINDS)
    if folds is None:
        folds = stratified_folds(dataset.labels(), k, seed)
    report = EvaluationReport()
    for kind in kinds:
        scores = cross_validate_scores(dataset, kind, folds, feature_set, settings, seed)
        row = _summarize(kind, threshold, feature_set, scores, len(dataset))
        report.rows.append(row)
        logger.info("classifier_evaluated", classifier=kind, threshold=threshold,
                    feature_set=feature_set, auc=row.auc, accuracy=row.accuracy,
                    precision=row.precision)
    return report


def ablation_by_class(dataset: LabeledDataset, kinds: Optional[Sequence[str]] = None, k: int = 10,
                      seed: int = 0, settings: Optional[LearnerSettings] = None) -> EvaluationReport:
    """Full model plus one run without each of the geographic, network and expenditure classes."""
    folds = stratified_folds(dataset.labels(), k, seed)
    report = EvaluationReport()
    for feature_set in FEATURE_SETS:
        report.extend(evaluate_cv(dataset, kinds, k, seed, feature_set=feature_set,
                                  settings=settings, folds=folds))
    return report


def run_subset_evaluation(dataset: LabeledDataset, kinds: Optional[Sequence[str]] = None,
                          thresholds: Sequence[int] = (0, 10, 20, 30, 40), k: int = 10,
                          seed: int = 0, settings: Optional[LearnerSettings] = None
                          ) -> Tuple[EvaluationReport, Dict[int, str]]:
    """
    evaluate_cv on every |delta rank| subset.

    Returns:
        (report, skipped) where skipped maps a threshold to the reason its
        subset could not be evaluated
    """
    report = EvaluationReport()
    skipped: Dict[int, str] = {}
    for threshold in thresholds:
        subset = subset_by_change(dataset, threshold)
        counts = subset.class_counts()
        if min(counts.values()) < k:
            skipped[threshold] = f"minority class smaller than k={k}: {counts}"
            logger.warning("subset_skipped", threshold=threshold, classes=counts)
            continue
        report.extend(evaluate_cv(subset, kinds, k, seed, threshold=threshold, settings=settings))
    return report, skipped
