"""
The four classifiers and their preprocessing.

Every model is a scikit-learn Pipeline: numeric features standardized,
SubRegion one-hot encoded, both fitted on the training split only.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field
from sklearn.compose import ColumnTransformer
from sklearn.ensemble import RandomForestClassifier
from sklearn.linear_model import LogisticRegression
from sklearn.naive_bayes import GaussianNB
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import OneHotEncoder, StandardScaler

from ..core.config import config
from ..core.errors import ModelError
from .cart import CartTree
from .dataset import CATEGORICAL_FEATURES, POSITIVE

logger = structlog.get_logger(__name__)


class LearnerSettings(BaseModel):
    """Fixed hyperparameters of the four learners."""

    model_config = ConfigDict(frozen=True)

    nb_var_smoothing: float = Field(1e-9, ge=0)
    lr_l2: float = Field(1.0, gt=0)
    lr_tol: float = Field(1e-6, gt=0)
    lr_max_iter: int = Field(10_000, ge=1)
    tree_max_depth: int = Field(8, ge=1)
    tree_min_samples_leaf: int = Field(5, ge=1)
    forest_trees: int = Field(100, ge=1)
    forest_max_features: str = "sqrt"
    forest_bootstrap: bool = True


DEFAULT_SETTINGS = LearnerSettings()


@dataclass(frozen=True)
class TrainedModel:
    """
    A fitted classifier.

    Attributes:
        kind: One of config.CLASSIFIER_KINDS
        pipeline: Fitted preprocessing + estimator
        feature_names: Training columns, in order
        categorical: Columns that were one-hot encoded
        seed: Seed the estimator was built with
    """
    kind: str
    pipeline: Pipeline
    feature_names: Tuple[str, ...]
    categorical: Tuple[str, ...]
    seed: int

    @property
    def estimator(self):
        return self.pipeline.named_steps["model"]


def _estimator(kind: str, settings: LearnerSettings, seed: int):
    if kind == "naive_bayes":
        return GaussianNB(var_smoothing=settings.nb_var_smoothing)
    if kind == "logistic_regression":
        return LogisticRegression(C=1.0 / settings.lr_l2, tol=settings.lr_tol,
                                  max_iter=settings.lr_max_iter, solver="lbfgs")
    if kind == "decision_tree":
        return CartTree(max_depth=settings.tree_max_depth,
                        min_samples_leaf=settings.tree_min_samples_leaf)
    if kind == "random_forest":
        return RandomForestClassifier(n_estimators=settings.forest_trees, criterion="gini",
                                      max_depth=settings.tree_max_depth,
                                      min_samples_leaf=settings.tree_min_samples_leaf,
                                      max_features=settings.forest_max_features,
                                      bootstrap=settings.forest_bootstrap,
                                      random_state=seed, n_jobs=1)
    raise ModelError(f"unknown classifier kind {kind!r}; expected one of {config.CLASSIFIER_KINDS}")


def _preprocessor(columns: Sequence[str]) -> ColumnTransformer:
    numeric = [c for c in columns if c not in CATEGORICAL_FEATURES]
    categorical = [c for c in columns if c in CATEGORICAL_FEATURES]
    transformers = [("numeric", StandardScaler(), numeric)]
    if categorical:
        transformers.append(
            ("categorical", OneHotEncoder(handle_unknown="ignore", sparse_output=False), categorical)
        )
    return ColumnTransformer(transformers, remainder="drop")


def train_classifier(kind: str, features: pd.DataFrame, labels: Sequence[int],
                     settings: Optional[LearnerSettings] = None, seed: int = 0) -> TrainedModel:
    """
    Fit one classifier.

    Args:
        kind: naive_bayes, logistic_regression, decision_tree or random_forest
        features: Training feature frame (SubRegion as strings)
        labels: 1 for improved, 0 for worsened
        settings: Hyperparameters (defaults to DEFAULT_SETTINGS)
        seed: Seed for the random forest

    Raises:
        ModelError: For an unknown kind or single-class training labels
    """
    settings = settings or DEFAULT_SETTINGS
    y = np.asarray(labels, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ModelError(f"{kind} needs both classes in the training data")
    estimator = _estimator(kind, settings, int(seed))
    columns = tuple(features.columns)
    pipeline = Pipeline([("preprocess", _preprocessor(columns)), ("model", estimator)])
    pipeline.fit(features, y)
    logger.debug("classifier_trained", kind=kind, samples=len(y), features=len(columns))
    return TrainedModel(kind, pipeline, columns,
                        tuple(c for c in columns if c in CATEGORICAL_FEATURES), int(seed))


def predict_proba(model: TrainedModel, features: pd.DataFrame) -> np.ndarray:
    """
    Probability of "improved" for each row.

    Raises:
        ModelError: If the columns differ from the training schema
    """
    columns = tuple(features.columns)
    if columns != model.feature_names:
        raise ModelError(f"feature schema mismatch: trained on {list(model.feature_names)}, "
                         f"got {list(columns)}")
    for name in model.feature_names:
        expects_text = name in model.categorical
        if expects_text == pd.api.types.is_numeric_dtype(features[name]):
            raise ModelError(f"feature {name} has the wrong type for the trained recipe")
    proba = model.pipeline.predict_proba(features)
    classes = list(model.pipeline.classes_)
    return proba[:, classes.index(POSITIVE)]


def forest_importance(model: TrainedModel) -> pd.Series:
    """
    Gini importance per input feature, sorted descending.

    One-hot columns are summed back into their categorical feature and the
    result is normalized to sum to 1.

    Raises:
        ModelError: If the model is not a random forest
    """
    if model.kind != "random_forest":
        raise ModelError(f"importance needs a random_forest model, got {model.kind}")
    preprocess = model.pipeline.named_steps["preprocess"]
    parents = [c for c in model.feature_names if c not in model.categorical]
    if model.categorical:
        encoder = preprocess.named_transformers_["categorical"]
        parents += [name for name, cats in zip(model.categorical, encoder.categories_) for _ in cats]
    raw = pd.Series(model.estimator.feature_importances_, index=parents)
    importance = raw.groupby(level=0, sort=False).sum().reindex(list(model.feature_names))
    total = importance.sum()
    if total > 0:
        importance = importance / total
    return importance.sort_values(ascending=False, kind="mergesort")
