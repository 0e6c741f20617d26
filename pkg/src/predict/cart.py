"""
Deterministic gini CART tree.

Splits minimise the weighted child gini over every feature and every
midpoint between consecutive distinct values. Features are scanned in
index order and thresholds in ascending order, and a candidate replaces
the incumbent only when strictly better, so ties go to the lowest feature
index, then the lowest threshold.

CartTree follows the scikit-learn estimator protocol and sits at the end
of the decision_tree pipeline.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

LEAF = -1

# Absolute slack when comparing unnormalised child impurities
TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class TreeArrays:
    """
    A fitted tree in parallel arrays, indexed by node (0 is the root).

    Attributes:
        feature: Split feature per node, LEAF for leaves
        threshold: Split value per node (x <= threshold goes left), NaN for leaves
        children_left, children_right: Child node ids, LEAF for leaves
        value: Class frequencies of the training rows reaching each node
        n_node_samples: Training rows reaching each node
        impurity: Gini impurity per node
    """
    feature: np.ndarray
    threshold: np.ndarray
    children_left: np.ndarray
    children_right: np.ndarray
    value: np.ndarray
    n_node_samples: np.ndarray
    impurity: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf id reached by each row."""
        nodes = np.zeros(len(x), dtype=np.intp)
        while True:
            active = np.flatnonzero(self.feature[nodes] != LEAF)
            if not len(active):
                return nodes
            current = nodes[active]
            goes_left = x[active, self.feature[current]] <= self.threshold[current]
            nodes[active] = np.where(goes_left, self.children_left[current],
                                     self.children_right[current])

    def importances(self, n_features: int) -> np.ndarray:
        """Total gini decrease per feature, normalised to sum 1 (zeros for a single leaf)."""
        decrease = np.zeros(n_features)
        weighted = self.n_node_samples * self.impurity
        for node in np.flatnonzero(self.feature != LEAF):
            left, right = self.children_left[node], self.children_right[node]
            gain = weighted[node] - weighted[left] - weighted[right]
            decrease[self.feature[node]] += max(gain, 0.0)
        total = decrease.sum()
        return decrease / total if total > 0 else decrease


def gini(class_counts: np.ndarray) -> float:
    n = class_counts.sum()
    if n == 0:
        return 0.0
    return float(1.0 - np.sum((class_counts / n) ** 2))


def _midpoint(low: float, high: float) -> float:
    cut = (low + high) / 2.0
    if not np.isfinite(cut) or cut >= high:
        cut = low
    return float(cut)


def best_split(x: np.ndarray, y: np.ndarray, n_classes: int,
               min_samples_leaf: int = 1) -> Optional[Tuple[int, float]]:
    """
    Best (feature, threshold) for the rows of one node.

    Args:
        x: Node rows, shape (n, d)
        y: Class ids 0..n_classes-1
        n_classes: Number of classes
        min_samples_leaf: Minimum rows on each side of a cut

    Returns:
        (feature, threshold) or None when no cut leaves both sides large enough
    """
    n = len(y)
    if n < 2:
        return None
    onehot = np.eye(n_classes)[y]
    total = onehot.sum(axis=0)
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    sized = (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)

    best: Optional[Tuple[int, float]] = None
    best_impurity = np.inf
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind="mergesort")
        values = x[order, j]
        left_counts = np.cumsum(onehot[order], axis=0)[:-1]
        right_counts = total - left_counts
        impurity = (n_left - (left_counts ** 2).sum(axis=1) / n_left
                    + n_right - (right_counts ** 2).sum(axis=1) / n_right)
        valid = sized & (values[1:] > values[:-1])
        if not valid.any():
            continue
        impurity = np.where(valid, impurity, np.inf)
        position = int(np.flatnonzero(impurity <= impurity.min() + TIE_TOLERANCE)[0])
        if impurity[position] < best_impurity - TIE_TOLERANCE:
            best_impurity = impurity[position]
            best = (j, _midpoint(values[position], values[position + 1]))
    return best


def grow_tree(x: np.ndarray, y: np.ndarray, n_classes: int, max_depth: int,
              min_samples_leaf: int) -> TreeArrays:
    """Grow a tree depth-first; nodes are numbered in pre-order."""
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[np.ndarray] = []
    samples: List[int] = []
    impurity: List[float] = []

    def add_node(rows: np.ndarray, depth: int) -> int:
        node = len(feature)
        counts = np.bincount(y[rows], minlength=n_classes).astype(np.float64)
        feature.append(LEAF)
        threshold.append(np.nan)
        left.append(LEAF)
        right.append(LEAF)
        value.append(counts / len(rows))
        samples.append(len(rows))
        impurity.append(gini(counts))
        if depth >= max_depth or len(rows) < 2 * min_samples_leaf or impurity[node] == 0.0:
            return node
        split = best_split(x[rows], y[rows], n_classes, min_samples_leaf)
        if split is None:
            return node
        j, cut = split
        goes_left = x[rows, j] <= cut
        feature[node], threshold[node] = j, cut
        left[node] = add_node(rows[goes_left], depth + 1)
        right[node] = add_node(rows[~goes_left], depth + 1)
        return node

    add_node(np.arange(len(y)), 0)
    return TreeArrays(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=np.float64),
        children_left=np.asarray(left, dtype=np.intp),
        children_right=np.asarray(right, dtype=np.intp),
        value=np.vstack(value),
        n_node_samples=np.asarray(samples, dtype=np.float64),
        impurity=np.asarray(impurity, dtype=np.float64),
    )


class CartTree(ClassifierMixin, BaseEstimator):
    """Single gini CART tree with a fixed tie order; fitting draws no random numbers."""

    def __init__(self, max_depth: int = 8, min_samples_leaf: int = 5):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y):
        x = np.asarray(X, dtype=np.float64)
        self.classes_, encoded = np.unique(np.asarray(y), return_inverse=True)
        self.n_features_in_ = x.shape[1]
        self.tree_ = grow_tree(x, encoded.astype(np.intp), len(self.classes_), self.max_depth,
                               self.min_samples_leaf)
        return self

    def predict_proba(self, X) -> np.ndarray:
        x = np.asarray(X, dtype=np.float64)
        return self.tree_.value[self.tree_.apply(x)]

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    @property
    def feature_importances_(self) -> np.ndarray:
        return self.tree_.importances(self.n_features_in_)
