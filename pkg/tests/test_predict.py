"""
Tests for dataset assembly, the four learners and cross-validated evaluation.
"""

import numpy as np
import pandas as pd
import pytest

from src.core.errors import ModelError
from src.core.models import ChangeLabel, LabeledSample, Rejections, Ward
from src.ingest.readers import DeprivationTable
from src.metrics.panel import WardMetricsPanel
from src.predict.dataset import (
    FEATURE_CLASSES,
    FEATURE_NAMES,
    FEATURE_SETS,
    LabeledDataset,
    assemble_dataset,
    subset_by_change,
)
from src.predict.evaluation import (
    ablation_by_class,
    evaluate_cv,
    fold_metrics,
    roc_auc,
    run_subset_evaluation,
    stratified_folds,
)
from src.predict.cart import CartTree
from src.predict.learners import LearnerSettings, forest_importance, predict_proba, train_classifier

RING = (((0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0)),)
SMALL_FOREST = LearnerSettings(forest_trees=15)


def make_dataset(n=80, seed=0):
    """Samples whose label follows CEA with some noise; |delta| spreads over 1..60."""
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        features = {name: float(rng.normal()) for name in FEATURE_NAMES if name != "SubRegion"}
        features["SubRegion"] = ["Central", "East", "West"][i % 3]
        score = 2.0 * features["CEA"] + rng.normal(0.0, 0.5)
        delta = (1 + (i * 7) % 60) * (1 if score > 0 else -1)
        label = ChangeLabel.IMPROVED if delta > 0 else ChangeLabel.WORSENED
        samples.append(LabeledSample(f"W{i:03d}", features, label, delta))
    return LabeledDataset(tuple(samples))


def _pairwise_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def _gini(labels):
    if len(labels) == 0:
        return 0.0
    p = np.mean(labels)
    return 1.0 - p ** 2 - (1.0 - p) ** 2


def _exhaustive_split(x, labels):
    """(impurity, feature, threshold) of the first best cut, scanning features then cuts in order."""
    best = (np.inf, None, None)
    for j in range(x.shape[1]):
        values = np.unique(x[:, j])
        for lo, hi in zip(values, values[1:]):
            cut = (lo + hi) / 2
            mask = x[:, j] <= cut
            impurity = (mask.sum() * _gini(labels[mask]) + (~mask).sum() * _gini(labels[~mask])) / len(labels)
            if impurity < best[0] - 1e-12:
                best = (impurity, j, cut)
    return best


class TestAuc:
    """Test the rank-sum AUC."""

    def test_hand_case(self):
        """Test an AUC worked by hand."""
        assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)

    def test_matches_pairwise_count_with_ties(self):
        """Test that AUC equals the pairwise win rate with ties counted as half."""
        rng = np.random.default_rng(6)
        for _ in range(100):
            n = int(rng.integers(2, 40))
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                continue
            scores = np.round(rng.uniform(0, 1, n), 1)
            auc = roc_auc(scores, labels)
            assert auc == pytest.approx(_pairwise_auc(scores, labels), abs=1e-12)
            assert roc_auc(scores, 1 - labels) == pytest.approx(1.0 - auc, abs=1e-12)

    def test_single_class(self):
        """Test that AUC with one class is a model error."""
        with pytest.raises(ModelError):
            roc_auc([0.2, 0.3], [1, 1])

    def test_constant_and_perfect_scores(self):
        """Test AUC of constant scores and metrics of perfect scores."""
        labels = [0, 1, 1, 0, 1]
        assert roc_auc([0.3] * 5, labels) == pytest.approx(0.5)
        perfect = fold_metrics([0.9 if y else 0.1 for y in labels], labels)
        assert (perfect.auc, perfect.accuracy, perfect.precision) == (1.0, 1.0, 1.0)

    def test_monotone_transform(self):
        """Test that AUC ignores monotone transforms of the scores."""
        rng = np.random.default_rng(12)
        scores = rng.uniform(0, 1, 60)
        labels = rng.integers(0, 2, 60)
        assert roc_auc(np.exp(3 * scores), labels) == pytest.approx(roc_auc(scores, labels), abs=1e-12)

    def test_fold_metrics(self):
        """Test fold metrics, with AUC left out for a single-class fold."""
        score = fold_metrics([0.5, 0.2, 0.9, 0.4], [1, 0, 0, 1])
        assert score.auc == pytest.approx(0.5)
        assert score.accuracy == pytest.approx(0.5)
        assert score.precision == pytest.approx(0.5)
        assert fold_metrics([0.7, 0.1], [1, 1]).auc is None


class TestDatasetFeatures:
    """Test feature frames and subsets."""

    def test_feature_sets(self):
        """Test the feature set columns."""
        dataset = make_dataset()
        assert dataset.features().shape == (80, 16)
        assert list(FEATURE_SETS) == ["full", "minus_geographic", "minus_network", "minus_expenditure"]
        reduced = dataset.features("minus_network")
        assert not set(FEATURE_CLASSES["network"]) & set(reduced.columns)
        assert len(reduced.columns) == 11
        with pytest.raises(KeyError):
            dataset.features("minus_everything")

    def test_labels_follow_delta(self):
        """Test that labels follow the sign of the rank change."""
        dataset = make_dataset()
        np.testing.assert_array_equal(dataset.labels(), (dataset.deltas() > 0).astype(int))
        counts = dataset.class_counts()
        assert counts["improved"] + counts["worsened"] == 80

    def test_subset_by_change(self):
        """Test filtering on absolute rank change."""
        dataset = make_dataset()
        subset = subset_by_change(dataset, 30)
        assert all(abs(d) > 30 for d in subset.deltas())
        assert len(subset_by_change(dataset, 0)) == 80
        with pytest.raises(ValueError):
            subset_by_change(dataset, -1)


class TestLearners:
    """Test training and prediction."""

    def setup_method(self):
        self.dataset = make_dataset()
        self.features = self.dataset.features()
        self.labels = self.dataset.labels()

    @pytest.mark.parametrize("kind", ["naive_bayes", "logistic_regression", "decision_tree",
                                      "random_forest"])
    def test_probabilities(self, kind):
        """Test that every learner gives valid, informative probabilities."""
        model = train_classifier(kind, self.features, self.labels, SMALL_FOREST, seed=3)
        proba = predict_proba(model, self.features)
        assert proba.shape == (80,)
        assert ((proba >= 0) & (proba <= 1)).all()
        assert roc_auc(proba, self.labels) > 0.7

    def test_naive_bayes_symmetric_classes(self):
        """Test that naive Bayes is indifferent between mirror-image classes."""
        features = pd.DataFrame({'Area': [0.0, 1.0, 0.0, 1.0]})
        model = train_classifier("naive_bayes", features, [0, 0, 1, 1])
        np.testing.assert_allclose(predict_proba(model, features), 0.5)

    def test_seeded_forest_is_reproducible(self):
        """Test that a seeded forest predicts the same twice."""
        first = train_classifier("random_forest", self.features, self.labels, SMALL_FOREST, seed=11)
        second = train_classifier("random_forest", self.features, self.labels, SMALL_FOREST, seed=11)
        np.testing.assert_array_equal(predict_proba(first, self.features),
                                      predict_proba(second, self.features))

    def test_importance(self):
        """Test that forest importances cover every feature and sum to one."""
        model = train_classifier("random_forest", self.features, self.labels, SMALL_FOREST, seed=1)
        importance = forest_importance(model)
        assert set(importance.index) == set(FEATURE_NAMES)
        assert importance.sum() == pytest.approx(1.0)
        assert "CEA" in importance.index[:3]
        with pytest.raises(ModelError):
            forest_importance(train_classifier("decision_tree", self.features, self.labels))

    def test_schema_mismatch(self):
        """Test that reordered, missing or retyped columns are model errors."""
        model = train_classifier("logistic_regression", self.features, self.labels)
        with pytest.raises(ModelError):
            predict_proba(model, self.features[list(reversed(self.features.columns))])
        with pytest.raises(ModelError):
            predict_proba(model, self.features.drop(columns="Area"))
        wrong_type = self.features.assign(SubRegion=1.0)
        with pytest.raises(ModelError):
            predict_proba(model, wrong_type)

    def test_stump_finds_best_gini_split(self):
        """Test that a stump reaches the lowest weighted gini of any single cut."""
        rng = np.random.default_rng(17)
        stump = LearnerSettings(tree_max_depth=1, tree_min_samples_leaf=1)
        for _ in range(20):
            n = int(rng.integers(10, 51))
            features = pd.DataFrame(rng.normal(size=(n, 4)), columns=["Area", "Distance", "GRN", "CEA"])
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                continue
            tree = train_classifier("decision_tree", features, labels, stump, seed=0).estimator.tree_
            left, right = tree.children_left[0], tree.children_right[0]
            weighted = (tree.n_node_samples[left] * tree.impurity[left]
                        + tree.n_node_samples[right] * tree.impurity[right]) / n
            assert weighted == pytest.approx(_exhaustive_split(features.to_numpy(), labels)[0], abs=1e-12)

    def test_stump_matches_exhaustive_split_on_tied_data(self):
        """Test that the chosen feature and threshold equal the first best cut in scan order."""
        rng = np.random.default_rng(23)
        for _ in range(30):
            n = int(rng.integers(8, 51))
            x = rng.integers(0, 4, size=(n, 4)).astype(float)
            labels = rng.integers(0, 2, n)
            impurity, feature, threshold = _exhaustive_split(x, labels)
            if labels.min() == labels.max() or feature is None:
                continue
            tree = CartTree(max_depth=1, min_samples_leaf=1).fit(x, labels).tree_
            assert (tree.feature[0], tree.threshold[0]) == (feature, threshold)

    def test_identical_columns_split_on_first(self):
        """Test that identical columns always split on the lowest feature index."""
        rng = np.random.default_rng(5)
        column = rng.normal(size=40)
        features = pd.DataFrame({name: column for name in ["Area", "Distance", "GRN", "CEA"]})
        labels = (column + rng.normal(0.0, 0.5, 40) > 0).astype(int)
        stump = LearnerSettings(tree_max_depth=1, tree_min_samples_leaf=1)
        roots = [train_classifier("decision_tree", features, labels, stump, seed=seed).estimator.tree_.feature[0]
                 for seed in range(8)]
        assert roots == [0] * 8

    def test_equal_cuts_take_lowest_threshold(self):
        """Test that two equally good cuts resolve to the lower threshold."""
        x = np.array([[1.0], [2.0], [3.0], [4.0]])
        tree = CartTree(max_depth=1, min_samples_leaf=1).fit(x, [0, 1, 1, 0]).tree_
        assert (tree.feature[0], tree.threshold[0]) == (0, 1.5)

    def test_tree_importances_and_probabilities(self):
        """Test tree importances and leaf probabilities."""
        x = np.array([[0.0, 5.0], [1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        model = CartTree(max_depth=3, min_samples_leaf=1).fit(x, ["w", "w", "i", "i"])
        np.testing.assert_array_equal(model.predict(x), ["w", "w", "i", "i"])
        np.testing.assert_allclose(model.predict_proba(x), [[0, 1], [0, 1], [1, 0], [1, 0]])
        np.testing.assert_allclose(model.feature_importances_, [1.0, 0.0])

    def test_single_class_training(self):
        """Test that training on one class is a model error."""
        with pytest.raises(ModelError):
            train_classifier("naive_bayes", self.features, np.ones(80, dtype=int))

    def test_unknown_kind(self):
        """Test that an unknown learner kind is a model error."""
        with pytest.raises(ModelError):
            train_classifier("svm", self.features, self.labels)


class TestEvaluation:
    """Test folds and cross-validation."""

    def test_stratified_folds(self):
        """Test that folds keep class proportions and repeat under a seed."""
        labels = np.array([1] * 30 + [0] * 50)
        folds = stratified_folds(labels, k=10, seed=4)
        for fold in range(10):
            assert (labels[folds == fold] == 1).sum() == 3
            assert (labels[folds == fold] == 0).sum() == 5
        np.testing.assert_array_equal(folds, stratified_folds(labels, k=10, seed=4))
        with pytest.raises(ModelError):
            stratified_folds(labels[25:], k=10)

    def test_evaluate_cv(self):
        """Test cross-validated rows and their repeatability."""
        dataset = make_dataset()
        report = evaluate_cv(dataset, ["logistic_regression", "naive_bayes"], k=5, seed=2)
        row = report.get("logistic_regression")
        assert (row.folds, row.samples, row.skipped_auc_folds) == (5, 80, 0)
        assert row.auc > 0.7
        again = evaluate_cv(dataset, ["logistic_regression", "naive_bayes"], k=5, seed=2)
        assert report.to_dict() == again.to_dict()

    def test_ablation(self):
        """Test that removing the expenditure class lowers AUC on expenditure-driven data."""
        report = ablation_by_class(make_dataset(), ["naive_bayes"], k=5, seed=0)
        assert [row.feature_set for row in report.rows] == list(FEATURE_SETS)
        assert report.get("naive_bayes", feature_set="minus_expenditure").auc < \
            report.get("naive_bayes").auc

    def test_subsets_skip_small_minorities(self):
        """Test that subsets with a small minority class are skipped."""
        report, skipped = run_subset_evaluation(make_dataset(), ["naive_bayes"], thresholds=(0, 20, 58),
                                                k=5, seed=0)
        assert {row.threshold for row in report.rows} == {0, 20}
        assert list(skipped) == [58]


class TestAssemble:
    """Test feature and label assembly from the panel."""

    def setup_method(self):
        periods = (2011, 2012, 2013)
        base = {'N': 10.0, 'IC': 4.0, 'OC': 2.0, 'IOR': 2.0, 'ACC': 0.2, 'VC': 5.0, 'CEA': 1.2,
                'CEOP': 1.0, 'CECH': 2.0, 'CELS': 3.0, 'CERS': 4.0, 'CET': 5.0}
        rows = []
        for ward in ["A", "B", "C", "D", "E"]:
            for i, period in enumerate(periods):
                values = dict(base, N=10.0 * (1 + i), period=period, ward_code=ward)
                if ward == "E" and i == 0:
                    values["IOR"] = np.nan
                rows.append(values)
        frame = pd.DataFrame(rows).set_index(["ward_code", "period"])
        self.panel = WardMetricsPanel(frame, periods)
        imd = pd.DataFrame([
            ("A", 2010, 30.0, 10), ("A", 2015, 25.0, 14),
            ("B", 2010, 20.0, 20), ("B", 2015, 28.0, 12),
            ("C", 2010, 10.0, 30), ("C", 2015, 10.0, 30),
            ("D", 2010, 40.0, 5),
            ("E", 2010, 15.0, 25), ("E", 2015, 12.0, 27),
        ], columns=["ward_code", "edition", "score", "rank"])
        self.imd = DeprivationTable(imd, Rejections(), len(imd))
        self.wards = [Ward(code, "B1", "Central", RING, area_km2=2.5) for code in "ABCDE"]

    def test_samples_and_exclusions(self):
        """Test the retained samples and the counted exclusions."""
        dataset = assemble_dataset(self.panel, self.imd, self.wards, centre=(0.5, 0.5))
        assert dataset.ward_codes == ["A", "B"]
        assert dataset.exclusions.to_dict() == {
            "missing feature": 1, "missing imd 2015": 1, "zero rank change": 1,
        }
        a, b = dataset.samples
        assert (a.label, a.delta_rank) == (ChangeLabel.IMPROVED, 4)
        assert (b.label, b.delta_rank) == (ChangeLabel.WORSENED, -8)

    def test_feature_values(self):
        """Test feature values of one assembled ward."""
        dataset = assemble_dataset(self.panel, self.imd, self.wards, centre=(0.5, 0.5))
        features = dataset.features().loc["A"]
        assert features["InitialIMD"] == 10.0
        assert features["SubRegion"] == "Central"
        assert features["Area"] == 2.5
        assert features["Distance"] == pytest.approx(0.0, abs=1e-6)
        assert features["GRN"] == pytest.approx(3.0)
        assert features["GRVC"] == pytest.approx(1.0)
        assert features["CECH"] == pytest.approx(2.0)

    def test_unknown_ward(self):
        """Test that a ward without a boundary is excluded."""
        dataset = assemble_dataset(self.panel, self.imd, self.wards[1:], centre=(0.5, 0.5))
        assert dataset.exclusions.counts["unknown ward"] == 1
