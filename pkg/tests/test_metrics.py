"""Tests for ROC-AUC, threshold metrics and class weights."""

import numpy as np
import pytest

from helpers.errors import ConfigurationError, InputError, UndefinedMetricError
from helpers.metrics import (
    Confusion,
    class_weights,
    confusion,
    metrics_report,
    pairwise_concordance,
    roc_auc,
)
from helpers.prng import Xoshiro256pp


class TestRocAuc:
    def test_known_example(self):
        assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)

    def test_perfect_and_inverted_ranking(self):
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_all_tied_scores_give_one_half(self):
        assert roc_auc([0.5] * 6, [0, 1, 0, 1, 1, 0]) == pytest.approx(0.5)

    def test_matches_pairwise_concordance_with_ties(self):
        stream = Xoshiro256pp.from_seed(11)
        for _ in range(20):
            scores = np.round(stream.random_array(40), 1)
            labels = (stream.random_array(40) < 0.4).astype(int)
            labels[:2] = [0, 1]
            assert roc_auc(scores, labels) == pytest.approx(
                pairwise_concordance(scores, labels), abs=1e-12
            )

    @pytest.mark.parametrize("labels", [[1, 1, 1], [0, 0, 0]])
    def test_single_class_is_undefined(self, labels):
        with pytest.raises(UndefinedMetricError):
            roc_auc([0.2, 0.5, 0.7], labels)

    def test_non_binary_labels(self):
        with pytest.raises(InputError, match="0 or 1"):
            roc_auc([0.2, 0.5], [0, 2])

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            roc_auc([0.2, 0.5, 0.1], [0, 1])


class TestThresholdMetrics:
    def test_confusion_counts_at_threshold(self):
        result = confusion([0.1, 0.5, 0.49, 0.9], [0, 0, 1, 1], threshold=0.5)
        assert result == Confusion(tp=1, fp=1, tn=1, fn=1)

    def test_report_values(self):
        report = metrics_report([0.9, 0.8, 0.3, 0.2, 0.6], [1, 1, 1, 0, 0])
        assert report.sensitivity == pytest.approx(2 / 3)
        assert report.specificity == pytest.approx(1 / 2)
        assert report.accuracy == pytest.approx(3 / 5)
        assert report.f1 == pytest.approx(2 / 3)

    def test_nothing_predicted_positive_gives_zero_f1(self):
        report = metrics_report([0.1, 0.2, 0.3], [0, 1, 1])
        assert report.precision == 0.0
        assert report.f1 == 0.0
        assert report.specificity == 1.0

    def test_threshold_zero_predicts_everything_positive(self):
        report = metrics_report([0.0, 0.2, 0.7], [0, 1, 1], threshold=0.0)
        assert report.sensitivity == 1.0
        assert report.specificity == 0.0

    def test_raising_threshold_trades_sensitivity_for_specificity(self):
        stream = Xoshiro256pp.from_seed(21)
        scores = np.round(stream.random_array(60), 1)
        labels = (stream.random_array(60) < 0.4).astype(int)
        labels[:2] = [0, 1]
        reports = [metrics_report(scores, labels, t) for t in np.linspace(0.0, 1.0, 41)]
        sensitivity = [r.sensitivity for r in reports]
        specificity = [r.specificity for r in reports]
        assert all(a >= b for a, b in zip(sensitivity, sensitivity[1:]))
        assert all(a <= b for a, b in zip(specificity, specificity[1:]))
        assert sensitivity[0] == 1.0
        assert specificity[0] == 0.0

    def test_single_class_report_has_no_auc(self):
        report = metrics_report([0.3, 0.8], [1, 1])
        assert report.roc_auc is None
        assert report.to_dict()["roc_auc"] is None

    @pytest.mark.parametrize("threshold", [-0.1, 1.5, float("nan")])
    def test_invalid_threshold(self, threshold):
        with pytest.raises(ConfigurationError):
            metrics_report([0.3, 0.8], [0, 1], threshold=threshold)


class TestClassWeights:
    def test_default_training_split(self):
        labels = [0] * 43 + [1] * 18
        w0, w1 = class_weights(labels)
        assert w0 == pytest.approx(61 / 86)
        assert w1 == pytest.approx(61 / 36)
        assert round(w0, 4) == 0.7093
        assert round(w1, 4) == 1.6944

    def test_balanced_labels_give_unit_weights(self):
        assert class_weights([0, 1, 0, 1]) == (1.0, 1.0)

    def test_single_class_is_a_configuration_error(self):
        with pytest.raises(ConfigurationError, match="both classes"):
            class_weights([1, 1, 1])
