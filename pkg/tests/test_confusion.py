"""Tests for the calrisk.confusion module."""

import pytest

from calrisk.confusion import (
    InconsistentCountsError,
    all_cw_counts,
    cw_counts,
    cw_metrics,
    cwa_from_counts,
    macro_identity_check,
)
from calrisk.metrics import cwa
from calrisk.models import CwCounts, LabelOutOfRangeError, PredictionRecord, clip_confidences


def create_test_set(rows, k=None):
    """Create a set from (true_label, pred_label, conf) tuples."""
    return clip_confidences(
        [PredictionRecord(true_label=t, pred_label=p, conf=c) for t, p, c in rows],
        k=k,
    )


THREE_CLASS_ROWS = [
    (0, 0, 0.9),
    (0, 1, 0.4),
    (1, 1, 0.7),
    (1, 2, 0.5),
    (2, 2, 0.8),
    (2, 0, 0.6),
    (0, 0, 0.3),
]


class TestCwCounts:
    """Tests for cw_counts."""

    def test_binary_example(self):
        """Test masses on a two-record example."""
        s = create_test_set([(0, 0, 0.8), (1, 0, 0.6)])
        c = cw_counts(s, 0)
        assert abs(c.cw_tp - 0.8) < 1e-12
        assert abs(c.cw_fp - 0.6) < 1e-12
        assert c.cw_fn == 0.0
        assert c.cw_tn == 0.0
        assert abs(c.total_mass - 1.4) < 1e-12

    def test_three_class_cells(self):
        """Test each cell for one class of a three-class set."""
        c = cw_counts(create_test_set(THREE_CLASS_ROWS), 0)
        assert abs(c.cw_tp - 1.2) < 1e-12
        assert abs(c.cw_fp - 0.6) < 1e-12
        assert abs(c.cw_fn - 0.4) < 1e-12
        assert abs(c.cw_tn - 2.0) < 1e-12
        assert abs(c.cw_p - 1.6) < 1e-12
        assert abs(c.cw_n - 2.6) < 1e-12

    def test_structural_relations(self):
        """Test TP+FN = P, FP+TN = N, P+N = total for every class."""
        for c in all_cw_counts(create_test_set(THREE_CLASS_ROWS)):
            assert abs(c.cw_tp + c.cw_fn - c.cw_p) < 1e-12
            assert abs(c.cw_fp + c.cw_tn - c.cw_n) < 1e-12
            assert abs(c.cw_p + c.cw_n - c.total_mass) < 1e-12

    def test_unit_confidence_gives_classical_counts(self):
        """Test confidences near 1 reduce to integer confusion counts."""
        s = create_test_set([(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0), (1, 1, 1.0)])
        c = cw_counts(s, 1)
        assert round(c.cw_tp) == 2
        assert round(c.cw_fp) == 1
        assert round(c.cw_fn) == 0
        assert round(c.cw_tn) == 1

    def test_absent_class_has_zero_positives(self):
        """Test a class with no samples has zero positive mass."""
        s = create_test_set([(0, 0, 0.9), (1, 1, 0.6)], k=3)
        c = cw_counts(s, 2)
        assert c.cw_p == 0.0
        assert c.cw_tp == 0.0

    def test_out_of_range_class(self):
        """Test an invalid class index raises LabelOutOfRangeError."""
        s = create_test_set(THREE_CLASS_ROWS)
        with pytest.raises(LabelOutOfRangeError):
            cw_counts(s, 3)
        with pytest.raises(LabelOutOfRangeError):
            cw_counts(s, -1)

    def test_all_counts_order(self):
        """Test all_cw_counts yields one row per class in order."""
        rows = all_cw_counts(create_test_set(THREE_CLASS_ROWS))
        assert [r.class_id for r in rows] == [0, 1, 2]


class TestCwMetrics:
    """Tests for cw_metrics."""

    def test_binary_precision(self):
        """Test precision on the two-record example."""
        row = cw_metrics(cw_counts(create_test_set([(0, 0, 0.8), (1, 0, 0.6)]), 0))
        assert abs(row.cw_precision - 0.8 / 1.4) < 1e-12
        assert row.cw_recall == 1.0

    def test_zero_denominators_are_none(self):
        """Test metrics with zero denominators are None."""
        row = cw_metrics(cw_counts(create_test_set([(0, 0, 0.8), (1, 0, 0.6)]), 0))
        # No true negatives or false negatives: specificity over N = 0.6 is 0
        assert row.cw_specificity == 0.0
        # TN + FN = 0 makes MCC undefined
        assert row.cw_mcc is None

    def test_absent_class(self):
        """Test recall and F1 are None for a class with no samples."""
        row = cw_metrics(cw_counts(create_test_set([(0, 0, 0.9), (1, 1, 0.6)], k=3), 2))
        assert row.cw_recall is None
        assert row.cw_precision is None
        assert row.cw_f1 is None

    def test_three_class_values(self):
        """Test the metric family on class 0 of the three-class set."""
        row = cw_metrics(cw_counts(create_test_set(THREE_CLASS_ROWS), 0))
        precision = 1.2 / 1.8
        recall = 1.2 / 1.6
        assert abs(row.cw_precision - precision) < 1e-12
        assert abs(row.cw_recall - recall) < 1e-12
        assert abs(row.cw_specificity - 2.0 / 2.6) < 1e-12
        assert abs(row.cw_f1 - 2 * precision * recall / (precision + recall)) < 1e-12
        expected_mcc = (1.2 * 2.0 - 0.6 * 0.4) / (1.8 * 1.6 * 2.6 * 2.4) ** 0.5
        assert abs(row.cw_mcc - expected_mcc) < 1e-12
        assert abs(row.cw_acc - 3.2 / 4.2) < 1e-12

    def test_perfect_binary_mcc(self):
        """Test MCC is 1 when every prediction is correct."""
        row = cw_metrics(cw_counts(create_test_set([(0, 0, 0.9), (1, 1, 0.6)]), 1))
        assert abs(row.cw_mcc - 1.0) < 1e-12
        assert abs(row.cw_f1 - 1.0) < 1e-12

    def test_to_dict(self):
        """Test to_dict keeps None values."""
        row = cw_metrics(cw_counts(create_test_set([(0, 0, 0.9), (1, 1, 0.6)], k=3), 2))
        data = row.to_dict()
        assert data["class_id"] == 2
        assert data["cw_recall"] is None


class TestIdentities:
    """Tests for cwa_from_counts and macro_identity_check."""

    def test_cwa_from_counts(self):
        """Test cwA recovered from the rows matches the direct value."""
        s = create_test_set(THREE_CLASS_ROWS)
        assert abs(cwa_from_counts(all_cw_counts(s)) - cwa(s)) < 1e-12

    def test_macro_identity_three_class(self):
        """Test the per-class accuracy identity on three classes."""
        s = create_test_set(THREE_CLASS_ROWS)
        assert macro_identity_check(all_cw_counts(s), cwa(s)) < 1e-12

    def test_macro_identity_binary(self):
        """Test both binary class accuracies equal cwA."""
        s = create_test_set([(0, 0, 0.9), (1, 0, 0.6), (1, 1, 0.7), (0, 1, 0.55)])
        rows = [cw_metrics(c) for c in all_cw_counts(s)]
        assert abs(rows[0].cw_acc - cwa(s)) < 1e-12
        assert abs(rows[1].cw_acc - cwa(s)) < 1e-12

    def test_macro_identity_detects_wrong_cwa(self):
        """Test a wrong cwA value shows up as a residual."""
        s = create_test_set(THREE_CLASS_ROWS)
        assert macro_identity_check(all_cw_counts(s), cwa(s) + 0.1) > 0.19

    def test_mixed_sets_rejected(self):
        """Test rows from different sets raise InconsistentCountsError."""
        first = cw_counts(create_test_set(THREE_CLASS_ROWS), 0)
        other = cw_counts(create_test_set([(0, 0, 0.5), (1, 1, 0.5)], k=3), 1)
        with pytest.raises(InconsistentCountsError):
            cwa_from_counts([first, other])

    def test_empty_rows_rejected(self):
        """Test an empty row list raises InconsistentCountsError."""
        with pytest.raises(InconsistentCountsError):
            cwa_from_counts([])

    def test_manual_rows(self):
        """Test hand-built rows from one set."""
        rows = [
            CwCounts(class_id=0, cw_tp=1.0, cw_fp=0.5, cw_fn=0.25, cw_tn=0.25,
                     cw_p=1.25, cw_n=0.75, total_mass=2.0),
            CwCounts(class_id=1, cw_tp=0.25, cw_fp=0.25, cw_fn=0.5, cw_tn=1.0,
                     cw_p=0.75, cw_n=1.25, total_mass=2.0),
        ]
        assert abs(cwa_from_counts(rows) - 0.625) < 1e-12
