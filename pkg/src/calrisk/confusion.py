"""
Confidence-weighted confusion matrix and derived metrics.

Every sample contributes its predicted-class confidence, instead of a unit
count, to the confusion cell it falls in. For class k:

    cwTP = sum conf_i [y_i = k, yhat_i = k]
    cwFP = sum conf_i [y_i != k, yhat_i = k]
    cwFN = sum conf_i [y_i = k, yhat_i != k]
    cwTN = sum conf_i [y_i != k, yhat_i != k]

With all confidences equal to 1 these are the classical integer counts.
Precision, recall, specificity, F1, MCC and per-class accuracy follow from
the usual formulas evaluated on the masses.
"""

from __future__ import annotations

import math
from typing import List, Optional, Sequence

import numpy as np

from .models import CalRiskError, CwCounts, CwMetricRow, EvaluationSet, LabelOutOfRangeError

# Relative tolerance when comparing total_mass across rows
MASS_TOLERANCE = 1e-12


class InconsistentCountsError(CalRiskError, ValueError):
    """Raised when CwCounts rows do not come from the same evaluation set."""
    pass


def _ratio(numerator: float, denominator: float) -> Optional[float]:
    if denominator == 0.0:
        return None
    return numerator / denominator


def cw_counts(eval_set: EvaluationSet, class_id: int) -> CwCounts:
    """
    Compute the confidence-weighted confusion masses for one class.

    Args:
        eval_set: Evaluation set.
        class_id: Class index in {0, ..., K-1}.

    Returns:
        CwCounts for the class. cw_p and cw_n are summed directly over the
        true labels, so the structural relations with the four cells are a
        real check rather than a tautology.

    Raises:
        LabelOutOfRangeError: If class_id is not a valid class.

    Example:
        >>> # (y=0, yhat=0, 0.8), (y=1, yhat=0, 0.6)
        >>> c = cw_counts(s, 0)
        >>> c.cw_tp, c.cw_fp
        (0.8, 0.6)
    """
    if not 0 <= class_id < eval_set.k:
        raise LabelOutOfRangeError(f"class_id {class_id} out of range for k={eval_set.k}")

    confs = eval_set.confs
    is_true = eval_set.true_labels == class_id
    is_pred = eval_set.pred_labels == class_id

    return CwCounts(
        class_id=class_id,
        cw_tp=float(np.sum(confs[is_true & is_pred])),
        cw_fp=float(np.sum(confs[~is_true & is_pred])),
        cw_fn=float(np.sum(confs[is_true & ~is_pred])),
        cw_tn=float(np.sum(confs[~is_true & ~is_pred])),
        cw_p=float(np.sum(confs[is_true])),
        cw_n=float(np.sum(confs[~is_true])),
        total_mass=float(np.sum(confs)),
    )


def all_cw_counts(eval_set: EvaluationSet) -> List[CwCounts]:
    """CwCounts for every class, in class-index order."""
    return [cw_counts(eval_set, k) for k in range(eval_set.k)]


def cw_metrics(counts: CwCounts) -> CwMetricRow:
    """
    Derive the confidence-weighted metric family from confusion masses.

    Any metric whose denominator is zero is None.

    Args:
        counts: Masses for one class.

    Returns:
        CwMetricRow with precision, recall, specificity, F1, MCC and
        per-class accuracy.

    Example:
        >>> round(cw_metrics(cw_counts(s, 0)).cw_precision, 4)
        0.5714
    """
    tp, fp, fn, tn = counts.cw_tp, counts.cw_fp, counts.cw_fn, counts.cw_tn

    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, counts.cw_p)
    specificity = _ratio(tn, counts.cw_n)

    f1 = None
    if precision is not None and recall is not None:
        f1 = _ratio(2.0 * precision * recall, precision + recall)

    mcc_denominator = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    mcc = _ratio(tp * tn - fp * fn, mcc_denominator)

    return CwMetricRow(
        class_id=counts.class_id,
        cw_precision=precision,
        cw_recall=recall,
        cw_specificity=specificity,
        cw_f1=f1,
        cw_mcc=mcc,
        cw_acc=_ratio(tp + tn, counts.total_mass),
    )


def _check_same_set(all_counts: Sequence[CwCounts]) -> float:
    if not all_counts:
        raise InconsistentCountsError("At least one CwCounts row is required")
    total = all_counts[0].total_mass
    for row in all_counts[1:]:
        if abs(row.total_mass - total) > MASS_TOLERANCE * max(1.0, abs(total)):
            raise InconsistentCountsError(
                f"Class {row.class_id} total_mass {row.total_mass} != {total}"
            )
    return total


def cwa_from_counts(all_counts: Sequence[CwCounts]) -> float:
    """
    Recover cwA from the per-class rows: sum_k cwTP / sum_k cwP.

    Args:
        all_counts: One row per class, all from the same set.

    Returns:
        Confidence-weighted accuracy.

    Raises:
        InconsistentCountsError: If the rows disagree on total_mass.
    """
    _check_same_set(all_counts)
    tp = math.fsum(row.cw_tp for row in all_counts)
    positives = math.fsum(row.cw_p for row in all_counts)
    return tp / positives


def macro_identity_check(all_counts: Sequence[CwCounts], cwa_value: float) -> float:
    """
    Residual of the per-class accuracy identity.

    Summed over all K classes, cwAcc^(k) = (K - 2) + 2 * cwA.

    Args:
        all_counts: One row per class.
        cwa_value: Overall confidence-weighted accuracy of the same set.

    Returns:
        |sum_k cwAcc^(k) - (K - 2) - 2 * cwa_value|.
    """
    k = len(all_counts)
    per_class = math.fsum(
        (row.cw_tp + row.cw_tn) / row.total_mass for row in all_counts
    )
    return abs(per_class - (k - 2) - 2.0 * cwa_value)
