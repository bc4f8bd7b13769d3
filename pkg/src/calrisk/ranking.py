"""
Classical and confidence-weighted ROC analysis.

For a class k, samples are ranked by their class-k score conf^(k) and split
into positives (true label k) and negatives. The classical ROC counts each
sample once; the confidence-weighted ROC (cwROC) counts each sample by its
predicted-class confidence conf^(yhat). Their areas are the pairwise ranking
probabilities

    AUC   = mean over (i+, j-) of z_ij
    cwAUC = sum w_ij z_ij / sum w_ij,    w_ij = conf_i^(yhat) * conf_j^(yhat)

with z_ij = 1 if s_i > s_j, 1/2 on ties, 0 otherwise. Tied scores form a
single diagonal segment on the curve, so the trapezoidal area equals the
pairwise form exactly.

Binary sets without per-class confidences use conf^(1) = conf when the
predicted label is 1 and 1 - conf otherwise, with conf^(0) = 1 - conf^(1).
"""

from __future__ import annotations

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .models import (
    AucGap,
    CalRiskError,
    CurveSeries,
    EvaluationSet,
    LabelOutOfRangeError,
    MacroAuc,
)

logger = logging.getLogger(__name__)


# Allowed |delta - cov_form| in auc_gap
GAP_TOLERANCE = 1e-10


class DegenerateClassError(CalRiskError, ValueError):
    """Raised when a class has no positives or no negatives."""
    pass


class NoValidClassesError(CalRiskError, ValueError):
    """Raised when every class is degenerate."""
    pass


class MissingClassConfidencesError(CalRiskError, ValueError):
    """Raised when a multiclass set carries no per-class confidences."""
    pass


class IdentityViolationError(CalRiskError, ArithmeticError):
    """Raised when cwAUC - AUC disagrees with its covariance form."""
    pass


def class_scores(eval_set: EvaluationSet, class_id: int) -> np.ndarray:
    """
    Class-k scores conf^(k) in canonical order.

    Raises:
        LabelOutOfRangeError: If class_id is not a valid class.
        MissingClassConfidencesError: If K > 2 and class_confs are absent.
    """
    if not 0 <= class_id < eval_set.k:
        raise LabelOutOfRangeError(f"class_id {class_id} out of range for k={eval_set.k}")

    matrix = eval_set.class_conf_matrix
    if matrix is not None:
        return matrix[:, class_id]
    if eval_set.k != 2:
        raise MissingClassConfidencesError(
            f"Per-class ROC needs class_confs on every record for k={eval_set.k}"
        )

    positive = np.where(eval_set.pred_labels == 1, eval_set.confs, 1.0 - eval_set.confs)
    return positive if class_id == 1 else 1.0 - positive


def _split(eval_set: EvaluationSet, class_id: int) -> np.ndarray:
    positives = eval_set.true_labels == class_id
    n_pos = int(np.count_nonzero(positives))
    if n_pos == 0 or n_pos == eval_set.n:
        kind = "positives" if n_pos == 0 else "negatives"
        raise DegenerateClassError(f"Class {class_id} has no {kind}")
    return positives


def _sweep(
    scores: np.ndarray, positives: np.ndarray, weights: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    # One curve vertex per distinct score, descending.
    distinct, groups = np.unique(scores, return_inverse=True)
    pos_mass = np.bincount(groups, weights=weights * positives, minlength=len(distinct))
    neg_mass = np.bincount(groups, weights=weights * ~positives, minlength=len(distinct))

    tp = np.concatenate(([0.0], np.cumsum(pos_mass[::-1])))
    fp = np.concatenate(([0.0], np.cumsum(neg_mass[::-1])))
    return fp / fp[-1], tp / tp[-1]


def _trapezoid(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2.0))


def _curve(eval_set: EvaluationSet, class_id: int, weighted: bool) -> CurveSeries:
    scores = class_scores(eval_set, class_id)
    positives = _split(eval_set, class_id)
    weights = eval_set.confs if weighted else np.ones(eval_set.n)
    x, y = _sweep(scores, positives, weights)
    return CurveSeries(
        class_id=class_id,
        points=tuple(zip(x.tolist(), y.tolist())),
        area=_trapezoid(x, y),
        weighted=weighted,
    )


def roc_curve(eval_set: EvaluationSet, class_id: int) -> CurveSeries:
    """
    Classical ROC curve for one class.

    Args:
        eval_set: Evaluation set.
        class_id: Class treated as positive.

    Returns:
        CurveSeries of (FPR, TPR) points from (0, 0) to (1, 1).

    Raises:
        DegenerateClassError: If the class has no positives or no negatives.
        MissingClassConfidencesError: If K > 2 without class_confs.
    """
    return _curve(eval_set, class_id, weighted=False)


def cw_roc_curve(eval_set: EvaluationSet, class_id: int) -> CurveSeries:
    """
    Confidence-weighted ROC curve for one class.

    Each sample moves the curve by its predicted-class confidence instead of
    by one; the threshold still sweeps conf^(k).

    Raises:
        DegenerateClassError: If the class has no positives or no negatives.
        MissingClassConfidencesError: If K > 2 without class_confs.
    """
    return _curve(eval_set, class_id, weighted=True)


def class_auc(eval_set: EvaluationSet, class_id: int) -> Tuple[float, float]:
    """Return (AUC, cwAUC) for one class from the two curves."""
    scores = class_scores(eval_set, class_id)
    positives = _split(eval_set, class_id)
    auc = _trapezoid(*_sweep(scores, positives, np.ones(eval_set.n)))
    cw_auc = _trapezoid(*_sweep(scores, positives, eval_set.confs))
    return auc, cw_auc


def _pairwise_moments(
    pos_scores: np.ndarray,
    pos_weights: np.ndarray,
    neg_scores: np.ndarray,
    neg_weights: np.ndarray,
) -> Tuple[float, float, float]:
    """Return (E[w z], E[w], E[z]) over all positive-negative pairs."""
    order = np.argsort(neg_scores, kind="stable")
    sorted_scores = neg_scores[order]
    cum_weight = np.concatenate(([0.0], np.cumsum(neg_weights[order])))

    lo = np.searchsorted(sorted_scores, pos_scores, side="left")
    hi = np.searchsorted(sorted_scores, pos_scores, side="right")

    below_weight = cum_weight[lo]
    tied_weight = cum_weight[hi] - cum_weight[lo]
    below_count = lo.astype(float)
    tied_count = (hi - lo).astype(float)

    n_pairs = float(len(pos_scores) * len(neg_scores))
    e_wz = float(np.sum(pos_weights * (below_weight + 0.5 * tied_weight))) / n_pairs
    e_w = float(np.sum(pos_weights)) * float(np.sum(neg_weights)) / n_pairs
    e_z = float(np.sum(below_count + 0.5 * tied_count)) / n_pairs
    return e_wz, e_w, e_z


def auc_gap(eval_set: EvaluationSet, class_id: int) -> AucGap:
    """
    AUC, cwAUC and their gap, cross-checked against the covariance form.

    cwAUC - AUC equals Cov(w, z) / E[w] over all positive-negative pairs:
    confidence weighting raises the area exactly when the classifier is
    more confident on pairs it ranks correctly. The covariance is computed
    from the scores directly, independent of the curves.

    Args:
        eval_set: Evaluation set.
        class_id: Class treated as positive.

    Returns:
        AucGap for the class.

    Raises:
        DegenerateClassError: If the class has no positives or no negatives.
        IdentityViolationError: If delta and cov_form differ by more than
            GAP_TOLERANCE.
    """
    auc, cw_auc = class_auc(eval_set, class_id)

    scores = class_scores(eval_set, class_id)
    positives = _split(eval_set, class_id)
    weights = eval_set.confs
    e_wz, e_w, e_z = _pairwise_moments(
        scores[positives], weights[positives], scores[~positives], weights[~positives]
    )
    cov_form = (e_wz - e_w * e_z) / e_w
    delta = cw_auc - auc

    if abs(delta - cov_form) > GAP_TOLERANCE:
        raise IdentityViolationError(
            f"Class {class_id}: cwAUC - AUC = {delta!r} but Cov(w, z)/E[w] = {cov_form!r}"
        )

    return AucGap(class_id=class_id, auc=auc, cw_auc=cw_auc, delta=delta, cov_form=cov_form)


def per_class_auc_gaps(eval_set: EvaluationSet) -> Tuple[List[AucGap], Tuple[int, ...]]:
    """
    AucGap for every non-degenerate class.

    Returns:
        Tuple (gaps, excluded) where excluded lists the degenerate classes.
    """
    gaps = []
    excluded = []
    for class_id in range(eval_set.k):
        try:
            gaps.append(auc_gap(eval_set, class_id))
        except DegenerateClassError as e:
            logger.debug(f"Skipping class {class_id}: {e}")
            excluded.append(class_id)
    return gaps, tuple(excluded)


def monotone_invariance_check(
    eval_set: EvaluationSet,
    class_id: int,
    phi: Callable[[float], float],
) -> float:
    """
    Check that classical AUC survives a strictly increasing rescaling.

    Args:
        eval_set: Evaluation set.
        class_id: Class treated as positive.
        phi: Strictly increasing map on [0, 1], applied to each score.

    Returns:
        |AUC(phi(conf^(k))) - AUC(conf^(k))|.

    Example:
        >>> monotone_invariance_check(s, 1, lambda x: x ** 3)
        0.0
    """
    scores = class_scores(eval_set, class_id)
    positives = _split(eval_set, class_id)
    mapped = np.fromiter((phi(float(s)) for s in scores), dtype=float, count=len(scores))
    unit = np.ones(eval_set.n)
    before = _trapezoid(*_sweep(scores, positives, unit))
    after = _trapezoid(*_sweep(mapped, positives, unit))
    return abs(after - before)


def macro_average(
    per_class: Sequence[AucGap],
    excluded: Sequence[int] = (),
) -> MacroAuc:
    """
    Unweighted mean AUC and cwAUC over the given classes.

    Args:
        per_class: One AucGap per non-degenerate class.
        excluded: Degenerate classes left out, reported on the result.

    Returns:
        MacroAuc.

    Raises:
        NoValidClassesError: If per_class is empty.
    """
    if not per_class:
        raise NoValidClassesError(
            f"No class has both positives and negatives (excluded: {list(excluded)})"
        )
    if excluded:
        logger.warning(f"Degenerate classes excluded from macro AUC: {list(excluded)}")

    ordered = sorted(per_class, key=lambda gap: gap.class_id)
    return MacroAuc(
        auc_macro=float(np.mean([gap.auc for gap in ordered])),
        cw_auc_macro=float(np.mean([gap.cw_auc for gap in ordered])),
        classes=tuple(gap.class_id for gap in ordered),
        excluded=tuple(excluded),
    )


def macro_auc(eval_set: EvaluationSet) -> Optional[MacroAuc]:
    """
    Macro AUC and cwAUC from the curves alone, or None if every class is degenerate.

    Skips the covariance cross-check; used by the synthetic harness.
    """
    aucs = []
    cw_aucs = []
    classes = []
    excluded = []
    for class_id in range(eval_set.k):
        try:
            auc, cw_auc = class_auc(eval_set, class_id)
        except DegenerateClassError:
            excluded.append(class_id)
            continue
        aucs.append(auc)
        cw_aucs.append(cw_auc)
        classes.append(class_id)
    if not classes:
        return None
    return MacroAuc(
        auc_macro=float(np.mean(aucs)),
        cw_auc_macro=float(np.mean(cw_aucs)),
        classes=tuple(classes),
        excluded=tuple(excluded),
    )
