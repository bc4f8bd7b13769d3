"""
Data models for confidence-risk evaluation.

This module provides the dataclasses shared by every other module: the
per-sample prediction record, the validated evaluation set, and the result
types returned by the metric, confusion and ranking modules.

All types are immutable once built and safe to share across threads.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


# Default clipping parameter for confidences: [eps, 1 - eps]
DEFAULT_EPSILON = 1e-8

# Tolerance for class_confs[pred_label] == conf
CONSISTENCY_TOLERANCE = 1e-9


class CalRiskError(Exception):
    """Base class for all calrisk errors."""
    pass


class EmptySetError(CalRiskError, ValueError):
    """Raised when an evaluation set would contain no records."""
    pass


class LabelOutOfRangeError(CalRiskError, ValueError):
    """Raised when a class index is not in {0, ..., K-1}."""
    pass


class InvalidConfidenceError(CalRiskError, ValueError):
    """Raised when a confidence is not a probability in [0, 1]."""
    pass


class ConsistencyError(CalRiskError, ValueError):
    """Raised when class_confs disagrees with conf at the predicted class."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class PredictionRecord:
    """
    One sample's prediction together with the confidence assigned to it.

    Attributes:
        true_label: Ground-truth class index.
        pred_label: Predicted class index.
        conf: Confidence of the predicted class.
        class_confs: Optional per-class confidence vector of length K;
            ``class_confs[pred_label]`` must equal ``conf``.

    Example:
        >>> record = PredictionRecord(true_label=1, pred_label=1, conf=0.8)
        >>> record.is_correct
        True
    """
    true_label: int
    pred_label: int
    conf: float
    class_confs: Optional[Tuple[float, ...]] = None

    @property
    def is_correct(self) -> bool:
        """Whether the prediction matches the ground truth."""
        return self.true_label == self.pred_label


def _clip(value: float, epsilon: float) -> float:
    return min(max(value, epsilon), 1.0 - epsilon)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class EvaluationSet:
    """
    A validated, clipped collection of prediction records.

    Build instances with :func:`clip_confidences`; the constructor only
    validates. Records keep their input order; the array views
    (``confs``, ``correct``, ...) are in the canonical order used for every
    metric sum: a stable sort by ``(conf, true_label, pred_label)``.

    Attributes:
        records: Records in input order.
        k: Number of classes (at least 2).
        epsilon: Clipping parameter; every conf lies in [epsilon, 1 - epsilon].
    """
    records: Tuple[PredictionRecord, ...]
    k: int
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if not self.records:
            raise EmptySetError("Evaluation set must contain at least one record")
        if self.k < 2:
            raise LabelOutOfRangeError(f"Class count must be at least 2, got {self.k}")
        if not 0.0 < self.epsilon < 0.5:
            raise InvalidConfidenceError(f"epsilon must be in (0, 0.5), got {self.epsilon}")

        lo, hi = self.epsilon, 1.0 - self.epsilon
        for index, record in enumerate(self.records):
            for label in (record.true_label, record.pred_label):
                if not 0 <= label < self.k:
                    raise LabelOutOfRangeError(
                        f"Record {index}: label {label} out of range for k={self.k}"
                    )
            if not lo <= record.conf <= hi:
                raise InvalidConfidenceError(
                    f"Record {index}: conf {record.conf} outside [{lo}, {hi}]"
                )
            if record.class_confs is not None:
                if len(record.class_confs) != self.k:
                    raise LabelOutOfRangeError(
                        f"Record {index}: expected {self.k} class confidences, "
                        f"got {len(record.class_confs)}"
                    )
                if any(not lo <= c <= hi for c in record.class_confs):
                    raise InvalidConfidenceError(
                        f"Record {index}: class confidence outside [{lo}, {hi}]"
                    )
                if abs(record.class_confs[record.pred_label] - record.conf) > CONSISTENCY_TOLERANCE:
                    raise ConsistencyError(
                        f"Record {index}: class_confs[{record.pred_label}]="
                        f"{record.class_confs[record.pred_label]} != conf={record.conf}"
                    )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PredictionRecord]:
        return iter(self.records)

    @property
    def n(self) -> int:
        """Number of records."""
        return len(self.records)

    @property
    def has_class_confs(self) -> bool:
        """True when every record carries a per-class confidence vector."""
        return all(r.class_confs is not None for r in self.records)

    @cached_property
    def order(self) -> np.ndarray:
        """Canonical record order: stable sort by (conf, true_label, pred_label)."""
        confs = np.array([r.conf for r in self.records], dtype=float)
        true = np.array([r.true_label for r in self.records], dtype=np.int64)
        pred = np.array([r.pred_label for r in self.records], dtype=np.int64)
        return _readonly(np.lexsort((pred, true, confs)))

    @cached_property
    def confs(self) -> np.ndarray:
        """Predicted-class confidences in canonical order."""
        return _readonly(np.array([self.records[i].conf for i in self.order], dtype=float))

    @cached_property
    def true_labels(self) -> np.ndarray:
        """Ground-truth labels in canonical order."""
        return _readonly(
            np.array([self.records[i].true_label for i in self.order], dtype=np.int64)
        )

    @cached_property
    def pred_labels(self) -> np.ndarray:
        """Predicted labels in canonical order."""
        return _readonly(
            np.array([self.records[i].pred_label for i in self.order], dtype=np.int64)
        )

    @cached_property
    def correct(self) -> np.ndarray:
        """Correctness indicators (0.0 or 1.0) in canonical order."""
        return _readonly((self.true_labels == self.pred_labels).astype(float))

    @cached_property
    def class_conf_matrix(self) -> Optional[np.ndarray]:
        """N x K per-class confidences in canonical order, or None if any record lacks them."""
        if not self.has_class_confs:
            return None
        return _readonly(
            np.array([self.records[i].class_confs for i in self.order], dtype=float)
        )

    def subset(self, indices: Iterable[int]) -> "EvaluationSet":
        """
        Build a new set from records at the given input-order positions.

        Args:
            indices: Positions into ``records``.

        Returns:
            EvaluationSet with the same k and epsilon.

        Raises:
            EmptySetError: If no indices are given.
        """
        return EvaluationSet(
            records=tuple(self.records[i] for i in indices),
            k=self.k,
            epsilon=self.epsilon,
        )


def clip_confidences(
    raw: Sequence[PredictionRecord],
    epsilon: float = DEFAULT_EPSILON,
    k: Optional[int] = None,
) -> EvaluationSet:
    """
    Validate raw records and clip every confidence to [epsilon, 1 - epsilon].

    Args:
        raw: Records with confidences in [0, 1], in input order.
        epsilon: Clipping parameter in (0, 0.5).
        k: Class count. Inferred when omitted: the class_confs length if
            present, otherwise max label + 1 (at least 2).

    Returns:
        EvaluationSet with clipped confidences and order preserved.

    Raises:
        EmptySetError: If ``raw`` is empty.
        LabelOutOfRangeError: If a label is negative or not below k.
        InvalidConfidenceError: If a confidence lies outside [0, 1] or
            epsilon is not in (0, 0.5).

    Example:
        >>> s = clip_confidences([PredictionRecord(0, 0, 1.0)], epsilon=1e-8)
        >>> s.records[0].conf
        0.99999999
    """
    if not raw:
        raise EmptySetError("Cannot build an evaluation set from no records")
    if not 0.0 < epsilon < 0.5:
        raise InvalidConfidenceError(f"epsilon must be in (0, 0.5), got {epsilon}")

    if k is None:
        widths = {len(r.class_confs) for r in raw if r.class_confs is not None}
        max_label = max(max(r.true_label, r.pred_label) for r in raw)
        k = max(widths) if widths else max(max_label + 1, 2)

    clipped = []
    n_clipped = 0
    for index, record in enumerate(raw):
        values = [record.conf] + list(record.class_confs or ())
        for value in values:
            if not 0.0 <= value <= 1.0:
                raise InvalidConfidenceError(
                    f"Record {index}: confidence {value} is not in [0, 1]"
                )
        conf = _clip(record.conf, epsilon)
        if conf != record.conf:
            n_clipped += 1
        class_confs = None
        if record.class_confs is not None:
            class_confs = tuple(_clip(c, epsilon) for c in record.class_confs)
        clipped.append(
            PredictionRecord(
                true_label=record.true_label,
                pred_label=record.pred_label,
                conf=conf,
                class_confs=class_confs,
            )
        )

    if n_clipped:
        logger.debug(f"Clipped {n_clipped} confidence(s) to [{epsilon}, {1.0 - epsilon}]")

    return EvaluationSet(records=tuple(clipped), k=k, epsilon=epsilon)


@dataclass(frozen=True)
class RiskReport:
    """
    Risk and usefulness indicators for one evaluation set.

    Undefined values are None: ``gain`` when accuracy or cwA equals 1,
    ``mean_conf_wrong`` and ``jensen_lower_bound`` when there are no errors.

    Attributes:
        n: Sample count.
        acc: Accuracy.
        cwa: Confidence-weighted accuracy.
        gain: Share of the gap to perfect accuracy closed by weighting.
        csr: Calibrated Size Ratio.
        sigma_csr: Standard deviation of CSR under limitwise calibration.
        z: (csr - 1) / sigma_csr.
        p_risk: Standard normal CDF of z.
        ece: Expected Calibration Error.
        brier: Brier score on predicted-class correctness.
        mean_conf: Mean confidence.
        mean_conf_wrong: Mean confidence over incorrect predictions.
        jensen_lower_bound: Lower bound on CSR from Jensen's inequality.
    """
    n: int
    acc: float
    cwa: float
    gain: Optional[float]
    csr: float
    sigma_csr: float
    z: float
    p_risk: float
    ece: float
    brier: float
    mean_conf: float
    mean_conf_wrong: Optional[float]
    jensen_lower_bound: Optional[float]

    @property
    def has_errors(self) -> bool:
        """Whether the set contained at least one incorrect prediction."""
        return self.mean_conf_wrong is not None

    def exceeds_sigma(self, k: float) -> bool:
        """Check whether CSR exceeds 1 by more than k standard deviations."""
        return self.csr > 1.0 + k * self.sigma_csr

    def to_dict(self) -> dict:
        """Convert the report to a plain dictionary."""
        return asdict(self)


@dataclass(frozen=True)
class CwCounts:
    """
    Confidence-weighted confusion masses for one class.

    Attributes:
        class_id: Class index k.
        cw_tp: Confidence mass of correct predictions with true label k.
        cw_fp: Mass of incorrect predictions predicted as k.
        cw_fn: Mass of incorrect predictions with true label k.
        cw_tn: Mass of predictions neither predicted as nor labelled k.
        cw_p: Mass of samples with true label k.
        cw_n: Mass of samples with true label other than k.
        total_mass: Sum of all confidences (N times mean confidence).
    """
    class_id: int
    cw_tp: float
    cw_fp: float
    cw_fn: float
    cw_tn: float
    cw_p: float
    cw_n: float
    total_mass: float


@dataclass(frozen=True)
class CwMetricRow:
    """
    Confidence-weighted classification metrics for one class.

    A metric whose denominator is zero is None.
    """
    class_id: int
    cw_precision: Optional[float]
    cw_recall: Optional[float]
    cw_specificity: Optional[float]
    cw_f1: Optional[float]
    cw_mcc: Optional[float]
    cw_acc: Optional[float]

    def to_dict(self) -> dict:
        """Convert the row to a plain dictionary."""
        return asdict(self)


@dataclass(frozen=True)
class CurveSeries:
    """
    An ROC or confidence-weighted ROC curve for one class.

    Attributes:
        class_id: Class index k.
        points: (x, y) pairs from (0, 0) to (1, 1), x nondecreasing.
        area: Trapezoidal area under the points.
        weighted: True for the confidence-weighted curve.
    """
    class_id: int
    points: Tuple[Tuple[float, float], ...]
    area: float
    weighted: bool

    @property
    def x(self) -> np.ndarray:
        """Curve abscissae (FPR or cwFPR)."""
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def y(self) -> np.ndarray:
        """Curve ordinates (TPR or cwTPR)."""
        return np.array([p[1] for p in self.points], dtype=float)


@dataclass(frozen=True)
class AucGap:
    """
    Classical and confidence-weighted AUC for one class, with their gap.

    Attributes:
        class_id: Class index k.
        auc: Classical AUC.
        cw_auc: Confidence-weighted AUC.
        delta: cw_auc - auc.
        cov_form: Cov(w, z) / E[w] over positive-negative pairs.
    """
    class_id: int
    auc: float
    cw_auc: float
    delta: float
    cov_form: float

    def to_dict(self) -> dict:
        """Convert the gap to a plain dictionary."""
        return asdict(self)


@dataclass(frozen=True)
class MacroAuc:
    """
    Macro-averaged AUC and cwAUC over the non-degenerate classes.

    Attributes:
        auc_macro: Unweighted mean AUC.
        cw_auc_macro: Unweighted mean cwAUC.
        classes: Classes included in the averages.
        excluded: Degenerate classes left out.
    """
    auc_macro: float
    cw_auc_macro: float
    classes: Tuple[int, ...]
    excluded: Tuple[int, ...] = ()
