"""
Binary post-hoc calibrators: isotonic regression and Platt scaling.

Both calibrators are fitted on the class-1 score of a held-out split
against the target ``true_label == 1`` and then applied to a disjoint
split. Applying a calibrator replaces the per-class confidences with
(1 - s', s') and sets ``conf`` to the calibrated score of the class that
was already predicted; predictions are never re-decided.

Isotonic maps are piecewise constant. A top plateau fitted only on
positives maps to exactly 1 and is clipped to 1 - epsilon, so a single
error landing on it in the evaluation split drives CSR towards 1/(N eps).
Platt maps are strictly increasing and leave classical AUC unchanged; a fit
whose best slope would make the map decreasing is rejected.

Example:
    >>> platt = fit_platt([0.1, 0.4, 0.6, 0.9], [False, True, False, True])
    >>> calibrated = apply_calibrator(platt, eval_set)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import expit
from sklearn.isotonic import isotonic_regression

from .models import CalRiskError, EvaluationSet, PredictionRecord, clip_confidences

logger = logging.getLogger(__name__)


# Newton iteration limit and gradient tolerance for Platt fitting
PLATT_MAX_ITER = 100
PLATT_GRAD_TOL = 1e-10

# Hessian ridge and line-search constants
PLATT_RIDGE = 1e-12
ARMIJO_CONSTANT = 1e-4
MIN_STEP = 1e-10

# Default fraction of records used for fitting
DEFAULT_SPLIT = 0.5


class DegenerateTargetsError(CalRiskError, ValueError):
    """Raised when Platt fitting sees only one target class."""
    pass


class UnsupportedMulticlassError(CalRiskError, ValueError):
    """Raised when a calibrator is applied to a set with more than two classes."""
    pass


class DegenerateSplitError(CalRiskError, ValueError):
    """Raised when a fit/evaluation split would leave one side empty."""
    pass


class DecreasingPlattFitError(CalRiskError, ValueError):
    """Raised when the best Platt sigmoid would reverse the score order."""

    def __init__(self, message: str, a: float, b: float):
        super().__init__(message)
        self.a = a
        self.b = b


@dataclass(frozen=True)
class IsotonicMap:
    """
    Nondecreasing step function fitted by isotonic regression.

    Attributes:
        breakpoints: Ascending scores where a new plateau starts.
        values: Plateau values, nondecreasing, in [0, 1].
        constant: True when the fit saw a single label value.
    """
    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]
    constant: bool = False

    def __call__(self, scores: Sequence[float]) -> np.ndarray:
        """
        Evaluate the map. Right-continuous; scores below the first
        breakpoint take the first plateau.
        """
        s = np.asarray(scores, dtype=float)
        index = np.searchsorted(np.asarray(self.breakpoints), s, side="right") - 1
        return np.asarray(self.values)[np.maximum(index, 0)]

    @property
    def plateau_count(self) -> int:
        """Number of distinct plateaus."""
        return len(self.values)


@dataclass(frozen=True)
class PlattMap:
    """
    Logistic map s -> 1 / (1 + exp(a * s + b)).

    Increasing in s when a < 0.

    Attributes:
        a: Slope.
        b: Intercept.
        converged: Whether Newton iterations met the gradient tolerance.
        iterations: Newton iterations used.
    """
    a: float
    b: float
    converged: bool = True
    iterations: int = 0

    def __call__(self, scores: Sequence[float]) -> np.ndarray:
        """Evaluate the map."""
        s = np.asarray(scores, dtype=float)
        return expit(-(self.a * s + self.b))

    @property
    def midpoint(self) -> float:
        """Score mapped to 0.5, or nan when a == 0."""
        if self.a == 0.0:
            return math.nan
        return -self.b / self.a


Calibrator = Union[IsotonicMap, PlattMap]


def _as_arrays(scores: Sequence[float], targets: Sequence[bool]) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float)
    t = np.asarray(targets, dtype=bool)
    if s.shape != t.shape or s.ndim != 1:
        raise ValueError(f"scores and targets must be 1-D of equal length, got {s.shape} and {t.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    return s, t


def fit_isotonic(scores: Sequence[float], correct: Sequence[bool]) -> IsotonicMap:
    """
    Fit a nondecreasing step map by pool-adjacent-violators.

    Samples with equal scores are pooled first, so the map is a function of
    the score. The solution minimizes squared error to the targets under
    the monotonicity constraint.

    Args:
        scores: Calibration-split scores.
        correct: Binary targets.

    Returns:
        IsotonicMap. When all targets are equal the map is constant and
        flagged.

    Raises:
        ValueError: If fewer than two samples are given or a score is not finite.

    Example:
        >>> m = fit_isotonic([0.2, 0.8], [False, True])
        >>> m([0.1, 0.5, 0.9]).tolist()
        [0.0, 0.0, 1.0]
    """
    s, t = _as_arrays(scores, correct)
    if len(s) < 2:
        raise ValueError(f"Isotonic fit needs at least 2 samples, got {len(s)}")

    distinct, groups = np.unique(s, return_inverse=True)
    counts = np.bincount(groups).astype(float)
    means = np.bincount(groups, weights=t.astype(float)) / counts
    fitted = isotonic_regression(means, sample_weight=counts, increasing=True)

    starts = np.concatenate(([True], fitted[1:] != fitted[:-1]))
    values = np.clip(fitted[starts], 0.0, 1.0)
    if np.any(np.diff(values) < 0):
        raise CalRiskError("Isotonic fit produced decreasing plateau values")

    constant = bool(np.all(t) or not np.any(t))
    if constant:
        logger.warning(f"Isotonic fit on {len(s)} samples with a single label; map is constant")

    logger.debug(f"Isotonic fit: {len(s)} samples, {len(values)} plateau(s)")
    return IsotonicMap(
        breakpoints=tuple(distinct[starts].tolist()),
        values=tuple(values.tolist()),
        constant=constant,
    )


def _platt_loss(a: float, b: float, s: np.ndarray, target: np.ndarray) -> float:
    f = a * s + b
    return float(np.sum(np.logaddexp(0.0, f) - (1.0 - target) * f))


def fit_platt(scores: Sequence[float], correct: Sequence[bool]) -> PlattMap:
    """
    Fit a Platt sigmoid by damped Newton iterations on the log-loss.

    Targets are smoothed to (n+ + 1)/(n+ + 2) for positives and
    1/(n- + 2) for negatives, which keeps the optimum finite on separable
    data. Iteration stops when the gradient infinity-norm drops to
    PLATT_GRAD_TOL or after PLATT_MAX_ITER steps.

    Args:
        scores: Calibration-split scores.
        correct: Binary targets.

    Returns:
        PlattMap with the fitted slope and intercept.

    Raises:
        DegenerateTargetsError: If all targets are equal.
        DecreasingPlattFitError: If the fitted slope is not negative while the
            scores are not all equal, so the map would not increase.
    """
    s, t = _as_arrays(scores, correct)
    n_pos = int(np.count_nonzero(t))
    n_neg = len(t) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateTargetsError(
            f"Platt fit needs both classes, got {n_pos} positive and {n_neg} negative"
        )

    target = np.where(t, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    loss = _platt_loss(a, b, s, target)

    converged = False
    iteration = 0
    for iteration in range(1, PLATT_MAX_ITER + 1):
        p = expit(-(a * s + b))
        residual = target - p
        gradient = np.array([np.sum(residual * s), np.sum(residual)])
        if np.max(np.abs(gradient)) <= PLATT_GRAD_TOL:
            converged = True
            break

        curvature = p * (1.0 - p)
        hessian = np.array([
            [np.sum(curvature * s * s) + PLATT_RIDGE, np.sum(curvature * s)],
            [np.sum(curvature * s), np.sum(curvature) + PLATT_RIDGE],
        ])
        direction = -np.linalg.solve(hessian, gradient)
        slope = float(gradient @ direction)

        step = 1.0
        while step >= MIN_STEP:
            new_a, new_b = a + step * direction[0], b + step * direction[1]
            new_loss = _platt_loss(new_a, new_b, s, target)
            if new_loss <= loss + ARMIJO_CONSTANT * step * slope:
                break
            step /= 2.0
        else:
            # No descent left at float precision
            converged = True
            break

        a, b, loss = float(new_a), float(new_b), new_loss

    if not converged:
        logger.warning(f"Platt fit did not converge in {PLATT_MAX_ITER} iterations (a={a}, b={b})")
    logger.debug(f"Platt fit: a={a:.6g}, b={b:.6g} after {iteration} iteration(s)")

    # All-equal scores are one tie class; any slope keeps that order
    if a >= 0.0 and np.ptp(s) > 0.0:
        raise DecreasingPlattFitError(
            f"Platt fit has slope a={a:.6g} >= 0; the map would not be increasing "
            f"in the score (targets fall as scores rise)",
            a=a,
            b=b,
        )
    return PlattMap(a=a, b=b, converged=converged, iterations=iteration)


def _class1_score(record: PredictionRecord) -> float:
    if record.class_confs is not None:
        return record.class_confs[1]
    return record.conf if record.pred_label == 1 else 1.0 - record.conf


def binary_scores(eval_set: EvaluationSet) -> Tuple[np.ndarray, np.ndarray]:
    """
    Class-1 scores and targets (true_label == 1) in input order.

    Raises:
        UnsupportedMulticlassError: If the set has more than two classes.
    """
    if eval_set.k != 2:
        raise UnsupportedMulticlassError(f"Calibrators are binary-only, got k={eval_set.k}")
    scores = np.array([_class1_score(r) for r in eval_set.records], dtype=float)
    targets = np.array([r.true_label == 1 for r in eval_set.records], dtype=bool)
    return scores, targets


def fit_calibrator(method: str, eval_set: EvaluationSet) -> Calibrator:
    """
    Fit the named calibrator on a binary set.

    Args:
        method: "isotonic" or "platt".
        eval_set: Calibration split.

    Raises:
        ValueError: If the method is unknown.
        UnsupportedMulticlassError: If the set has more than two classes.
    """
    scores, targets = binary_scores(eval_set)
    if method == "isotonic":
        return fit_isotonic(scores, targets)
    if method == "platt":
        return fit_platt(scores, targets)
    raise ValueError(f"Unknown calibration method: {method}")


def apply_calibrator(calibrator: Calibrator, eval_set: EvaluationSet) -> EvaluationSet:
    """
    Map a binary set's class-1 scores through a fitted calibrator.

    Args:
        calibrator: Fitted IsotonicMap or PlattMap.
        eval_set: Binary set disjoint from the calibration split.

    Returns:
        New EvaluationSet with class_confs (1 - s', s'), conf set to the
        predicted class's calibrated score, everything re-clipped to the
        input set's epsilon. Labels and record order are unchanged.

    Raises:
        UnsupportedMulticlassError: If the set has more than two classes.
    """
    scores, _ = binary_scores(eval_set)
    mapped = calibrator(scores)

    eps = eval_set.epsilon
    records = []
    for record, value in zip(eval_set.records, mapped):
        class1 = min(max(float(value), eps), 1.0 - eps)
        class0 = min(max(1.0 - class1, eps), 1.0 - eps)
        records.append(
            PredictionRecord(
                true_label=record.true_label,
                pred_label=record.pred_label,
                conf=class1 if record.pred_label == 1 else class0,
                class_confs=(class0, class1),
            )
        )
    return clip_confidences(records, epsilon=eps, k=2)


def split_indices(n: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Seeded fit/evaluation split of n positions.

    The first floor(n * fraction) positions of a seeded permutation form the
    fit split. Both index arrays are returned sorted, so records keep their
    input order.

    Raises:
        DegenerateSplitError: If either side would be empty.

    Example:
        >>> fit, rest = split_indices(10, 0.5, seed=42)
        >>> len(fit), len(rest)
        (5, 5)
    """
    if not 0.0 < fraction < 1.0:
        raise DegenerateSplitError(f"Split fraction must be in (0, 1), got {fraction}")
    n_fit = int(math.floor(n * fraction))
    if n_fit == 0 or n_fit == n:
        raise DegenerateSplitError(
            f"Split {fraction} of {n} records leaves {n_fit} to fit and {n - n_fit} to evaluate"
        )
    permutation = np.random.default_rng(seed).permutation(n)
    return np.sort(permutation[:n_fit]), np.sort(permutation[n_fit:])


@dataclass(frozen=True)
class HoldoutCalibration:
    """
    Result of fitting on one split and applying to the other.

    Attributes:
        method: "isotonic" or "platt".
        calibrator: The fitted map.
        fit_set: Records used for fitting.
        raw: Evaluation split before calibration.
        calibrated: Evaluation split after calibration.
    """
    method: str
    calibrator: Calibrator
    fit_set: EvaluationSet
    raw: EvaluationSet
    calibrated: EvaluationSet


def calibrate_holdout(
    eval_set: EvaluationSet,
    method: str,
    fraction: float = DEFAULT_SPLIT,
    seed: int = 0,
) -> HoldoutCalibration:
    """
    Split a binary set, fit a calibrator on one part and apply it to the other.

    Raises:
        UnsupportedMulticlassError: If the set has more than two classes.
        DegenerateSplitError: If the split leaves a side empty.
        DegenerateTargetsError: If Platt fitting sees a single class.
        DecreasingPlattFitError: If the Platt fit would reverse the score order.
    """
    if eval_set.k != 2:
        raise UnsupportedMulticlassError(f"Calibrators are binary-only, got k={eval_set.k}")
    fit_idx, eval_idx = split_indices(eval_set.n, fraction, seed)
    if len(fit_idx) < 2:
        raise DegenerateSplitError(f"Fit split has {len(fit_idx)} record(s); at least 2 are needed")
    fit_set = eval_set.subset(fit_idx.tolist())
    raw = eval_set.subset(eval_idx.tolist())

    calibrator = fit_calibrator(method, fit_set)
    logger.debug(f"Calibrating with {method}: {fit_set.n} fit, {raw.n} evaluated")
    return HoldoutCalibration(
        method=method,
        calibrator=calibrator,
        fit_set=fit_set,
        raw=raw,
        calibrated=apply_calibrator(calibrator, raw),
    )
