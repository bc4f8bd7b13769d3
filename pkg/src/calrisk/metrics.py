"""
Scalar risk and usefulness metrics for confidence profiles.

This module computes the Calibrated Size Ratio (CSR) and its standard
deviation under limitwise calibration, the associated risk probability,
confidence-weighted accuracy (cwA) and its gain over accuracy, ECE in both
its binned and indicator forms, the Brier score on predicted-class
correctness, the Jensen lower bound on CSR, and the adversarial profile
showing that a small ECE gives no risk guarantee.

Every sum runs over the evaluation set's canonical record order, so results
are bit-identical under any permutation of the input records.

Example:
    >>> from calrisk import PredictionRecord, clip_confidences, risk_report
    >>> s = clip_confidences([
    ...     PredictionRecord(true_label=0, pred_label=1, conf=0.5),
    ...     PredictionRecord(true_label=1, pred_label=1, conf=0.9),
    ... ])
    >>> csr(s)
    1.0
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import erfc

from .models import (
    CalRiskError,
    DEFAULT_EPSILON,
    EvaluationSet,
    PredictionRecord,
    RiskReport,
    clip_confidences,
)

logger = logging.getLogger(__name__)


# Default number of equal-width ECE bins
DEFAULT_BINS = 15


class DivisionByZeroRiskError(CalRiskError, ValueError):
    """Raised when a confidence of 1 makes CSR or its deviation infinite."""
    pass


class DegenerateSigmaError(CalRiskError, ValueError):
    """Raised when the CSR standard deviation is not positive."""
    pass


class InvalidBinsError(CalRiskError, ValueError):
    """Raised when the ECE bin count is below 1."""
    pass


class ClippingConflictError(CalRiskError, ValueError):
    """
    Raised when the requested risk level cannot coexist with the clipping.

    Attributes:
        max_lambda: Largest lambda achievable for the configured epsilon.
    """

    def __init__(self, message: str, max_lambda: float):
        super().__init__(message)
        self.max_lambda = max_lambda


def _check_below_one(confs: np.ndarray) -> None:
    if np.any(confs >= 1.0):
        raise DivisionByZeroRiskError("Confidence of 1 makes CSR undefined; clip first")


def accuracy(eval_set: EvaluationSet) -> float:
    """Fraction of correct predictions."""
    return float(np.sum(eval_set.correct) / eval_set.n)


def mean_confidence(eval_set: EvaluationSet) -> float:
    """Mean predicted-class confidence (c-bar)."""
    return float(np.sum(eval_set.confs) / eval_set.n)


def mean_confidence_wrong(eval_set: EvaluationSet) -> Optional[float]:
    """
    Mean confidence over incorrect predictions.

    Returns:
        The conditional mean, or None when every prediction is correct.
    """
    wrong = eval_set.correct == 0.0
    n_wrong = int(np.count_nonzero(wrong))
    if n_wrong == 0:
        return None
    return float(np.sum(eval_set.confs[wrong]) / n_wrong)


def csr(eval_set: EvaluationSet) -> float:
    """
    Compute the Calibrated Size Ratio.

    CSR = (1/N) * sum over incorrect predictions of 1 / (1 - conf_i). It is
    1 in expectation under perfect calibration; values above 1 signal
    overconfidence on errors.

    Args:
        eval_set: Clipped evaluation set.

    Returns:
        CSR, 0.0 when there are no incorrect predictions.

    Raises:
        DivisionByZeroRiskError: If any confidence equals 1.

    Example:
        >>> # one error at conf 0.5 among two samples
        >>> csr(two_sample_set)
        1.0
    """
    _check_below_one(eval_set.confs)
    wrong = 1.0 - eval_set.correct
    return float(np.sum(wrong / (1.0 - eval_set.confs)) / eval_set.n)


def sigma_csr(eval_set: EvaluationSet) -> float:
    """
    Standard deviation of CSR under perfect limitwise calibration.

    sigma = sqrt((1/N^2) * sum_i conf_i / (1 - conf_i)), over all records,
    correct or not.

    Raises:
        DivisionByZeroRiskError: If any confidence equals 1.
    """
    _check_below_one(eval_set.confs)
    odds = eval_set.confs / (1.0 - eval_set.confs)
    return math.sqrt(float(np.sum(odds)) / (eval_set.n * eval_set.n))


def standard_normal_cdf(z: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return float(0.5 * erfc(-z / math.sqrt(2.0)))


def p_risk(csr_value: float, sigma: float) -> Tuple[float, float]:
    """
    Convert a CSR value into a z score and risk probability.

    Args:
        csr_value: Observed CSR.
        sigma: CSR standard deviation under the calibration null.

    Returns:
        Tuple (z, p) with z = (csr_value - 1) / sigma and p = Phi(z).

    Raises:
        DegenerateSigmaError: If sigma is not positive.

    Example:
        >>> p_risk(1.0, 0.1)
        (0.0, 0.5)
    """
    if not sigma > 0.0:
        raise DegenerateSigmaError(f"sigma must be positive, got {sigma}")
    z = (csr_value - 1.0) / sigma
    return z, standard_normal_cdf(z)


def cwa(eval_set: EvaluationSet) -> float:
    """
    Compute confidence-weighted accuracy.

    The fraction of total confidence mass placed on correct predictions.

    Example:
        >>> # (correct, 0.9), (wrong, 0.1), (correct, 0.5)
        >>> round(cwa(s), 4)
        0.9333
    """
    confs = eval_set.confs
    return float(np.sum(confs * eval_set.correct) / np.sum(confs))


def cwa_covariance_form(eval_set: EvaluationSet) -> float:
    """
    Compute cwA as accuracy plus Cov(conf, correct) / mean confidence.

    Equals :func:`cwa` up to rounding; kept as an independent cross-check.
    """
    confs = eval_set.confs
    correct = eval_set.correct
    n = eval_set.n
    p_bar = float(np.sum(correct) / n)
    c_bar = float(np.sum(confs) / n)
    covariance = float(np.sum(confs * correct) / n) - p_bar * c_bar
    return p_bar + covariance / c_bar


def gain(acc: float, cwa_value: float) -> Optional[float]:
    """
    Share of the gap to perfect accuracy closed by confidence weighting.

    gain = (cwA - Acc) / (1 - min(cwA, Acc)).

    Returns:
        The gain, or None when min(cwA, Acc) equals 1.

    Example:
        >>> gain(0.5, 1.0)
        1.0
    """
    floor = min(acc, cwa_value)
    if floor >= 1.0:
        return None
    return (cwa_value - acc) / (1.0 - floor)


def _bin_index(confs: np.ndarray, m_bins: int) -> np.ndarray:
    # Interior edges are the doubles nearest k/M; a conf equal to an edge goes
    # to the higher bin and conf = 1 goes to the top bin.
    edges = np.arange(1, m_bins, dtype=float) / m_bins
    return np.searchsorted(edges, confs, side="right").astype(np.int64)


def _check_bins(m_bins: int) -> None:
    if m_bins < 1:
        raise InvalidBinsError(f"Bin count must be at least 1, got {m_bins}")


def ece(eval_set: EvaluationSet, m_bins: int = DEFAULT_BINS) -> float:
    """
    Expected Calibration Error over equal-width bins.

    ECE = sum_m (|B_m| / N) * |acc(B_m) - conf(B_m)|. Empty bins contribute
    nothing.

    Args:
        eval_set: Evaluation set.
        m_bins: Number of equal-width bins over [0, 1].

    Returns:
        ECE in [0, 1].

    Raises:
        InvalidBinsError: If m_bins < 1.
    """
    _check_bins(m_bins)
    confs = eval_set.confs
    correct = eval_set.correct
    bins = _bin_index(confs, m_bins)
    total = 0.0
    for m in range(m_bins):
        members = bins == m
        count = int(np.count_nonzero(members))
        if count == 0:
            continue
        bin_acc = np.sum(correct[members]) / count
        bin_conf = np.sum(confs[members]) / count
        total += (count / eval_set.n) * abs(bin_acc - bin_conf)
    return float(total)


def ece_from_indicator(eval_set: EvaluationSet, m_bins: int = DEFAULT_BINS) -> float:
    """
    ECE written as (1/N) * sum_m |sum_{i in B_m} (correct_i - conf_i)|.

    Equals :func:`ece` up to rounding.

    Raises:
        InvalidBinsError: If m_bins < 1.
    """
    _check_bins(m_bins)
    bins = _bin_index(eval_set.confs, m_bins)
    residuals = np.bincount(
        bins, weights=eval_set.correct - eval_set.confs, minlength=m_bins
    )
    return float(np.sum(np.abs(residuals)) / eval_set.n)


def brier(eval_set: EvaluationSet) -> float:
    """Brier score of the confidence against predicted-class correctness."""
    gap = eval_set.confs - eval_set.correct
    return float(np.sum(gap * gap) / eval_set.n)


def jensen_lower_bound(eval_set: EvaluationSet) -> Optional[float]:
    """
    Lower bound on CSR: (1 - accuracy) / (1 - E[conf | incorrect]).

    Evaluated as n_wrong^2 / (N * sum(1 - conf_i)) over the errors, with an
    exactly rounded sum and no 1 - accuracy subtraction, so it carries a
    few ulps of rounding. CSR itself is a plain float sum and can sit a
    relative 1e-14 below the bound when every error has the same
    confidence (the equality case).

    Returns:
        The bound, or None when there are no incorrect predictions.
    """
    wrong = eval_set.correct == 0.0
    n_wrong = int(np.count_nonzero(wrong))
    if n_wrong == 0:
        return None
    slack = math.fsum((1.0 - eval_set.confs[wrong]).tolist())
    return n_wrong * n_wrong / (eval_set.n * slack)


def risk_report(eval_set: EvaluationSet, m_bins: int = DEFAULT_BINS) -> RiskReport:
    """
    Compute every risk and usefulness indicator for an evaluation set.

    Undefined quantities (gain at perfect accuracy, conditional means and
    the Jensen bound without errors) are reported as None rather than
    raised.

    Args:
        eval_set: Clipped evaluation set.
        m_bins: Number of ECE bins.

    Returns:
        RiskReport for the set.
    """
    acc = accuracy(eval_set)
    cwa_value = cwa(eval_set)
    csr_value = csr(eval_set)
    sigma = sigma_csr(eval_set)
    z, p = p_risk(csr_value, sigma)
    return RiskReport(
        n=eval_set.n,
        acc=acc,
        cwa=cwa_value,
        gain=gain(acc, cwa_value),
        csr=csr_value,
        sigma_csr=sigma,
        z=z,
        p_risk=p,
        ece=ece(eval_set, m_bins),
        brier=brier(eval_set),
        mean_conf=mean_confidence(eval_set),
        mean_conf_wrong=mean_confidence_wrong(eval_set),
        jensen_lower_bound=jensen_lower_bound(eval_set),
    )


def adversarial_profile(
    n: int,
    lam: float,
    m_bins: int = DEFAULT_BINS,
    *,
    epsilon: float = DEFAULT_EPSILON,
    seed: int = 0,
) -> EvaluationSet:
    """
    Build a binary profile with ECE < 1/n and CSR > lam.

    The first n - 1 samples get a per-group calibrated assignment (every
    sample's confidence is its group's accuracy, so each ECE bin is exactly
    calibrated); one incorrect sample at confidence 1 - delta is appended
    last. Groups follow the latent confidence bins, merged until each has
    both correct and incorrect members, so no base confidence is 0 or 1
    and only the single base sample of n = 2 is clipped.

    Args:
        n: Number of samples, at least 2.
        lam: Target risk level; CSR will exceed it.
        m_bins: ECE bin count the guarantee refers to.
        epsilon: Clipping parameter of the returned set.
        seed: Seed for the base labels.

    Returns:
        EvaluationSet satisfying ece(set, m_bins) < 1/n and csr(set) > lam.

    Raises:
        ValueError: If n < 2 or lam <= 0.
        InvalidBinsError: If m_bins < 1.
        ClippingConflictError: If epsilon is too large for the requested lam.

    Example:
        >>> s = adversarial_profile(100, 1000.0, 15)
        >>> ece(s, 15) < 0.01 and csr(s) > 1000
        True
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not lam > 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    _check_bins(m_bins)

    rng = np.random.default_rng(seed)
    base = n - 1
    latent = rng.random(base)
    correct = rng.random(base) < latent
    pred = rng.integers(0, 2, size=base)
    if base >= 2 and (correct.all() or not correct.any()):
        correct[-1] = not correct[-1]

    # Walk the latent bins upwards, merging until a group holds both outcomes;
    # a one-outcome remainder joins the last mixed group.
    groups: List[List[int]] = []
    pending: List[int] = []
    latent_bins = _bin_index(latent, m_bins)
    for b in np.unique(latent_bins):
        pending.extend(np.flatnonzero(latent_bins == b).tolist())
        outcomes = correct[pending]
        if outcomes.any() and not outcomes.all():
            groups.append(pending)
            pending = []
    if pending:
        if groups:
            groups[-1].extend(pending)
        else:
            groups.append(pending)

    confs = np.empty(base, dtype=float)
    for members in groups:
        confs[members] = np.count_nonzero(correct[members]) / len(members)

    extremes = int(np.count_nonzero((confs == 0.0) | (confs == 1.0)))
    delta = min(1.0 / (2.0 * n * lam), 1.0 / (2.0 * n), 1.0 / (2.0 * m_bins))
    if epsilon * max(extremes, 1) >= delta or epsilon >= 1.0 / n:
        max_lambda = 1.0 / (2.0 * n * epsilon * max(extremes, 1))
        raise ClippingConflictError(
            f"lambda={lam} needs delta={delta:.3g} but epsilon={epsilon} with "
            f"{extremes} clipped sample(s) allows lambda below {max_lambda:.6g}",
            max_lambda=max_lambda,
        )

    records = [
        PredictionRecord(
            true_label=int(p) if ok else 1 - int(p),
            pred_label=int(p),
            conf=float(c),
        )
        for p, ok, c in zip(pred, correct, confs)
    ]
    records.append(PredictionRecord(true_label=0, pred_label=1, conf=1.0 - delta))

    logger.debug(
        f"Adversarial profile: n={n}, delta={delta:.3g}, {extremes} clipped base sample(s)"
    )
    return clip_confidences(records, epsilon=epsilon, k=2)
