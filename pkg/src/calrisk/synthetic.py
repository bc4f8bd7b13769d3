"""
Synthetic harness for confidence profiles with a known calibration.

Each repetition draws n confidences from one of ten distributions, turns
each confidence c into a probability of being correct through one of eight
calibration modes, draws a uniformly random binary prediction and a
correctness outcome, and evaluates the resulting set. Repetitions are
aggregated into means and into the fraction of repetitions in which CSR
exceeded 1 by more than one and three standard deviations.

Every repetition gets its own random streams derived from the master seed
and the repetition index, so results do not depend on how many workers run
the repetitions or in which order they finish.

Example:
    >>> from calrisk.synthetic import ExperimentSpec, run_experiment
    >>> report = run_experiment(ExperimentSpec("uniform", "perfect", n=1000, reps=20))
    >>> print(f"CSR {report.mean_csr:.3f}, P_risk {report.mean_p_risk:.1%}")

    >>> runner = SyntheticRunner()
    >>>
    >>> @runner.on_report
    ... def show(report):
    ...     print(report.distribution, report.mode, report.mean_csr)
    ...
    >>> runner.run(expand_grid("all", "perfect", n=1000))
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .metrics import DEFAULT_BINS, gain, risk_report
from .models import (
    CalRiskError,
    DEFAULT_EPSILON,
    EvaluationSet,
    MacroAuc,
    PredictionRecord,
    RiskReport,
)
from .ranking import macro_auc

logger = logging.getLogger(__name__)


DEFAULT_SEED = 42
DEFAULT_REPS = 100

# Largest double below 1; sampled confidences stay in [0, 1)
_BELOW_ONE = float(np.nextafter(1.0, 0.0))

# Spawn-key stream ids within one repetition
_CONFIDENCE_STREAM = 0
_LABEL_STREAM = 1

SeedLike = Union[int, np.random.SeedSequence]
Sampler = Callable[[np.random.Generator, int], np.ndarray]
ModeFn = Callable[[np.ndarray, np.random.Generator], np.ndarray]


class UnknownDistributionError(CalRiskError, KeyError):
    """Raised for a distribution id that is not registered."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class UnknownModeError(CalRiskError, KeyError):
    """Raised for a calibration mode id that is not registered."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class DistributionSpec:
    """
    A named confidence distribution on [0, 1).

    Attributes:
        id: Registry key.
        label: Display name.
        description: Sampling procedure.
        sampler: Callable drawing n values from a Generator.
    """
    id: str
    label: str
    description: str
    sampler: Sampler

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n values, clamped below 1."""
        return np.minimum(self.sampler(rng, n), _BELOW_ONE)


@dataclass(frozen=True)
class CalibrationMode:
    """
    A named map from confidence to probability of being correct.

    Attributes:
        id: Registry key.
        label: Display name.
        description: The map p_true(c).
        fn: Callable mapping confidences (and a Generator for the random
            modes) to probabilities in [0, 1].
        stochastic: Whether fn draws one uniform per sample.
    """
    id: str
    label: str
    description: str
    fn: ModeFn
    stochastic: bool = False

    def p_correct(self, confs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Probability of a correct prediction for each confidence."""
        return np.clip(self.fn(np.asarray(confs, dtype=float), rng), 0.0, 1.0)


def _bimodal(rng: np.random.Generator, n: int) -> np.ndarray:
    low = rng.beta(0.5, 3.0, n)
    high = rng.beta(3.0, 0.5, n)
    return np.where(rng.random(n) < 0.5, low, high)


def _normal_trunc(rng: np.random.Generator, n: int) -> np.ndarray:
    # Rejection sampling of N(0.7, 0.1^2) restricted to [0, 1)
    accepted: List[np.ndarray] = []
    remaining = n
    while remaining > 0:
        draw = rng.normal(0.7, 0.1, max(remaining, 16))
        keep = draw[(draw >= 0.0) & (draw < 1.0)][:remaining]
        accepted.append(keep)
        remaining -= len(keep)
    return np.concatenate(accepted) if accepted else np.empty(0)


def _log_uniform_low(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(rng.uniform(math.log(1e-4), math.log(1.0 - 1e-6), n))


def _log_uniform_high(rng: np.random.Generator, n: int) -> np.ndarray:
    return 1.0 - np.exp(rng.uniform(math.log(1e-6), math.log(0.9), n))


_DISTRIBUTION_LIST = (
    DistributionSpec("uniform", "Uniform", "c ~ U(0, 1)",
                     lambda rng, n: rng.random(n)),
    DistributionSpec("skew_high", "Skew High", "c ~ Beta(3.0, 0.5)",
                     lambda rng, n: rng.beta(3.0, 0.5, n)),
    DistributionSpec("skew_low", "Skew Low", "c ~ Beta(0.5, 3.0)",
                     lambda rng, n: rng.beta(0.5, 3.0, n)),
    DistributionSpec("bimodal", "Bimodal", "c ~ 1/2 Beta(0.5, 3.0) + 1/2 Beta(3.0, 0.5)",
                     _bimodal),
    DistributionSpec("tight_hi", "Tight Hi", "c ~ U(0.8, 1.0)",
                     lambda rng, n: rng.uniform(0.8, 1.0, n)),
    DistributionSpec("tight_lo", "Tight Lo", "c ~ U(0.0, 0.2)",
                     lambda rng, n: rng.uniform(0.0, 0.2, n)),
    DistributionSpec("normal_trunc", "Normal", "c ~ N(0.7, 0.1^2) on [0, 1)",
                     _normal_trunc),
    DistributionSpec("log_uniform_low", "Log-Uniform Low",
                     "c = exp(u), u ~ U(log 1e-4, log(1 - 1e-6))", _log_uniform_low),
    DistributionSpec("log_uniform_high", "Log-Uniform High",
                     "c = 1 - exp(u), u ~ U(log 1e-6, log 0.9)", _log_uniform_high),
    DistributionSpec("bell", "Bell", "c ~ Beta(5.0, 5.0)",
                     lambda rng, n: rng.beta(5.0, 5.0, n)),
)

_MODE_LIST = (
    CalibrationMode("random_half", "Random 0.5", "0.5",
                    lambda c, rng: np.full_like(c, 0.5)),
    CalibrationMode("perfect", "Perfect", "c",
                    lambda c, rng: c.copy()),
    CalibrationMode("underconf_affine", "Underconf 0.2+0.8c", "0.2 + 0.8c",
                    lambda c, rng: 0.2 + 0.8 * c),
    CalibrationMode("underconf_sqrt", "Underconf sqrt(c)", "sqrt(c)",
                    lambda c, rng: np.sqrt(c)),
    CalibrationMode("random_over", "Random over c", "U(c, 1)",
                    lambda c, rng: c + (1.0 - c) * rng.random(len(c)), stochastic=True),
    CalibrationMode("overconf_sqrt_complement", "Overconf 1-sqrt(1-c)", "1 - sqrt(1 - c)",
                    lambda c, rng: 1.0 - np.sqrt(1.0 - c)),
    CalibrationMode("overconf_half", "Overconf 0.5c", "0.5c",
                    lambda c, rng: 0.5 * c),
    CalibrationMode("random_under", "Random under c", "U(0, c)",
                    lambda c, rng: c * rng.random(len(c)), stochastic=True),
)

DISTRIBUTIONS: Dict[str, DistributionSpec] = {d.id: d for d in _DISTRIBUTION_LIST}
MODES: Dict[str, CalibrationMode] = {m.id: m for m in _MODE_LIST}


def get_distribution(distribution: Union[str, DistributionSpec]) -> DistributionSpec:
    """
    Look up a distribution by id.

    Raises:
        UnknownDistributionError: If the id is not registered.
    """
    if isinstance(distribution, DistributionSpec):
        return distribution
    try:
        return DISTRIBUTIONS[distribution]
    except KeyError:
        raise UnknownDistributionError(
            f"Unknown distribution: {distribution}. Use one of: {list(DISTRIBUTIONS)}"
        ) from None


def get_mode(mode: Union[str, CalibrationMode]) -> CalibrationMode:
    """
    Look up a calibration mode by id.

    Raises:
        UnknownModeError: If the id is not registered.
    """
    if isinstance(mode, CalibrationMode):
        return mode
    try:
        return MODES[mode]
    except KeyError:
        raise UnknownModeError(f"Unknown mode: {mode}. Use one of: {list(MODES)}") from None


def sample_confidences(
    distribution: Union[str, DistributionSpec],
    n: int,
    seed: SeedLike,
) -> np.ndarray:
    """
    Draw n i.i.d. confidences from a named distribution.

    Args:
        distribution: Distribution id or spec.
        n: Number of draws, at least 1.
        seed: Integer seed or SeedSequence.

    Returns:
        Array of n values in [0, 1).

    Raises:
        UnknownDistributionError: If the id is not registered.
        ValueError: If n < 1.

    Example:
        >>> c = sample_confidences("skew_high", 100_000, seed=1)
        >>> round(float(c.mean()), 2)
        0.86
    """
    spec = get_distribution(distribution)
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return spec.sample(np.random.default_rng(seed), n)


def generate_labels(
    confs: Sequence[float],
    mode: Union[str, CalibrationMode],
    seed: SeedLike,
    epsilon: float = DEFAULT_EPSILON,
) -> EvaluationSet:
    """
    Draw binary predictions and labels whose correctness follows a mode.

    The predicted label is uniform on {0, 1}; the prediction is correct
    with probability p_true(c); the true label equals the prediction when
    correct and the other class otherwise.

    Args:
        confs: Confidences in [0, 1).
        mode: Calibration mode id or object.
        seed: Integer seed or SeedSequence.
        epsilon: Clipping parameter for the returned set.

    Returns:
        Binary EvaluationSet with clipped confidences.

    Raises:
        UnknownModeError: If the id is not registered.
    """
    calibration = get_mode(mode)
    c = np.asarray(confs, dtype=float)
    rng = np.random.default_rng(seed)

    p = calibration.p_correct(c, rng)
    pred = rng.integers(0, 2, len(c))
    correct = rng.random(len(c)) < p
    true = np.where(correct, pred, 1 - pred)
    clipped = np.clip(c, epsilon, 1.0 - epsilon)

    records = tuple(
        PredictionRecord(true_label=int(t), pred_label=int(y), conf=float(v))
        for t, y, v in zip(true.tolist(), pred.tolist(), clipped.tolist())
    )
    return EvaluationSet(records=records, k=2, epsilon=epsilon)


@dataclass(frozen=True)
class ExperimentSpec:
    """
    One cell of the synthetic grid.

    Attributes:
        distribution: Distribution id.
        mode: Calibration mode id.
        n: Samples per repetition.
        reps: Number of repetitions.
        master_seed: Non-negative seed all repetition streams derive from.
        m_bins: ECE bin count.
        epsilon: Clipping parameter.
    """
    distribution: str
    mode: str
    n: int
    reps: int = DEFAULT_REPS
    master_seed: int = DEFAULT_SEED
    m_bins: int = DEFAULT_BINS
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        get_distribution(self.distribution)
        get_mode(self.mode)
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if self.reps < 1:
            raise ValueError(f"reps must be at least 1, got {self.reps}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be non-negative, got {self.master_seed}")

    def stream(self, rep: int, stream: int) -> np.random.SeedSequence:
        """Seed sequence for one stream of one repetition."""
        return np.random.SeedSequence(self.master_seed, spawn_key=(rep, stream))


@dataclass(frozen=True)
class RepetitionResult:
    """Metrics of one repetition."""
    rep: int
    report: RiskReport
    macro: Optional[MacroAuc]


@dataclass(frozen=True)
class AggregateReport:
    """
    Averages over the repetitions of one experiment.

    Attributes:
        distribution: Distribution id.
        mode: Calibration mode id.
        n: Samples per repetition.
        reps: Number of repetitions.
        mean_acc: Mean accuracy.
        mean_cwa: Mean confidence-weighted accuracy.
        mean_gain: Mean gain over the repetitions where it is defined.
        mean_csr: Mean CSR.
        mean_sigma_csr: Mean CSR standard deviation.
        mean_p_risk: Mean risk probability.
        frac_over_1sigma: Fraction of repetitions with CSR > 1 + sigma.
        frac_over_3sigma: Fraction of repetitions with CSR > 1 + 3 sigma.
        mean_ece: Mean ECE.
        mean_brier: Mean Brier score.
        mean_auc: Mean macro AUC over repetitions where it is defined.
        mean_cw_auc: Mean macro cwAUC over the same repetitions.
        undefined_auc_reps: Repetitions where every class was degenerate.
    """
    distribution: str
    mode: str
    n: int
    reps: int
    mean_acc: float
    mean_cwa: float
    mean_gain: Optional[float]
    mean_csr: float
    mean_sigma_csr: float
    mean_p_risk: float
    frac_over_1sigma: float
    frac_over_3sigma: float
    mean_ece: float
    mean_brier: float
    mean_auc: Optional[float]
    mean_cw_auc: Optional[float]
    undefined_auc_reps: int = 0

    @property
    def key(self) -> Tuple[str, str, int]:
        """(distribution, mode, n) lookup key."""
        return (self.distribution, self.mode, self.n)

    def to_dict(self) -> dict:
        """Convert the report to a plain dictionary."""
        return asdict(self)


def run_repetition(spec: ExperimentSpec, rep: int) -> RepetitionResult:
    """Run a single repetition of an experiment."""
    confs = sample_confidences(spec.distribution, spec.n, spec.stream(rep, _CONFIDENCE_STREAM))
    eval_set = generate_labels(
        confs, spec.mode, spec.stream(rep, _LABEL_STREAM), epsilon=spec.epsilon
    )
    return RepetitionResult(
        rep=rep,
        report=risk_report(eval_set, spec.m_bins),
        macro=macro_auc(eval_set),
    )


def _mean(values: Sequence[float]) -> Optional[float]:
    if not values:
        return None
    return math.fsum(values) / len(values)


def aggregate(spec: ExperimentSpec, results: Sequence[RepetitionResult]) -> AggregateReport:
    """
    Reduce repetition results in repetition-index order.

    Args:
        spec: The experiment the results belong to.
        results: One result per repetition.

    Returns:
        AggregateReport for the experiment.
    """
    ordered = sorted(results, key=lambda r: r.rep)
    reports = [r.report for r in ordered]
    macros = [r.macro for r in ordered if r.macro is not None]
    reps = len(reports)

    return AggregateReport(
        distribution=spec.distribution,
        mode=spec.mode,
        n=spec.n,
        reps=reps,
        mean_acc=_mean([r.acc for r in reports]),
        mean_cwa=_mean([r.cwa for r in reports]),
        mean_gain=_mean([r.gain for r in reports if r.gain is not None]),
        mean_csr=_mean([r.csr for r in reports]),
        mean_sigma_csr=_mean([r.sigma_csr for r in reports]),
        mean_p_risk=_mean([r.p_risk for r in reports]),
        frac_over_1sigma=sum(r.exceeds_sigma(1.0) for r in reports) / reps,
        frac_over_3sigma=sum(r.exceeds_sigma(3.0) for r in reports) / reps,
        mean_ece=_mean([r.ece for r in reports]),
        mean_brier=_mean([r.brier for r in reports]),
        mean_auc=_mean([m.auc_macro for m in macros]),
        mean_cw_auc=_mean([m.cw_auc_macro for m in macros]),
        undefined_auc_reps=reps - len(macros),
    )


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> AggregateReport:
    """
    Run every repetition of an experiment and aggregate.

    Args:
        spec: Experiment definition.
        workers: Threads used for repetitions. The result is identical for
            any worker count.

    Returns:
        AggregateReport with means and threshold fractions.

    Example:
        >>> spec = ExperimentSpec("uniform", "overconf_half", n=1000, reps=100)
        >>> run_experiment(spec).frac_over_3sigma
        1.0
    """
    logger.debug(
        f"Running {spec.distribution}/{spec.mode} n={spec.n} reps={spec.reps} "
        f"seed={spec.master_seed} workers={workers}"
    )
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda rep: run_repetition(spec, rep), range(spec.reps)))
    else:
        results = [run_repetition(spec, rep) for rep in range(spec.reps)]

    report = aggregate(spec, results)
    logger.debug(
        f"Finished {spec.distribution}/{spec.mode}: mean CSR {report.mean_csr:.4f}, "
        f">3sigma {report.frac_over_3sigma:.2%}"
    )
    return report


def _ids(selector: str, registry: Dict[str, object]) -> List[str]:
    return list(registry) if selector == "all" else [selector]


def expand_grid(
    distribution: str,
    mode: str,
    n: int,
    reps: int = DEFAULT_REPS,
    master_seed: int = DEFAULT_SEED,
    m_bins: int = DEFAULT_BINS,
    epsilon: float = DEFAULT_EPSILON,
) -> List[ExperimentSpec]:
    """
    ExperimentSpecs for a distribution and mode selection.

    "all" selects every registered id, in registry order.

    Raises:
        UnknownDistributionError: If a distribution id is not registered.
        UnknownModeError: If a mode id is not registered.
    """
    return [
        ExperimentSpec(d, m, n=n, reps=reps, master_seed=master_seed, m_bins=m_bins, epsilon=epsilon)
        for d in _ids(distribution, DISTRIBUTIONS)
        for m in _ids(mode, MODES)
    ]


SUMMARY_COLUMNS = (
    "Distribution", "Mode", "N", "Acc", "cwA", "gain", "CSR", "σ_CSR", "P_risk",
    ">1σ", ">3σ", "ECE", "Brier", "AUC", "cwAUC",
)


def _sort_key(report: AggregateReport) -> Tuple[int, int, int]:
    dist_order = list(DISTRIBUTIONS)
    mode_order = list(MODES)
    return (dist_order.index(report.distribution), mode_order.index(report.mode), report.n)


def summary_table(reports: Iterable[AggregateReport]) -> List[Dict[str, object]]:
    """
    Rows for the synthetic summary table.

    Rows are ordered by distribution, then mode (both in registry order),
    then n. Values are unformatted; None marks an undefined mean.

    Raises:
        ValueError: If no reports are given.
    """
    ordered = sorted(reports, key=_sort_key)
    if not ordered:
        raise ValueError("summary_table needs at least one report")
    return [
        dict(zip(SUMMARY_COLUMNS, (
            r.distribution, r.mode, r.n, r.mean_acc, r.mean_cwa, r.mean_gain,
            r.mean_csr, r.mean_sigma_csr, r.mean_p_risk,
            r.frac_over_1sigma, r.frac_over_3sigma, r.mean_ece, r.mean_brier,
            r.mean_auc, r.mean_cw_auc,
        )))
        for r in ordered
    ]


DIFFERENCE_COLUMNS = (
    "Distribution", "Mode", "N", "Acc", "cwA", "ΔcwA", "gain",
    "AUC", "cwAUC", "ΔAUC", "AUC gain",
)

DIRECTION_COLUMNS = ("Mode", "cwAUC>AUC", "cwAUC<AUC", "cwAUC=AUC", "undefined")


def _delta(base: Optional[float], weighted: Optional[float]) -> Optional[float]:
    if base is None or weighted is None:
        return None
    return weighted - base


def difference_table(reports: Iterable[AggregateReport]) -> List[Dict[str, object]]:
    """
    Rows comparing each metric with its confidence-weighted counterpart.

    ΔcwA = cwA - Acc and ΔAUC = cwAUC - AUC. Both gains are computed from
    the repetition means with the same rule as ``metrics.gain``, so the AUC
    gain is ΔAUC / (1 - min(AUC, cwAUC)). Rows follow summary_table order.

    Raises:
        ValueError: If no reports are given.
    """
    ordered = sorted(reports, key=_sort_key)
    if not ordered:
        raise ValueError("difference_table needs at least one report")

    rows = []
    for r in ordered:
        auc_gain = None
        if r.mean_auc is not None and r.mean_cw_auc is not None:
            auc_gain = gain(r.mean_auc, r.mean_cw_auc)
        rows.append(dict(zip(DIFFERENCE_COLUMNS, (
            r.distribution, r.mode, r.n, r.mean_acc, r.mean_cwa,
            _delta(r.mean_acc, r.mean_cwa), gain(r.mean_acc, r.mean_cwa),
            r.mean_auc, r.mean_cw_auc, _delta(r.mean_auc, r.mean_cw_auc), auc_gain,
        ))))
    return rows


def direction_counts(reports: Iterable[AggregateReport]) -> List[Dict[str, object]]:
    """
    Count, per calibration mode, the experiments where cwAUC beats AUC.

    Each report counts once, in the column given by the sign of its mean
    cwAUC minus its mean AUC; reports without a defined AUC are counted as
    undefined. Modes appear in registry order and only if a report uses them.

    Raises:
        ValueError: If no reports are given.

    Example:
        >>> reports = SyntheticRunner().run(expand_grid("all", "all", n=1000))
        >>> for row in direction_counts(reports):
        ...     print(row["Mode"], row["cwAUC>AUC"], row["cwAUC<AUC"])
    """
    reports = list(reports)
    if not reports:
        raise ValueError("direction_counts needs at least one report")

    counts: Dict[str, Dict[str, object]] = {}
    for r in sorted(reports, key=_sort_key):
        row = counts.setdefault(r.mode, dict.fromkeys(DIRECTION_COLUMNS, 0))
        row["Mode"] = r.mode
        delta = _delta(r.mean_auc, r.mean_cw_auc)
        if delta is None:
            row["undefined"] += 1
        elif delta > 0.0:
            row["cwAUC>AUC"] += 1
        elif delta < 0.0:
            row["cwAUC<AUC"] += 1
        else:
            row["cwAUC=AUC"] += 1
    return [counts[m] for m in MODES if m in counts]


class SyntheticRunner:
    """
    A reusable runner for grids of synthetic experiments.

    Keeps the most recent report for every (distribution, mode, n) and
    notifies registered callbacks as each experiment finishes.

    Example:
        >>> runner = SyntheticRunner(workers=4)
        >>>
        >>> @runner.on_report
        ... def handle(report: AggregateReport):
        ...     print(f"{report.distribution}/{report.mode}: {report.mean_csr:.3f}")
        ...
        >>> runner.run(expand_grid("uniform", "all", n=1000))
    """

    def __init__(self, workers: int = 1):
        self.workers = workers
        self._callbacks: List[Callable[[AggregateReport], None]] = []
        self._last_reports: Dict[Tuple[str, str, int], AggregateReport] = {}

    def on_report(
        self, callback: Callable[[AggregateReport], None]
    ) -> Callable[[AggregateReport], None]:
        """
        Register a callback for finished experiments.

        Args:
            callback: Function called with each AggregateReport.

        Returns:
            The callback function (for use as a decorator).
        """
        self._callbacks.append(callback)
        return callback

    def run(self, specs: Iterable[ExperimentSpec]) -> List[AggregateReport]:
        """
        Run experiments in order and trigger callbacks for each report.

        Args:
            specs: Experiments to run.

        Returns:
            Reports in the order of specs.
        """
        reports = []
        for spec in specs:
            report = run_experiment(spec, workers=self.workers)

            for callback in self._callbacks:
                try:
                    callback(report)
                except Exception as e:
                    logger.error(f"Callback error: {e}")

            self._last_reports[report.key] = report
            reports.append(report)

        logger.debug(f"Grid complete: {len(reports)} experiment(s)")
        return reports

    def get_last_report(self, distribution: str, mode: str, n: int) -> Optional[AggregateReport]:
        """
        Get the last report for a grid cell.

        Returns:
            The last AggregateReport, or None if never run.
        """
        return self._last_reports.get((distribution, mode, n))

    @property
    def known_experiments(self) -> List[Tuple[str, str, int]]:
        """Grid cells that have been run."""
        return list(self._last_reports.keys())
