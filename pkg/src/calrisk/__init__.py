"""
calrisk - Overconfidence risk and confidence-weighted metrics for classifiers.

This library measures whether a classifier's confidence scores can be
trusted: the Calibrated Size Ratio (CSR) and its risk probability,
confidence-weighted accuracy and the confidence-weighted confusion metrics,
ROC/cwROC curves with AUC/cwAUC, a synthetic harness with known
calibration, and binary isotonic and Platt calibrators.

Quick Start:
    >>> from calrisk import parse_predictions, risk_report
    >>>
    >>> eval_set = parse_predictions("predictions.csv")
    >>> report = risk_report(eval_set)
    >>> print(f"CSR {report.csr:.3f} (sigma {report.sigma_csr:.3f}), P_risk {report.p_risk:.1%}")

Building a set in code:
    >>> from calrisk import PredictionRecord, clip_confidences, cwa
    >>> s = clip_confidences([
    ...     PredictionRecord(true_label=1, pred_label=1, conf=0.9),
    ...     PredictionRecord(true_label=0, pred_label=1, conf=0.1),
    ... ])
    >>> cwa(s)
    0.9

See the module documentation for more details:
    - calrisk.models: Records, evaluation sets and result types
    - calrisk.metrics: CSR, sigma, P_risk, cwA, ECE, Brier
    - calrisk.confusion: Confidence-weighted confusion metrics
    - calrisk.ranking: ROC/cwROC and AUC/cwAUC
    - calrisk.synthetic: Synthetic experiment harness
    - calrisk.calibrators: Isotonic and Platt calibration
    - calrisk.parser: Prediction CSV files
    - calrisk.report: Report documents
    - calrisk.cli: Command line
"""

__version__ = "0.1.0"

# Data models
from .models import (
    CalRiskError,
    EmptySetError,
    LabelOutOfRangeError,
    InvalidConfidenceError,
    ConsistencyError,
    PredictionRecord,
    EvaluationSet,
    RiskReport,
    CwCounts,
    CwMetricRow,
    CurveSeries,
    AucGap,
    MacroAuc,
    clip_confidences,
    DEFAULT_EPSILON,
)

# Scalar metrics
from .metrics import (
    csr,
    sigma_csr,
    p_risk,
    cwa,
    cwa_covariance_form,
    gain,
    accuracy,
    ece,
    ece_from_indicator,
    brier,
    jensen_lower_bound,
    risk_report,
    adversarial_profile,
    DivisionByZeroRiskError,
    DegenerateSigmaError,
    InvalidBinsError,
    ClippingConflictError,
    DEFAULT_BINS,
)

# Confidence-weighted confusion metrics
from .confusion import (
    cw_counts,
    all_cw_counts,
    cw_metrics,
    cwa_from_counts,
    macro_identity_check,
    InconsistentCountsError,
)

# Ranking
from .ranking import (
    roc_curve,
    cw_roc_curve,
    class_auc,
    auc_gap,
    per_class_auc_gaps,
    monotone_invariance_check,
    macro_average,
    DegenerateClassError,
    NoValidClassesError,
    MissingClassConfidencesError,
    IdentityViolationError,
)

# Synthetic harness
from .synthetic import (
    ExperimentSpec,
    AggregateReport,
    SyntheticRunner,
    sample_confidences,
    generate_labels,
    run_experiment,
    expand_grid,
    summary_table,
    UnknownDistributionError,
    UnknownModeError,
    DISTRIBUTIONS,
    MODES,
)

# Calibrators
from .calibrators import (
    IsotonicMap,
    PlattMap,
    fit_isotonic,
    fit_platt,
    apply_calibrator,
    split_indices,
    calibrate_holdout,
    DegenerateTargetsError,
    UnsupportedMulticlassError,
    DegenerateSplitError,
    DecreasingPlattFitError,
)

# Files and reports
from .parser import (
    parse_predictions,
    write_predictions,
    ParseError,
    SchemaError,
)
from .report import (
    ReportDocument,
    build_report,
    dumps_report,
    loads_report,
)

__all__ = [
    # Version
    "__version__",
    # Models
    "CalRiskError",
    "EmptySetError",
    "LabelOutOfRangeError",
    "InvalidConfidenceError",
    "ConsistencyError",
    "PredictionRecord",
    "EvaluationSet",
    "RiskReport",
    "CwCounts",
    "CwMetricRow",
    "CurveSeries",
    "AucGap",
    "MacroAuc",
    "clip_confidences",
    "DEFAULT_EPSILON",
    # Metrics
    "csr",
    "sigma_csr",
    "p_risk",
    "cwa",
    "cwa_covariance_form",
    "gain",
    "accuracy",
    "ece",
    "ece_from_indicator",
    "brier",
    "jensen_lower_bound",
    "risk_report",
    "adversarial_profile",
    "DivisionByZeroRiskError",
    "DegenerateSigmaError",
    "InvalidBinsError",
    "ClippingConflictError",
    "DEFAULT_BINS",
    # Confusion
    "cw_counts",
    "all_cw_counts",
    "cw_metrics",
    "cwa_from_counts",
    "macro_identity_check",
    "InconsistentCountsError",
    # Ranking
    "roc_curve",
    "cw_roc_curve",
    "class_auc",
    "auc_gap",
    "per_class_auc_gaps",
    "monotone_invariance_check",
    "macro_average",
    "DegenerateClassError",
    "NoValidClassesError",
    "MissingClassConfidencesError",
    "IdentityViolationError",
    # Synthetic
    "ExperimentSpec",
    "AggregateReport",
    "SyntheticRunner",
    "sample_confidences",
    "generate_labels",
    "run_experiment",
    "expand_grid",
    "summary_table",
    "UnknownDistributionError",
    "UnknownModeError",
    "DISTRIBUTIONS",
    "MODES",
    # Calibrators
    "IsotonicMap",
    "PlattMap",
    "fit_isotonic",
    "fit_platt",
    "apply_calibrator",
    "split_indices",
    "calibrate_holdout",
    "DegenerateTargetsError",
    "UnsupportedMulticlassError",
    "DegenerateSplitError",
    "DecreasingPlattFitError",
    # Files and reports
    "parse_predictions",
    "write_predictions",
    "ParseError",
    "SchemaError",
    "ReportDocument",
    "build_report",
    "dumps_report",
    "loads_report",
]
