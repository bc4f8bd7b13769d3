"""
Evaluation report documents and their JSON, CSV and text renderings.

A ReportDocument gathers everything computed for one prediction file: the
RiskReport, the confidence-weighted metrics per class, AUC and cwAUC per
class with their macro averages, and provenance. The JSON form has the
top-level keys ``schema_version``, ``risk``, ``cw_per_class``,
``auc_per_class``, ``auc_macro`` and ``provenance`` and round-trips
losslessly.
"""

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .confusion import all_cw_counts, cw_metrics
from .metrics import DEFAULT_BINS, risk_report
from .models import AucGap, CwMetricRow, EvaluationSet, MacroAuc, RiskReport
from .parser import SchemaError
from .ranking import MissingClassConfidencesError, macro_average, per_class_auc_gaps
from .utils import format_key_values, format_table

logger = logging.getLogger(__name__)


REPORT_SCHEMA_VERSION = 1

# Display names of the RiskReport fields, in display order
RISK_COLUMNS = (
    ("n", "N"),
    ("acc", "Acc"),
    ("cwa", "cwA"),
    ("gain", "gain"),
    ("csr", "CSR"),
    ("sigma_csr", "σ_CSR"),
    ("z", "z"),
    ("p_risk", "P_risk"),
    ("ece", "ECE"),
    ("brier", "Brier"),
    ("mean_conf", "mean conf"),
    ("mean_conf_wrong", "mean conf (wrong)"),
    ("jensen_lower_bound", "CSR lower bound"),
)


@dataclass(frozen=True)
class ReportDocument:
    """
    Full evaluation of one prediction set.

    Attributes:
        risk: Scalar risk and usefulness indicators.
        cw_per_class: Confidence-weighted metrics, one row per class.
        auc_per_class: AUC and cwAUC for each non-degenerate class.
        auc_macro: Macro averages, or None when no class could be ranked.
        provenance: Input path, epsilon, bin count and similar settings.
        schema_version: Format version of the JSON emission.
    """
    risk: RiskReport
    cw_per_class: Tuple[CwMetricRow, ...]
    auc_per_class: Tuple[AucGap, ...]
    auc_macro: Optional[MacroAuc]
    provenance: Dict[str, Any] = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict:
        """Convert the document to plain JSON-compatible data."""
        macro = None
        if self.auc_macro is not None:
            macro = {
                "auc_macro": self.auc_macro.auc_macro,
                "cw_auc_macro": self.auc_macro.cw_auc_macro,
                "classes": list(self.auc_macro.classes),
                "excluded": list(self.auc_macro.excluded),
            }
        return {
            "schema_version": self.schema_version,
            "risk": self.risk.to_dict(),
            "cw_per_class": [row.to_dict() for row in self.cw_per_class],
            "auc_per_class": [gap.to_dict() for gap in self.auc_per_class],
            "auc_macro": macro,
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ReportDocument":
        """
        Rebuild a document from :meth:`to_dict` output.

        Raises:
            SchemaError: If the schema version is unsupported or a key is missing.
        """
        version = data.get("schema_version")
        if version != REPORT_SCHEMA_VERSION:
            raise SchemaError(f"Unsupported report schema_version: {version}")
        try:
            macro_data = data["auc_macro"]
            macro = None
            if macro_data is not None:
                macro = MacroAuc(
                    auc_macro=macro_data["auc_macro"],
                    cw_auc_macro=macro_data["cw_auc_macro"],
                    classes=tuple(macro_data["classes"]),
                    excluded=tuple(macro_data["excluded"]),
                )
            return cls(
                risk=RiskReport(**data["risk"]),
                cw_per_class=tuple(CwMetricRow(**row) for row in data["cw_per_class"]),
                auc_per_class=tuple(AucGap(**gap) for gap in data["auc_per_class"]),
                auc_macro=macro,
                provenance=dict(data["provenance"]),
                schema_version=version,
            )
        except (KeyError, TypeError) as e:
            raise SchemaError(f"Malformed report document: {e}") from e


def build_report(
    eval_set: EvaluationSet,
    m_bins: int = DEFAULT_BINS,
    provenance: Optional[Mapping[str, Any]] = None,
) -> ReportDocument:
    """
    Evaluate a set with every metric family.

    Per-class ranking needs per-class confidences for K > 2; without them
    the AUC sections are left empty.

    Args:
        eval_set: Evaluation set.
        m_bins: ECE bin count.
        provenance: Settings recorded alongside the results.

    Returns:
        ReportDocument for the set.
    """
    risk = risk_report(eval_set, m_bins)
    rows = tuple(cw_metrics(counts) for counts in all_cw_counts(eval_set))

    gaps: List[AucGap] = []
    macro = None
    try:
        gaps, excluded = per_class_auc_gaps(eval_set)
        if gaps:
            macro = macro_average(gaps, excluded)
        else:
            logger.warning("Every class is degenerate; AUC is undefined")
    except MissingClassConfidencesError as e:
        logger.warning(f"Skipping AUC: {e}")

    return ReportDocument(
        risk=risk,
        cw_per_class=rows,
        auc_per_class=tuple(gaps),
        auc_macro=macro,
        provenance=dict(provenance or {}),
    )


def dumps_report(document: ReportDocument) -> str:
    """Serialize a document as indented JSON with sorted keys."""
    return json.dumps(document.to_dict(), indent=2, sort_keys=True) + "\n"


def loads_report(text: str) -> ReportDocument:
    """
    Parse a document from :func:`dumps_report` output.

    Raises:
        SchemaError: If the document is malformed.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"Report is not valid JSON: {e}", line=e.lineno) from e
    return ReportDocument.from_dict(data)


def risk_row(risk: RiskReport) -> Dict[str, Any]:
    """RiskReport fields under their display names."""
    values = risk.to_dict()
    return {label: values[name] for name, label in RISK_COLUMNS}


def render_text(document: ReportDocument) -> str:
    """Human-readable report."""
    sections = [format_key_values(risk_row(document.risk))]

    cw_rows = [
        {
            "class": row.class_id,
            "cwPrecision": row.cw_precision,
            "cwRecall": row.cw_recall,
            "cwSpecificity": row.cw_specificity,
            "cwF1": row.cw_f1,
            "cwMCC": row.cw_mcc,
            "cwAcc": row.cw_acc,
        }
        for row in document.cw_per_class
    ]
    sections.append(format_table(cw_rows))

    if document.auc_per_class:
        auc_rows: List[Dict[str, Any]] = [
            {"class": gap.class_id, "AUC": gap.auc, "cwAUC": gap.cw_auc, "cwAUC-AUC": gap.delta}
            for gap in document.auc_per_class
        ]
        if document.auc_macro is not None:
            auc_rows.append({
                "class": "macro",
                "AUC": document.auc_macro.auc_macro,
                "cwAUC": document.auc_macro.cw_auc_macro,
                "cwAUC-AUC": document.auc_macro.cw_auc_macro - document.auc_macro.auc_macro,
            })
        sections.append(format_table(auc_rows))

    return "\n\n".join(sections) + "\n"


def render_csv(document: ReportDocument) -> str:
    """Single-row CSV with the risk columns and macro AUC."""
    row = dict(document.risk.to_dict())
    macro = document.auc_macro
    row["auc_macro"] = macro.auc_macro if macro is not None else None
    row["cw_auc_macro"] = macro.cw_auc_macro if macro is not None else None
    return rows_to_csv([row])


def rows_to_csv(rows: Sequence[Mapping[str, Any]]) -> str:
    """Render row dictionaries as CSV; None becomes an empty cell."""
    if not rows:
        return ""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else _csv_value(v)) for k, v in row.items()})
    return buffer.getvalue()


def _csv_value(value: Any) -> Any:
    return repr(value) if isinstance(value, float) else value


def render_comparison(rows: Mapping[str, RiskReport], aucs: Mapping[str, Optional[float]]) -> str:
    """
    Side-by-side RiskReports, one row per calibration regime.

    Args:
        rows: Regime name to RiskReport, in display order.
        aucs: Regime name to classical macro AUC (None if undefined).
    """
    table = []
    for regime, risk in rows.items():
        line: Dict[str, Any] = {"regime": regime}
        line.update(risk_row(risk))
        line["AUC"] = aucs.get(regime)
        table.append(line)
    return format_table(table) + "\n"

