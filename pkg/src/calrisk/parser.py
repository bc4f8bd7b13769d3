"""
Reader and writer for prediction CSV files.

A prediction file is UTF-8, comma separated, with a mandatory header:

    true_label,pred_label,conf[,conf_0,...,conf_{K-1}]

One row per sample. ``conf`` is the confidence of the predicted class; the
optional ``conf_k`` columns give the full per-class vector and must agree
with ``conf`` at the predicted label to within CONF_TOLERANCE. When they
agree, ``conf`` is kept and written into the vector. LF and CRLF line
endings are both accepted.

Curve files written by :func:`write_curve` have the header ``x,y`` and one
point per row in sweep order.
"""

import csv
import io
import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from .models import (
    CalRiskError,
    ConsistencyError,
    CurveSeries,
    DEFAULT_EPSILON,
    EvaluationSet,
    PredictionRecord,
    clip_confidences,
)
from .utils import atomic_write_text

logger = logging.getLogger(__name__)


# Mandatory leading columns
BASE_COLUMNS = ("true_label", "pred_label", "conf")

# Prefix of the optional per-class confidence columns
CLASS_CONF_PREFIX = "conf_"

# Allowed |conf_{pred} - conf| in an input row
CONF_TOLERANCE = 1e-6


class ParseError(CalRiskError, ValueError):
    """
    Raised when a prediction file row cannot be parsed.

    Attributes:
        line: 1-based line number of the offending row, if known.
    """

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line


class SchemaError(CalRiskError, ValueError):
    """Raised when the header or the class count is inconsistent."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line


def parse_header(header: Sequence[str]) -> int:
    """
    Validate a header row.

    Args:
        header: Column names.

    Returns:
        Number of ``conf_k`` columns (0 when absent).

    Raises:
        SchemaError: If the header does not follow the file format.

    Example:
        >>> parse_header(["true_label", "pred_label", "conf", "conf_0", "conf_1"])
        2
    """
    names = [name.strip() for name in header]
    if tuple(names[:3]) != BASE_COLUMNS:
        raise SchemaError(f"Header must start with {','.join(BASE_COLUMNS)}, got {','.join(names)}", line=1)

    extra = names[3:]
    expected = [f"{CLASS_CONF_PREFIX}{k}" for k in range(len(extra))]
    if extra != expected:
        raise SchemaError(f"Per-class columns must be {','.join(expected)}, got {','.join(extra)}", line=1)
    if len(extra) == 1:
        raise SchemaError("At least two per-class confidence columns are required", line=1)
    return len(extra)


def _parse_float(text: str, column: str, line: int) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ParseError(f"{column} must be finite, got {text!r}", line=line)
    if not 0.0 <= value <= 1.0:
        raise ParseError(f"{column} must be in [0, 1], got {text!r}", line=line)
    return value


def parse_row(fields: Sequence[str], line: int, n_classes: int) -> PredictionRecord:
    """
    Parse one data row.

    Args:
        fields: Raw field values.
        line: 1-based line number, for error messages.
        n_classes: Number of ``conf_k`` columns, 0 if absent.

    Returns:
        PredictionRecord with unclipped confidences.

    Raises:
        ParseError: If a field is malformed.
        SchemaError: If a label does not fit the per-class columns.
        ConsistencyError: If ``conf_{pred}`` disagrees with ``conf``.
    """
    expected = len(BASE_COLUMNS) + n_classes
    if len(fields) != expected:
        raise ParseError(f"Expected {expected} fields, got {len(fields)}", line=line)

    try:
        true_label = int(fields[0])
        pred_label = int(fields[1])
        conf = _parse_float(fields[2], "conf", line)
        class_confs: Optional[List[float]] = None
        if n_classes:
            class_confs = [
                _parse_float(text, f"{CLASS_CONF_PREFIX}{k}", line)
                for k, text in enumerate(fields[3:])
            ]
    except ParseError:
        raise
    except Exception as e:
        raise ParseError(f"Malformed row: {e}", line=line) from e

    if true_label < 0 or pred_label < 0:
        raise ParseError(f"Labels must be non-negative, got {true_label},{pred_label}", line=line)

    if class_confs is None:
        return PredictionRecord(true_label=true_label, pred_label=pred_label, conf=conf)

    if max(true_label, pred_label) >= n_classes:
        raise SchemaError(
            f"Label {max(true_label, pred_label)} needs more than {n_classes} per-class columns",
            line=line,
        )
    if abs(class_confs[pred_label] - conf) > CONF_TOLERANCE:
        raise ConsistencyError(
            f"conf_{pred_label}={class_confs[pred_label]} disagrees with conf={conf}",
            line=line,
        )
    class_confs[pred_label] = conf
    return PredictionRecord(
        true_label=true_label,
        pred_label=pred_label,
        conf=conf,
        class_confs=tuple(class_confs),
    )


def read_records(path: Union[str, Path]) -> Tuple[List[PredictionRecord], int]:
    """
    Read every row of a prediction file without clipping.

    Returns:
        Tuple (records, n_classes) where n_classes is the number of
        ``conf_k`` columns (0 when absent).

    Raises:
        SchemaError: If the header is missing or malformed.
        ParseError: If a row is malformed.
    """
    records: List[PredictionRecord] = []
    with open(path, newline="", encoding="utf-8-sig") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path} is empty; a header row is required", line=1)
        n_classes = parse_header(header)

        for fields in reader:
            if not any(field.strip() for field in fields):
                continue
            records.append(parse_row(fields, reader.line_num, n_classes))

    logger.debug(f"Read {len(records)} row(s) from {path}")
    return records, n_classes


def parse_predictions(path: Union[str, Path], epsilon: float = DEFAULT_EPSILON) -> EvaluationSet:
    """
    Parse a prediction file into a clipped EvaluationSet.

    The class count is the number of ``conf_k`` columns when present,
    otherwise the largest label plus one (at least 2). Row order is kept.

    Args:
        path: Prediction CSV file.
        epsilon: Clipping parameter.

    Returns:
        Validated EvaluationSet.

    Raises:
        ParseError: If a row is malformed (carries the line number).
        SchemaError: If the header or class count is inconsistent.
        ConsistencyError: If per-class confidences disagree with conf.
        EmptySetError: If the file has no data rows.

    Example:
        >>> s = parse_predictions("predictions.csv")
        >>> s.n, s.k
        (3, 2)
    """
    records, n_classes = read_records(path)

    lo, hi = epsilon, 1.0 - epsilon
    n_clipped = sum(
        1
        for r in records
        for value in (r.conf, *(r.class_confs or ()))
        if not lo <= value <= hi
    )
    if n_clipped:
        logger.warning(f"Clipped {n_clipped} confidence value(s) in {path} to [{lo}, {hi}]")

    return clip_confidences(records, epsilon=epsilon, k=n_classes or None)


def _format_number(value: float) -> str:
    return repr(float(value))


def format_predictions(eval_set: EvaluationSet) -> str:
    """Render an EvaluationSet in the prediction file format, in input order."""
    with_classes = eval_set.has_class_confs
    header = list(BASE_COLUMNS)
    if with_classes:
        header += [f"{CLASS_CONF_PREFIX}{k}" for k in range(eval_set.k)]

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for record in eval_set.records:
        row = [str(record.true_label), str(record.pred_label), _format_number(record.conf)]
        if with_classes:
            row += [_format_number(c) for c in record.class_confs]
        writer.writerow(row)
    return buffer.getvalue()


def write_predictions(eval_set: EvaluationSet, path: Union[str, Path]) -> Path:
    """
    Write an EvaluationSet as a prediction file, atomically.

    Floats are written with full precision, so reading the file back gives
    the same set.

    Returns:
        The written path.
    """
    target = atomic_write_text(path, format_predictions(eval_set))
    logger.debug(f"Wrote {eval_set.n} prediction(s) to {target}")
    return target


def write_curve(curve: CurveSeries, path: Union[str, Path]) -> Path:
    """
    Write curve points as an ``x,y`` CSV, atomically.

    Returns:
        The written path.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["x", "y"])
    for x, y in curve.points:
        writer.writerow([_format_number(x), _format_number(y)])
    return atomic_write_text(path, buffer.getvalue())
