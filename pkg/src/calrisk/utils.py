"""
Utility functions for presenting and persisting calrisk results.

This module provides helpers for number formatting, plain-text tables
and whole-file atomic writes.
"""

import os
import tempfile
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union


# Placeholder shown for undefined values
UNDEFINED = "n/a"

# Columns rendered as percentages in text tables
PERCENT_COLUMNS = frozenset({"P_risk", ">1σ", ">3σ", "AUC gain"})


def format_float(value: Optional[float], precision: int = 4) -> str:
    """
    Format a number for display.

    Args:
        value: Number to format, or None.
        precision: Decimal places to show.

    Returns:
        Fixed-point string, or "n/a" for None.

    Example:
        >>> format_float(0.99931)
        '0.9993'
        >>> format_float(None)
        'n/a'
    """
    if value is None:
        return UNDEFINED
    return f"{value:.{precision}f}"


def format_percent(value: Optional[float], precision: int = 2) -> str:
    """
    Format a fraction as a percentage.

    Example:
        >>> format_percent(1.0)
        '100.00%'
    """
    if value is None:
        return UNDEFINED
    return f"{value * 100:.{precision}f}%"


def format_cell(column: str, value: object) -> str:
    """Format one table cell according to its column."""
    if value is None:
        return UNDEFINED
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        if column in PERCENT_COLUMNS:
            return format_percent(value)
        return format_float(value)
    return str(value)


def format_table(rows: Sequence[Mapping[str, object]], columns: Optional[Sequence[str]] = None) -> str:
    """
    Render rows as a left-aligned plain-text table.

    Args:
        rows: Row dictionaries.
        columns: Column order. Defaults to the keys of the first row.

    Returns:
        Table text with a header line, a rule, and one line per row.

    Example:
        >>> print(format_table([{"CSR": 1.0, "P_risk": 0.5}]))
        CSR     P_risk
        ------  ------
        1.0000  50.00%
    """
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    cells: List[List[str]] = [[format_cell(c, row.get(c)) for c in columns] for row in rows]
    widths = [
        max([len(c)] + [len(line[i]) for line in cells]) for i, c in enumerate(columns)
    ]

    def render(values: Sequence[str]) -> str:
        return "  ".join(v.ljust(w) for v, w in zip(values, widths)).rstrip()

    lines = [render(columns), render(["-" * w for w in widths])]
    lines.extend(render(line) for line in cells)
    return "\n".join(lines)


def format_key_values(values: Dict[str, object]) -> str:
    """Render a mapping as aligned "key: value" lines."""
    width = max((len(k) for k in values), default=0)
    return "\n".join(f"{k.ljust(width)}  {format_cell(k, v)}" for k, v in values.items())


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """
    Write text to a file in one step.

    The content goes to a temporary file in the target directory which then
    replaces the target, so readers never see a partial file.

    Args:
        path: Destination file.
        text: Content, written as UTF-8.

    Returns:
        The destination path.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, target)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return target
