"""
Command-line interface for calrisk.

Subcommands:
    eval          Evaluate a prediction file (risk, cw metrics, AUC/cwAUC).
    synth         Run the synthetic harness over distributions and modes.
    adversarial   Write a prediction file with tiny ECE and huge CSR.
    calibrate     Fit isotonic or Platt calibration on a split and compare.

Exit codes: 0 on success, 1 on a data error (reported as one JSON object on
stderr), 2 on a usage error.

Example:
    $ calrisk eval --input predictions.csv --format json
    $ calrisk synth --dist all --mode perfect --n 1000 --reps 100
    $ calrisk synth --dist all --mode all --n 1000 --table directions
    $ calrisk adversarial --n 100 --lambda 1000 --out adversarial.csv
    $ calrisk calibrate --input predictions.csv --method isotonic --out calibrated.csv
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import __version__
from .calibrators import DEFAULT_SPLIT, calibrate_holdout
from .metrics import DEFAULT_BINS, adversarial_profile, csr, ece, risk_report
from .models import DEFAULT_EPSILON, CalRiskError
from .parser import parse_predictions, write_curve, write_predictions
from .ranking import cw_roc_curve, macro_auc, roc_curve
from .report import (
    build_report,
    dumps_report,
    render_comparison,
    render_csv,
    render_text,
    rows_to_csv,
)
from .synthetic import (
    DEFAULT_REPS,
    DEFAULT_SEED,
    DISTRIBUTIONS,
    MODES,
    DIFFERENCE_COLUMNS,
    DIRECTION_COLUMNS,
    SUMMARY_COLUMNS,
    SyntheticRunner,
    difference_table,
    direction_counts,
    expand_grid,
    summary_table,
)
from .utils import format_table

logger = logging.getLogger(__name__)


# Environment variable supplying the seed when --seed is absent
SEED_ENV_VAR = "CALRISK_SEED"

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_USAGE_ERROR = 2

# Tables `synth --table` can print: builder and column order
SYNTH_TABLES = {
    "summary": (summary_table, SUMMARY_COLUMNS),
    "diffs": (difference_table, DIFFERENCE_COLUMNS),
    "directions": (direction_counts, DIRECTION_COLUMNS),
}


class UsageError(Exception):
    """Raised for invalid settings that argparse cannot catch."""
    pass


def _int_at_least(minimum: int) -> Callable[[str], int]:
    def convert(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be at least {minimum}, got {value}")
        return value
    return convert


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _open_unit_interval(upper: float) -> Callable[[str], float]:
    def convert(text: str) -> float:
        value = _positive_float(text)
        if not value < upper:
            raise argparse.ArgumentTypeError(f"must be below {upper}, got {value}")
        return value
    return convert


def resolve_seed(seed: Optional[int]) -> int:
    """
    Seed from the flag, else the CALRISK_SEED variable, else DEFAULT_SEED.

    Raises:
        UsageError: If CALRISK_SEED is not a non-negative integer.
    """
    if seed is not None:
        return seed
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return DEFAULT_SEED
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from None
    if value < 0:
        raise UsageError(f"{SEED_ENV_VAR} must be non-negative, got {value}")
    return value


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_eval(args: argparse.Namespace) -> int:
    """Evaluate a prediction file and print the report."""
    eval_set = parse_predictions(args.input, epsilon=args.epsilon)
    document = build_report(
        eval_set,
        m_bins=args.bins,
        provenance={"input": str(args.input), "epsilon": args.epsilon, "m_bins": args.bins},
    )

    if args.roc_out is not None:
        out_dir = Path(args.roc_out)
        for gap in document.auc_per_class:
            write_curve(roc_curve(eval_set, gap.class_id), out_dir / f"class_{gap.class_id}_roc.csv")
            write_curve(cw_roc_curve(eval_set, gap.class_id), out_dir / f"class_{gap.class_id}_cwroc.csv")
        logger.debug(f"Wrote {2 * len(document.auc_per_class)} curve file(s) to {out_dir}")

    if args.format == "json":
        sys.stdout.write(dumps_report(document))
    elif args.format == "csv":
        sys.stdout.write(render_csv(document))
    else:
        sys.stdout.write(render_text(document))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    """Run the synthetic grid and print the selected table."""
    specs = expand_grid(
        args.dist,
        args.mode,
        n=args.n,
        reps=args.reps,
        master_seed=resolve_seed(args.seed),
        m_bins=args.bins,
    )
    runner = SyntheticRunner(workers=args.workers)

    @runner.on_report
    def log_progress(report):
        logger.info(f"{report.distribution}/{report.mode}: mean CSR {report.mean_csr:.4f}")

    build, columns = SYNTH_TABLES[args.table]
    rows = build(runner.run(specs))
    if args.format == "csv":
        sys.stdout.write(rows_to_csv(rows))
    else:
        sys.stdout.write(format_table(rows, columns) + "\n")
    return EXIT_OK


def cmd_adversarial(args: argparse.Namespace) -> int:
    """Write an adversarial prediction file and print its ECE and CSR."""
    seed = resolve_seed(args.seed)
    eval_set = adversarial_profile(
        args.n, args.lam, args.bins, epsilon=args.epsilon, seed=seed
    )
    write_predictions(eval_set, args.out)
    _print_json({
        "n": eval_set.n,
        "lambda": args.lam,
        "m_bins": args.bins,
        "seed": seed,
        "ece": ece(eval_set, args.bins),
        "csr": csr(eval_set),
        "out": str(args.out),
    })
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    """Calibrate a binary prediction file on a split and compare to raw."""
    seed = resolve_seed(args.seed)
    eval_set = parse_predictions(args.input, epsilon=args.epsilon)
    result = calibrate_holdout(eval_set, args.method, fraction=args.split, seed=seed)
    write_predictions(result.calibrated, args.out)

    risks = {
        "raw": risk_report(result.raw, args.bins),
        args.method: risk_report(result.calibrated, args.bins),
    }
    aucs = {}
    for regime, split in (("raw", result.raw), (args.method, result.calibrated)):
        macro = macro_auc(split)
        aucs[regime] = macro.auc_macro if macro is not None else None

    if args.format == "json":
        _print_json({
            "method": args.method,
            "seed": seed,
            "split": args.split,
            "fit_n": result.fit_set.n,
            "eval_n": result.raw.n,
            "risk": {regime: risk.to_dict() for regime, risk in risks.items()},
            "auc_macro": aucs,
            "out": str(args.out),
        })
    else:
        sys.stdout.write(render_comparison(risks, aucs))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with all subcommands."""
    parser = argparse.ArgumentParser(prog="calrisk", description="Calibration risk metrics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    epsilon = _open_unit_interval(0.5)
    bins = _int_at_least(1)

    p_eval = sub.add_parser("eval", help="Evaluate a prediction file.")
    p_eval.add_argument("--input", required=True, type=Path)
    p_eval.add_argument("--bins", type=bins, default=DEFAULT_BINS)
    p_eval.add_argument("--epsilon", type=epsilon, default=DEFAULT_EPSILON)
    p_eval.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p_eval.add_argument("--roc-out", type=Path, default=None,
                        help="Directory for class_<k>_{roc,cwroc}.csv curve files.")
    p_eval.set_defaults(handler=cmd_eval)

    p_synth = sub.add_parser("synth", help="Run the synthetic harness.")
    p_synth.add_argument("--dist", choices=("all", *DISTRIBUTIONS), required=True)
    p_synth.add_argument("--mode", choices=("all", *MODES), required=True)
    p_synth.add_argument("--n", type=_int_at_least(1), required=True)
    p_synth.add_argument("--reps", type=_int_at_least(1), default=DEFAULT_REPS)
    p_synth.add_argument("--seed", type=_int_at_least(0), default=None)
    p_synth.add_argument("--bins", type=bins, default=DEFAULT_BINS)
    p_synth.add_argument("--format", choices=("text", "csv"), default="text")
    p_synth.add_argument("--table", choices=tuple(SYNTH_TABLES), default="summary",
                         help="summary: all means; diffs: weighted minus unweighted; "
                              "directions: cwAUC vs AUC counts per mode.")
    p_synth.add_argument("--workers", type=_int_at_least(1), default=1)
    p_synth.set_defaults(handler=cmd_synth)

    p_adv = sub.add_parser("adversarial", help="Write a low-ECE, high-CSR prediction file.")
    p_adv.add_argument("--n", type=_int_at_least(2), required=True)
    p_adv.add_argument("--lambda", dest="lam", type=_positive_float, required=True)
    p_adv.add_argument("--bins", type=bins, default=DEFAULT_BINS)
    p_adv.add_argument("--out", type=Path, required=True)
    p_adv.add_argument("--seed", type=_int_at_least(0), default=None)
    p_adv.add_argument("--epsilon", type=epsilon, default=DEFAULT_EPSILON)
    p_adv.set_defaults(handler=cmd_adversarial)

    p_cal = sub.add_parser("calibrate", help="Compare raw and calibrated predictions.")
    p_cal.add_argument("--input", required=True, type=Path)
    p_cal.add_argument("--method", choices=("isotonic", "platt"), required=True)
    p_cal.add_argument("--split", type=_open_unit_interval(1.0), default=DEFAULT_SPLIT)
    p_cal.add_argument("--seed", type=_int_at_least(0), default=None)
    p_cal.add_argument("--out", type=Path, required=True)
    p_cal.add_argument("--bins", type=bins, default=DEFAULT_BINS)
    p_cal.add_argument("--epsilon", type=epsilon, default=DEFAULT_EPSILON)
    p_cal.add_argument("--format", choices=("text", "json"), default="text")
    p_cal.set_defaults(handler=cmd_calibrate)

    return parser


def _report_error(error: Exception) -> None:
    payload = {
        "error": type(error).__name__,
        "message": str(error),
        "line": getattr(error, "line", None),
    }
    max_lambda = getattr(error, "max_lambda", None)
    if max_lambda is not None:
        payload["max_lambda"] = max_lambda
    sys.stderr.write(json.dumps(payload) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the command line.

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:].

    Returns:
        Process exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        return args.handler(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"calrisk: error: {e}\n")
        return EXIT_USAGE_ERROR
    except (CalRiskError, OSError) as e:
        logger.debug(f"{args.command} failed", exc_info=True)
        _report_error(e)
        return EXIT_DATA_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
