"""``realcheck`` command-line interface.

Exit codes: 0 success / realistic, 1 usage error, 2 data error,
3 not realistic, 4 a requested score is undefined for the input.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys

from . import __version__
from .classification import SCORE_KINDS
from .errors import RealcheckError, UsageError
from .io_report import (
    atomic_open,
    build_classification_report,
    build_regression_report,
    read_classification,
    read_regression,
    write_dataset,
    write_report,
)
from .regression import REALISTIC, nll_grid
from .simulator import (
    CLASSIFICATION_KINDS,
    REGRESSION_KINDS,
    ClassificationRegime,
    RegressionRegime,
    gen_classification,
    gen_regression,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_UNREALISTIC, EXIT_UNDEFINED = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _range(text):
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}")
    try:
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _check_output(args):
    if args.format == "csv_bundle" and args.out is None:
        raise UsageError("--format csv_bundle needs --out DIR")


def cmd_regression_realism(args) -> int:
    _check_output(args)
    data = read_regression(args.input)
    report = build_regression_report(
        data,
        alpha=args.alpha,
        score=args.score,
        bins=args.bins,
        quantile=args.quantile,
        error_mode=args.error_mode,
        rescale_msample=args.rescale_msample,
        loo_msample=args.loo_msample,
    )
    write_report(report, args.out, args.format)
    t = report.test
    print(f"M_gt vs {t['reference']}: KS={t['statistic']:.6g} p={t['p_value']:.6g} -> {t['verdict']}",
          file=sys.stderr)
    return EXIT_OK if report.verdict == REALISTIC else EXIT_UNREALISTIC


def cmd_classification_auc(args) -> int:
    _check_output(args)
    kinds = SCORE_KINDS if args.score == "all" else (args.score,)
    data = read_classification(args.input)
    report = build_classification_report(
        data, scores=kinds, reject=args.reject, per_sample_winner=args.per_sample_winner
    )
    write_report(report, args.out, args.format)
    for k, e in report.scores.items():
        print(f"{k}: AUROC={e['auroc']:.6f} AUPRC={e['auprc']:.6f}", file=sys.stderr)
    if report.undefined:
        for k, u in report.undefined.items():
            print(f"{k}: undefined ({u['records']} record(s) affected): {u['reason']}", file=sys.stderr)
        return EXIT_UNDEFINED
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.task == "regression":
        if args.regime not in REGRESSION_KINDS:
            raise UsageError(f"regression regimes: {', '.join(REGRESSION_KINDS)}")
        regime = RegressionRegime(
            kind=args.regime, d=args.d, k=args.k, n=args.n, seed=args.seed,
            scale=args.scale, nu=args.nu, bias=args.bias or (),
        )
        regime.validate()
        data = gen_regression(regime)
    else:
        if args.regime not in CLASSIFICATION_KINDS:
            raise UsageError(f"classification regimes: {', '.join(CLASSIFICATION_KINDS)}")
        regime = ClassificationRegime(kind=args.regime, c=args.c, k=args.k, n=args.n, seed=args.seed)
        regime.validate()
        data = gen_classification(regime)
    write_dataset(data, args.out)
    return EXIT_OK


def cmd_nll_grid(args) -> int:
    grid = nll_grid(args.err_range, args.sigma_range, args.steps)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["err", "sigma", "nll", "realism"])
    w.writerows(grid.tolist())
    if args.out is None:
        sys.stdout.write(buf.getvalue())
    else:
        with atomic_open(args.out) as fh:
            fh.write(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="realcheck", description="Uncertainty-realism checks for probabilistic predictions.")
    p.add_argument("--version", action="version", version=f"realcheck {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("regression-realism", help="chi-square realism test of regression uncertainties")
    r.add_argument("--input", required=True)
    r.add_argument("--alpha", type=float, default=0.01)
    r.add_argument("--score", choices=("det", "maxdiag"), default="det")
    r.add_argument("--bins", type=int, default=10)
    r.add_argument("--quantile", type=float, default=0.99)
    r.add_argument("--error-mode", choices=("norm", "component"), default="norm",
                   help="error scalar for the monotonicity table")
    r.add_argument("--out")
    r.add_argument("--format", choices=("json", "csv_bundle"), default="json")
    r.add_argument("--rescale-msample", action="store_true")
    r.add_argument("--loo-msample", action="store_true")
    r.set_defaults(func=cmd_regression_realism)

    c = sub.add_parser("classification-auc", help="AUROC/AUPRC of classification uncertainty scores")
    c.add_argument("--input", required=True)
    c.add_argument("--score", choices=SCORE_KINDS + ("all",), default="all")
    c.add_argument("--reject", action="store_true", help="add the Youden rejection report")
    c.add_argument("--per-sample-winner", action="store_true",
                   help="win_var uses each sample's own top class")
    c.add_argument("--out")
    c.add_argument("--format", choices=("json", "csv_bundle"), default="json")
    c.set_defaults(func=cmd_classification_auc)

    s = sub.add_parser("simulate", help="write a seeded synthetic dataset")
    s.add_argument("--task", choices=("regression", "classification"), required=True)
    s.add_argument("--regime", required=True)
    s.add_argument("--d", type=int, default=4)
    s.add_argument("--k", type=int, default=50)
    s.add_argument("--n", type=int, default=10000)
    s.add_argument("--c", type=int, default=19)
    s.add_argument("--nu", type=float, default=3.0)
    s.add_argument("--scale", type=float, default=1.0)
    s.add_argument("--bias", type=_floats)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("nll-grid", help="Gaussian NLL and realism over an (err, sigma) grid")
    g.add_argument("--err-range", type=_range, required=True)
    g.add_argument("--sigma-range", type=_range, required=True)
    g.add_argument("--steps", type=int, required=True)
    g.add_argument("--out")
    g.set_defaults(func=cmd_nll_grid)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RealcheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
