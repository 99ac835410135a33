"""Command-line interface.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import secrets
import sys
from typing import Optional, Sequence

from . import __version__
from .bootstrap_ci import CiRequest, TwoSampleData, diff_quantile_ci, quantile_ci
from .data_io import InputSpec, SampleParseError, read_sample, write_report
from .index_distribution import binomial_index_pmf, max_abs_pmf_diff, simulate_index_pmf
from .quantile_core import sort_sample
from .rng import RandomSource
from .simulation import CoverageConfig, approximation_study, bench_compare, coverage_simulation

log = logging.getLogger("pbquantile")

EXIT_CODES = "exit codes: 0 success, 1 runtime or I/O error, 2 usage error"
DEFAULT_FAST_B = 100_000
DEFAULT_CLASSIC_B = 10_000


class _Formatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    pass


def _open_unit(name: str):
    def parse(text: str) -> float:
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number in (0, 1), got {text!r}")
        if not 0.0 < value < 1.0:
            raise argparse.ArgumentTypeError(f"{name} must lie strictly inside (0, 1), got {text}")
        return value
    parse.__name__ = name
    return parse


def _q_list(text: str) -> list[float]:
    parse = _open_unit("q")
    return [parse(t) for t in text.split(",") if t.strip()]


def _positive_int(text: str) -> int:
    try:
        value = int(text.replace("_", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _int_list(text: str) -> list[int]:
    return [_positive_int(t) for t in text.split(",") if t.strip()]


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text!r}")
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, 2^64), got {text}")
    return value


def _column(text: str):
    return int(text) if text.isdigit() else text


def _common(p: argparse.ArgumentParser, *, fmt_default: str = "json") -> None:
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=_seed, default=None,
                   help="RNG seed; a random one is drawn and echoed when omitted")
    g.add_argument("--format", choices=("json", "table"), default=fmt_default,
                   help="report format")
    g.add_argument("--output", default="-", help="output path, '-' for stdout")
    g.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                   help="worker threads (results do not depend on it)")


def _input_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input-format", choices=("lines", "csv"), default="lines",
                   help="one number per line, or a CSV column")
    p.add_argument("--column", type=_column, default=None,
                   help="CSV column name or 0-based index (csv input only)")
    p.add_argument("--no-header", action="store_true",
                   help="CSV input has no header row")


def _ci_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q", type=_open_unit("q"), required=True, help="quantile in (0, 1)")
    p.add_argument("--alpha", type=_open_unit("alpha"), default=0.05,
                   help="two-sided level is 1 - alpha")
    p.add_argument("--method", choices=("fast", "classic"), default="fast",
                   help="fast (resampling-free) or classic Poisson bootstrap")
    p.add_argument("--bootstrap", type=_positive_int, default=None,
                   help=f"bootstrap replications B (default {DEFAULT_FAST_B} fast two-sample, "
                        f"{DEFAULT_CLASSIC_B} classic; unused by fast one-sample)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbquantile", formatter_class=_Formatter, epilog=EXIT_CODES,
        description="Poisson-bootstrap confidence intervals for quantiles, resampling-free.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    ci = sub.add_parser("ci", help="confidence intervals", formatter_class=_Formatter,
                        epilog=EXIT_CODES)
    ci_sub = ci.add_subparsers(dest="ci_command", required=True, metavar="KIND")

    p = ci_sub.add_parser("quantile", help="CI for one quantile", formatter_class=_Formatter,
                          epilog=EXIT_CODES)
    p.add_argument("--input", required=True, help="sample file, '-' for stdin")
    _input_opts(p)
    _ci_opts(p)
    _common(p)
    p.set_defaults(handler=cmd_ci_quantile)

    p = ci_sub.add_parser("diff-quantile", help="CI for treatment minus control quantile",
                          formatter_class=_Formatter, epilog=EXIT_CODES)
    p.add_argument("--treatment", required=True, help="treatment sample file")
    p.add_argument("--control", required=True, help="control sample file")
    _input_opts(p)
    _ci_opts(p)
    _common(p)
    p.set_defaults(handler=cmd_ci_diff_quantile)

    st = sub.add_parser("study", help="Monte Carlo studies", formatter_class=_Formatter,
                        epilog=EXIT_CODES)
    st_sub = st.add_subparsers(dest="study", required=True, metavar="STUDY")

    p = st_sub.add_parser("index-dist", help="simulated vs binomial index distribution",
                          formatter_class=_Formatter, epilog=EXIT_CODES)
    p.add_argument("--n", type=_positive_int, required=True, help="sample size N")
    p.add_argument("--q", type=_open_unit("q"), required=True, help="quantile in (0, 1)")
    p.add_argument("--bootstrap", type=_positive_int, default=1_000_000,
                   help="Poisson bootstrap replications")
    p.add_argument("--engine", choices=("auto", "literal", "order_statistic"), default="auto",
                   help="simulation engine")
    _common(p)
    p.set_defaults(handler=cmd_study, study_name="index-dist")

    p = st_sub.add_parser("coverage", help="coverage of the fast intervals",
                          formatter_class=_Formatter, epilog=EXIT_CODES)
    p.add_argument("--mode", choices=("one-sample", "two-sample"), default="one-sample")
    p.add_argument("--n", type=_positive_int, default=10_000, help="sample size per group")
    p.add_argument("--replications", type=_positive_int, default=2000,
                   help="Monte Carlo replications R")
    p.add_argument("--bootstrap", type=_positive_int, default=10_000,
                   help="bootstrap draws B (two-sample only)")
    p.add_argument("--q", type=_q_list, default=[0.01, 0.1, 0.25, 0.5],
                   help="comma-separated quantiles")
    p.add_argument("--alpha", type=_open_unit("alpha"), default=0.05)
    _common(p)
    p.set_defaults(handler=cmd_study, study_name="coverage")

    p = st_sub.add_parser("approx-table", help="grid of max |empirical - binomial| pmf gaps",
                          formatter_class=_Formatter, epilog=EXIT_CODES)
    p.add_argument("--n", type=_int_list, default=[100, 500, 2000],
                   help="comma-separated sample sizes")
    p.add_argument("--q", type=_q_list, default=[0.01, 0.1, 0.25, 0.5],
                   help="comma-separated quantiles")
    p.add_argument("--bootstrap", type=_positive_int, default=1_000_000,
                   help="Poisson bootstrap replications per cell")
    p.add_argument("--engine", choices=("auto", "literal", "order_statistic"), default="auto")
    _common(p, fmt_default="table")
    p.set_defaults(handler=cmd_study, study_name="approx-table")

    p = sub.add_parser("bench", help="time classic vs fast two-sample intervals",
                       formatter_class=_Formatter, epilog=EXIT_CODES)
    p.add_argument("--n", type=_positive_int, default=1000, help="sample size per group")
    p.add_argument("--bootstrap", type=_positive_int, default=10_000, help="replications B")
    p.add_argument("--evaluations", type=_positive_int, default=100,
                   help="timed evaluations per method")
    p.add_argument("--q", type=_open_unit("q"), default=0.5)
    p.add_argument("--no-memory", action="store_true", help="skip the tracemalloc run")
    _common(p)
    p.set_defaults(handler=cmd_bench)
    return parser


def _resolve_seed(args: argparse.Namespace) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        log.info("using seed %d", args.seed)
    return args.seed


def _input_spec(args: argparse.Namespace, path: str, parser) -> InputSpec:
    if args.input_format == "csv" and args.column is None:
        parser.error("--column is required with --input-format csv")
    if args.input_format == "lines" and args.column is not None:
        parser.error("--column only applies to --input-format csv")
    try:
        return InputSpec(path, args.input_format, args.column, not args.no_header)
    except ValueError as exc:
        parser.error(str(exc))


def _request(args: argparse.Namespace, two_sample: bool) -> CiRequest:
    b = args.bootstrap
    if b is None:
        b = DEFAULT_FAST_B if (two_sample and args.method == "fast") else DEFAULT_CLASSIC_B
    return CiRequest(args.q, args.alpha, b, args.method, _resolve_seed(args))


def cmd_ci_quantile(args, parser) -> None:
    spec = _input_spec(args, args.input, parser)
    req = _request(args, two_sample=False)
    sample = sort_sample(read_sample(spec).values)
    kw = {} if req.method == "fast" else {"threads": args.threads}
    write_report(quantile_ci(sample, req, **kw), args.format, args.output)


def cmd_ci_diff_quantile(args, parser) -> None:
    spec_t = _input_spec(args, args.treatment, parser)
    spec_c = _input_spec(args, args.control, parser)
    req = _request(args, two_sample=True)
    data = TwoSampleData(sort_sample(read_sample(spec_t).values),
                         sort_sample(read_sample(spec_c).values))
    kw = {} if req.method == "fast" else {"threads": args.threads}
    write_report(diff_quantile_ci(data, req, **kw), args.format, args.output)


class _IndexDistReport:
    def __init__(self, n, q, replications, seed, empirical, binomial):
        self.n, self.q, self.replications, self.seed = n, q, replications, seed
        self.empirical, self.binomial = empirical, binomial
        self.max_abs_diff = max_abs_pmf_diff(empirical, binomial)

    def to_dict(self) -> dict:
        return {"n": self.n, "q": self.q, "replications": self.replications, "seed": self.seed,
                "max_abs_diff": self.max_abs_diff, "empirical": self.empirical.to_dict(),
                "binomial": self.binomial.to_dict()}

    def table(self):
        rows = [[i, f"{self.empirical.prob(i):.6f}", f"{self.binomial.prob(i):.6f}"]
                for i in range(0, self.n + 2)
                if self.empirical.prob(i) > 0 or self.binomial.prob(i) >= 1e-6]
        return ["index", "empirical", "binomial"], rows


def cmd_study(args, parser) -> None:
    seed = _resolve_seed(args)
    name = args.study_name
    if name == "index-dist":
        emp = simulate_index_pmf(args.n, args.q, args.bootstrap, RandomSource(seed),
                                 engine=args.engine, threads=args.threads)
        report = _IndexDistReport(args.n, args.q, args.bootstrap, seed, emp,
                                  binomial_index_pmf(args.n, args.q))
    elif name == "coverage":
        cfg = CoverageConfig(args.n, args.replications, args.bootstrap, tuple(args.q),
                             args.alpha, "standard_normal", args.mode.replace("-", "_"), seed)
        report = coverage_simulation(cfg, threads=args.threads)
    elif name == "approx-table":
        report = approximation_study(args.n, args.q, args.bootstrap, RandomSource(seed),
                                     engine=args.engine, threads=args.threads)
    else:  # pragma: no cover - argparse restricts choices
        parser.error(f"unknown study {name!r}")
    write_report(report, args.format, args.output)


def cmd_bench(args, parser) -> None:
    report = bench_compare(args.n, args.bootstrap, args.evaluations, _resolve_seed(args),
                           q=args.q, measure_memory=not args.no_memory)
    write_report(report, args.format, args.output)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.handler(args, parser)
    except (OSError, SampleParseError, ValueError) as exc:
        print(f"pbquantile: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
