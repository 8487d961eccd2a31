"""Command-line entry point.

    bpassoc [sweep] --rows 2 --cols 3 --spacing 3 --pd 0.6 --trials 200 --out res.csv
    bpassoc solve weights.txt [--alg bp|oracle|cd:N]
    bpassoc summarize res.csv

Exit status is 0 on success, 1 on a configuration or input error and 2 when
any trial failed.
"""

from __future__ import annotations

import argparse
import csv
import sys

from . import bench
from .bp import solve
from .corrdecay import cd_beliefs
from .errors import AssociationError, ConfigError, ParseError
from .exact import exact_marginals
from .model import read_weight_matrix

EXIT_OK, EXIT_CONFIG, EXIT_TRIAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments, which would collide with "trial failed"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def sweep_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bpassoc sweep", description="Monte Carlo sweep over grid scenarios.")
    p.add_argument("--rows", type=int, default=2)
    p.add_argument("--cols", type=int, default=3)
    p.add_argument("--spacing", type=_floats, default=[3.0], help="comma list of grid spacings")
    p.add_argument("--pd", type=_floats, default=[0.6], help="comma list of detection probabilities")
    p.add_argument("--lambda", dest="lambda_fa", type=_floats, default=[0.01], help="comma list of clutter densities")
    p.add_argument("--rnoise", type=_floats, default=[1.0], help="comma list of measurement noise variances")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algs", type=_names, default=["bp", "oracle"], help="e.g. bp,cd:3,cd:5,oracle")
    p.add_argument("--bp-delta", type=float, default=1e-3)
    p.add_argument("--bp-check-interval", type=int, default=10)
    p.add_argument("--gate-exclusion", type=float, default=1e-4)
    p.add_argument("--preinit-steps", type=int, default=30)
    p.add_argument("--q", type=float, default=0.01)
    p.add_argument("--oracle-budget", type=int, default=bench.DEFAULT_EVENT_BUDGET)
    p.add_argument("--out", default="results.csv")
    p.add_argument("--per-trial", action="store_true", help="also write <out>.trials.csv")
    p.add_argument("--parallel", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--no-timing", action="store_true", help="blank the timing columns so reruns are byte-identical")
    p.add_argument("--quiet", action="store_true")
    return p


def run_sweep_cli(argv) -> int:
    args = sweep_parser().parse_args(argv)
    config = bench.SweepConfig(
        rows=args.rows, cols=args.cols, spacings=args.spacing, p_d=args.pd,
        lambda_fa=args.lambda_fa, r_meas=args.rnoise, trials=args.trials, seed=args.seed,
        algorithms=args.algs, bp_delta=args.bp_delta, bp_check_interval=args.bp_check_interval,
        gate_exclusion=args.gate_exclusion, preinit_steps=args.preinit_steps, q=args.q,
        oracle_budget=args.oracle_budget, timing=not args.no_timing,
    )  # fmt: skip
    if args.parallel is not None and args.parallel < 1:
        raise ConfigError("--parallel must be >= 1")
    config.validate()
    summary, records = bench.run_sweep(config, args.out, per_trial=args.per_trial, parallel=args.parallel)
    if not args.quiet:
        print(bench.format_summary(summary))
    failed = [r for r in records if not r.ok]
    if failed:
        first = failed[0]
        print(
            f"{len(failed)} trial run(s) failed; first: combo {first.combo} trial {first.trial} "
            f"{first.algorithm}: {first.status}",
            file=sys.stderr,
        )
        return EXIT_TRIAL
    return EXIT_OK


def run_solve_cli(argv) -> int:
    p = _Parser(prog="bpassoc solve", description="Association marginals for a weight-matrix file.")
    p.add_argument("file")
    p.add_argument("--alg", default="bp", help="bp, oracle or cd:N")
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--check-interval", type=int, default=10)
    args = p.parse_args(argv)
    with open(args.file, encoding="utf-8") as fh:
        w = read_weight_matrix(fh.read())
    alg = bench.Algorithm.parse(args.alg)
    if alg.name == "bp":
        beliefs, _ = solve(w, args.delta, args.check_interval)
    elif alg.name == "cd":
        beliefs = cd_beliefs(w, alg.depth)
    else:
        beliefs = exact_marginals(w)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["side", "index", "assoc", "probability"])
    for i, row in enumerate(beliefs.target_marginals, start=1):
        for a, p_ in enumerate(row):
            out.writerow(["target", i, a, repr(float(p_))])
    for j, row in enumerate(beliefs.measurement_marginals, start=1):
        for b, p_ in enumerate(row):
            out.writerow(["measurement", j, b, repr(float(p_))])
    return EXIT_OK


def run_summarize_cli(argv) -> int:
    p = _Parser(prog="bpassoc summarize", description="Summary table for a results file.")
    p.add_argument("file")
    args = p.parse_args(argv)
    print(bench.format_summary(bench.summarize(args.file)))
    return EXIT_OK


COMMANDS = {"sweep": run_sweep_cli, "solve": run_solve_cli, "summarize": run_summarize_cli}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in COMMANDS:
        command, rest = COMMANDS[argv[0]], argv[1:]
    elif argv and argv[0] in ("-h", "--help"):
        print(__doc__.strip())
        return EXIT_OK
    else:
        command, rest = run_sweep_cli, argv
    try:
        return command(rest)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    except (ConfigError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssociationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
