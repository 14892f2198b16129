"""Command-line interface.

Exit codes: 0 success, 1 data error, 2 estimation error, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

from .decomposition import ALL_METHODS, EFFECTS, EffectEstimates, Method, decompose, group_mean_difference
from .errors import DataError, EstimationError
from .ingest import QUANTILES, ColumnSpec, build_dataset, load_csv
from .simulation import SimulationDesign, run_monte_carlo

EXIT_DATA = 1
EXIT_ESTIMATION = 2
EXIT_USAGE = 64

FULL_REPS = 10000


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="endomed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="{simulate,decompose,table4}")

    sim = sub.add_parser("simulate", help="Monte Carlo study of the four estimators")
    sim.add_argument("--outcome", choices=["cont", "bin", "continuous", "binary"], default="cont")
    sim.add_argument("--mediator", choices=["exo", "endo", "exogenous", "endogenous"], default="endo")
    sim.add_argument("--n", type=int, default=4000)
    sim.add_argument("--reps", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--full-reps", action="store_true", help=f"use {FULL_REPS} replications")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--csv", help="also write the report as CSV to this path")

    dec = sub.add_parser("decompose", help="decompose effects on a CSV dataset")
    _data_args(dec)
    dec.add_argument("--p", type=float, help="quantile for binarising mediator/instrument sources")
    dec.add_argument("--method", choices=[m.value for m in Method], default="ive1")
    dec.add_argument("--j", type=int, choices=[1, 2, 3], help="score polynomial order (ive2/ive3)")

    t4 = sub.add_parser("table4", help="all quantiles x all methods on a CSV dataset")
    _data_args(t4)
    return parser


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV file")
    p.add_argument("--spec", help="JSON column spec (defaults to the test-score layout)")
    p.add_argument("--csv", help="also write results as CSV to this path")


def _load(args):
    spec = ColumnSpec.from_json(args.spec) if args.spec else ColumnSpec()
    return load_csv(args.data, spec)


def format_estimates(res: EffectEstimates) -> str:
    lines = [f"{'method':<7}{'effect':<10}{'estimate':>12}{'se':>12}{'t-value':>10}"]
    for name in EFFECTS:
        e = res[name]
        lines.append(
            f"{res.estimator_tag.label:<7}{name:<10}{e.estimate:>12.4f}{e.se:>12.4f}{e.t_value:>10.2f}"
        )
    return "\n".join(lines) + "\n"


def _write_rows(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def _cmd_simulate(args) -> int:
    reps = FULL_REPS if args.full_reps else args.reps
    design = SimulationDesign(
        outcome_form=args.outcome, mediator_mode=args.mediator, n=args.n, reps=reps, seed=args.seed
    )
    report = run_monte_carlo(design, workers=max(1, args.workers))
    sys.stdout.write(report.to_text())
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    return 0


def _cmd_decompose(args) -> int:
    table = _load(args)
    data = build_dataset(table, args.p)
    res = decompose(data, args.method, args.j)
    out = io.StringIO()
    out.write(f"N={data.n} (dropped {table.dropped})")
    if args.p is not None:
        out.write(f", p={args.p}")
    if res.j is not None:
        out.write(f", J={res.j}")
    out.write("\n")
    out.write(format_estimates(res))
    sys.stdout.write(out.getvalue())
    if args.csv:
        _write_rows(args.csv, res.as_rows())
    return 0


def table4(table, quantiles=QUANTILES, methods=ALL_METHODS) -> dict:
    """Estimates for every ``(p, method)`` pair."""
    return {
        (p, m): decompose(build_dataset(table, p), m) for p in quantiles for m in methods
    }


def format_table4(results: dict, gmd: float, n: int, quantiles=QUANTILES, methods=ALL_METHODS) -> str:
    head = f"{'p':<5}{'effect':<10}" + "".join(f"{m.label:>18}" for m in methods)
    lines = [f"Effects (t-values), N={n}; group mean difference {gmd:.4f}", head]
    for p in quantiles:
        for k, name in enumerate(EFFECTS):
            cells = []
            for m in methods:
                e = results[(p, m)][name]
                cells.append(f"{e.estimate:.3f} ({e.t_value:.2f})".rjust(18))
            label = f"{p:<5}" if k == 0 else " " * 5
            lines.append(f"{label}{name:<10}" + "".join(cells))
    return "\n".join(lines) + "\n"


def _cmd_table4(args) -> int:
    table = _load(args)
    results = table4(table)
    gmd = group_mean_difference(build_dataset(table, QUANTILES[0]))
    sys.stdout.write(format_table4(results, gmd, table.n))
    if args.csv:
        rows = []
        for (p, _), res in results.items():
            for row in res.as_rows():
                rows.append({"p": p, **row})
        _write_rows(args.csv, rows)
    return 0


COMMANDS = {"simulate": _cmd_simulate, "decompose": _cmd_decompose, "table4": _cmd_table4}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except ValueError as exc:
        # design/spec validation from user-supplied values
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
