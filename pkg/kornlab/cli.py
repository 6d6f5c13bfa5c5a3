"""The ``kornlab`` command line interface.

Three subcommands share one validated `RunConfig`:

* ``verify-identities`` runs the identity suite,
* ``estimate`` computes one constant and optionally compares against the dense oracle,
* ``sweep`` repeats ``estimate`` along a grid, exponent, dimension or face-set axis.

Settings come from built-in defaults, then an optional ``--config`` file, then the flags.
Exit codes are 0 on success, 1 when a check failed and 2 for usage or configuration errors.
"""
import argparse
import logging
import pathlib
import re
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas
from pydantic import ValidationError

import kornlab
from kornlab import identities, oracle
from kornlab.estimation import estimators
from kornlab.estimation.estimators import Inequality
from kornlab.estimation.exceptions import EstimatorError
from kornlab.reports import (
    Command,
    IdentityRecord,
    KernelCheck,
    OracleComparison,
    ReportFile,
    RunConfig,
    SweepAxis,
    SweepRow,
    merge_settings,
    parse_config_file,
)
from kornlab.utils import get_worker_count

__all__ = (
    "build_parser",
    "cmd_estimate",
    "cmd_sweep",
    "cmd_verify_identities",
    "EXIT_FAILED",
    "EXIT_OK",
    "EXIT_USAGE",
    "main",
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

FACE_TOKEN = re.compile(r"^[-−]x\d")
"""A face label or face set that starts with a minus sign, such as ``-x1`` or ``-x1,+x2``."""

ORACLE_RTOL = 1e-6
SWEEP_COLUMNS = ["h", "constant_estimate", "quotient_value", "value", "status"]
FLAG_FIELDS = (
    "seed",
    "out",
    "dims",
    "inequality",
    "dim",
    "p",
    "grid",
    "extents",
    "gamma",
    "oracle",
    "max_iter",
    "tol_rel",
    "n_starts",
    "axis",
    "csv",
)
"""`RunConfig` fields that can be set by a flag."""

Outcome = Tuple[ReportFile, int, Optional[pandas.DataFrame]]


def _elapsed_ms(start: float) -> float:
    return round((time.perf_counter() - start) * 1000, 3)


def cmd_verify_identities(config: RunConfig) -> Outcome:
    """Runs the identity suite for ``config.dims``; fails if any identity exceeds its tolerance."""
    start = time.perf_counter()
    results = identities.verify_identities(config.dims, seed=config.seed)
    records = [
        IdentityRecord(
            name=r.name,
            dim=r.dim,
            residual=r.residual,
            tolerance=r.tolerance,
            samples=r.samples,
            passed=r.passed,
        )
        for r in results
    ]
    failed = [r for r in records if not r.passed]
    for r in failed:
        print(
            f"kornlab: identity {r.name} failed in n={r.dim}: residual {r.residual:.3e} > {r.tolerance:.1e}",
            file=sys.stderr,
        )
    status = "ok" if not failed else "failed: " + ",".join(sorted({r.name for r in failed}))
    report = ReportFile(
        version=kornlab.__version__,
        config=config,
        status=status,
        identities=records,
        timings_ms={"identities": _elapsed_ms(start)},
    )
    return report, EXIT_FAILED if failed else EXIT_OK, None


def _compare_with_oracle(
    cfg: estimators.EstimatorConfig, lambda_min: float
) -> Tuple[OracleComparison, KernelCheck]:
    problem = estimators.build_problem(cfg)
    stiffness, mass = oracle.assemble_problem(problem)
    spectrum = oracle.full_spectrum(stiffness, mass)
    reference = float(spectrum.eigenvalues[0])
    comparison = OracleComparison(
        lambda_min=reference,
        relative_deviation=abs(lambda_min - reference) / abs(reference),
        dimension=stiffness.dimension,
        sweeps=spectrum.sweeps,
        max_residual=float(np.max(spectrum.residuals)),
    )
    kernel = KernelCheck(
        kernel_dimension=oracle.kernel_dimension(spectrum.eigenvalues), rel_tol=1e-10, expected=0
    )
    return comparison, kernel


def cmd_estimate(config: RunConfig) -> Outcome:
    """Estimates one constant.

    With ``oracle`` set, the ``p = 2`` eigenvalue is checked against the dense spectrum.
    """
    cfg = config.estimator_config()
    start = time.perf_counter()
    result = estimators.estimate(cfg)
    timings = {"estimate": _elapsed_ms(start)}

    extras: Dict[str, Any] = {}
    failures: List[str] = []
    if config.oracle:
        if result.lambda_min is None:
            warnings.warn(
                f"The dense oracle checks the p=2 eigenvalue. It is skipped for p={cfg.p}.",
                UserWarning,
                stacklevel=2,
            )
        else:
            start = time.perf_counter()
            comparison, kernel = _compare_with_oracle(cfg, result.lambda_min)
            timings["oracle"] = _elapsed_ms(start)
            extras.update(oracle=comparison, kernel_check=kernel)
            if not comparison.relative_deviation <= ORACLE_RTOL:
                failures.append(f"oracle deviation {comparison.relative_deviation:.3e} > {ORACLE_RTOL:.0e}")
            if not kernel.passed:
                failures.append(f"dense spectrum has a kernel of dimension {kernel.kernel_dimension}")
    for failure in failures:
        print(f"kornlab: {failure}", file=sys.stderr)

    report = ReportFile.from_estimate(
        kornlab.__version__,
        config,
        result,
        status="ok" if not failures else "failed: " + "; ".join(failures),
        timings_ms=timings,
        **extras,
    )
    return report, EXIT_FAILED if failures else EXIT_OK, None


def _sweep_row(point: RunConfig, value: str) -> SweepRow:
    try:
        cfg = point.estimator_config()
        result = estimators.estimate(cfg)
    except (EstimatorError, ValueError, np.linalg.LinAlgError) as ex:
        logger.warning("Sweep point %s failed: %s", value, ex)
        h = point.build_grid().max_spacing
        return SweepRow(value=value, h=h, status=f"failed: {ex}")
    return SweepRow(
        value=value,
        h=cfg.grid.max_spacing,
        constant_estimate=float(result.constant_estimate),
        quotient_value=float(result.quotient_value),
        lambda_min=None if result.lambda_min is None else float(result.lambda_min),
        converged=bool(result.converged),
        status="ok" if result.converged else "not converged",
    )


def cmd_sweep(config: RunConfig) -> Outcome:
    """Runs ``estimate`` for every sweep value; failing points are recorded in their row."""
    points = [config.sweep_point(i) for i in range(len(config.values))]
    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=get_worker_count(len(points))) as pool:
        rows = list(pool.map(_sweep_row, points, config.values))
    table = pandas.DataFrame([row.model_dump() for row in rows])[SWEEP_COLUMNS]
    failed = [row.value for row in rows if row.status.startswith("failed")]
    report = ReportFile(
        version=kornlab.__version__,
        config=config,
        status="ok" if not failed else "failed points: " + ",".join(failed),
        refinement_table=rows,
        timings_ms={"sweep": _elapsed_ms(start)},
    )
    return report, EXIT_FAILED if failed else EXIT_OK, table


COMMANDS: Dict[Command, Callable[[RunConfig], Outcome]] = {
    Command.VERIFY_IDENTITIES: cmd_verify_identities,
    Command.ESTIMATE: cmd_estimate,
    Command.SWEEP: cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="UTF-8 file with key=value lines; flags take precedence")
    common.add_argument("--seed", type=int, help="seed of all random starts (default: 0)")
    common.add_argument("--out", help="write the JSON report to this file instead of stdout")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="log solver progress")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="log errors only")

    estimation = argparse.ArgumentParser(add_help=False)
    estimation.add_argument("--ineq", dest="inequality", choices=[i.value for i in Inequality])
    estimation.add_argument("--dim", type=int, help="ambient dimension n")
    estimation.add_argument("--p", help="integrability exponent, 1 < p < ∞")
    estimation.add_argument("--grid", help="nodes per axis, e.g. 8 or 8,12")
    estimation.add_argument("--extents", help="box side lengths, e.g. 1 or 1,2")
    estimation.add_argument(
        "--gamma",
        help="faces with zero tangential trace: all or e.g. +x1,-x2 (a leading minus works, --gamma -x1)",
    )
    estimation.add_argument(
        "--oracle", action="store_const", const=True, help="compare λ_min with the dense spectrum (p=2)"
    )
    estimation.add_argument("--max-iter", dest="max_iter", type=int)
    estimation.add_argument("--tol-rel", dest="tol_rel", type=float)
    estimation.add_argument("--starts", dest="n_starts", type=int, help="number of ascent starts")

    parser = argparse.ArgumentParser(prog="kornlab", description="Discrete Korn-type constants on box grids.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {kornlab.__version__}")
    subparsers = parser.add_subparsers(dest="command")

    verify = subparsers.add_parser(
        Command.VERIFY_IDENTITIES.value, parents=[common], help="check the algebraic and discrete identities"
    )
    verify.add_argument("--dims", help="comma separated dimensions (default: 2,3,4)")

    subparsers.add_parser(Command.ESTIMATE.value, parents=[common, estimation], help="estimate one constant")

    sweep = subparsers.add_parser(
        Command.SWEEP.value, parents=[common, estimation], help="estimate constants along one axis"
    )
    sweep.add_argument("--axis", choices=[a.value for a in SweepAxis])
    sweep.add_argument(
        "--values", nargs="+", help="sweep values; comma separated numbers or ';' separated face sets"
    )
    sweep.add_argument("--csv", help="also write the refinement table as CSV")
    return parser


def _attach_face_sets(argv: Sequence[str]) -> List[str]:
    """Joins face sets that start with a minus sign to their flag, so argparse reads them as values.

    ``--gamma -x1`` becomes ``--gamma=-x1`` and ``--values -x1 +x1,-x2`` becomes
    ``--values=-x1;+x1,-x2``.
    """
    tokens = list(argv)
    result: List[str] = []
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if token == "--gamma" and i + 1 < len(tokens) and FACE_TOKEN.match(tokens[i + 1]):
            result.append(f"--gamma={tokens[i + 1]}")
            i += 2
            continue
        if token == "--values":
            j = i + 1
            while j < len(tokens) and (not tokens[j].startswith("-") or FACE_TOKEN.match(tokens[j])):
                j += 1
            values = tokens[i + 1 : j]
            if any(FACE_TOKEN.match(v) for v in values):
                result.append("--values=" + ";".join(values))
                i = j
                continue
        result.append(token)
        i += 1
    return result


def _flag_settings(args: argparse.Namespace) -> Dict[str, Any]:
    settings = {name: getattr(args, name, None) for name in FLAG_FIELDS}
    values = getattr(args, "values", None)
    if values is not None:
        separator = ";" if args.axis == SweepAxis.GAMMA.value or any(";" in v for v in values) else ","
        settings["values"] = [v.strip() for token in values for v in token.split(separator) if v.strip()]
    return settings


def _diagnostic(ex: Exception) -> str:
    if isinstance(ex, ValidationError):
        messages = []
        for error in ex.errors():
            location = ".".join(str(part) for part in error["loc"])
            messages.append(f"{location}: {error['msg']}" if location else error["msg"])
        return "; ".join(messages)
    return " ".join(str(ex).split())


def _write_outputs(report: ReportFile, table: Optional[pandas.DataFrame], config: RunConfig) -> None:
    if config.out:
        pathlib.Path(config.out).write_text(report.to_json(), encoding="utf-8")
        logger.info("Wrote report to %s", config.out)
    else:
        sys.stdout.write(report.to_json())
    if table is not None and config.csv:
        table.to_csv(config.csv, index=False)
        logger.info("Wrote %i sweep rows to %s", len(table), config.csv)
    return


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``kornlab`` console script.

    Returns
    -------
    exit_code : int
        0 on success, 1 when a check failed, 2 for usage and configuration errors.
    """
    parser = build_parser()
    args = parser.parse_args(_attach_face_sets(sys.argv[1:] if argv is None else argv))
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    level = logging.INFO if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.verbose:
        logging.getLogger("kornlab").setLevel(logging.DEBUG)

    try:
        file_settings = parse_config_file(args.config) if args.config else {}
        settings = merge_settings(file_settings, _flag_settings(args))
        settings["command"] = args.command
        config = RunConfig(**settings)
    except (ValueError, OSError) as ex:
        print(f"kornlab: error: {_diagnostic(ex)}", file=sys.stderr)
        return EXIT_USAGE

    try:
        report, code, table = COMMANDS[config.command](config)
    except EstimatorError as ex:
        print(f"kornlab: {type(ex).__name__}: {_diagnostic(ex)}", file=sys.stderr)
        return EXIT_FAILED
    except ValueError as ex:
        print(f"kornlab: error: {_diagnostic(ex)}", file=sys.stderr)
        return EXIT_USAGE
    _write_outputs(report, table, config)
    return code


if __name__ == "__main__":
    sys.exit(main())
