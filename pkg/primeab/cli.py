"""Command-line entry point."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import colorlog
import numpy as np
import voluptuous as vol
import yaml
from pydantic import ValidationError

from . import arith, buchstab, decomposition, deficit, dirichlet, verify
from .const import (
    CONF_BUDGET,
    CONF_DELTA,
    CONF_FORMAT,
    CONF_GRID_STEP,
    CONF_LOG_LEVEL,
    CONF_OUT,
    CONF_SAMPLES,
    CONF_SEED,
    CONF_STRATA,
    CONF_THREADS,
    CONF_U_MAX,
    DEFAULT_BUDGET,
    DEFAULT_DELTA,
    DEFAULT_GRID_STEP,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_STRATA_PER_DIM,
    DEFAULT_U_MAX,
    FIRST_INTEGRAL_BOUND,
    FORMAT_CSV,
    FORMAT_JSON,
    FORMATS,
    IMPORTED_D2_DEFICIT,
    LOG_LEVELS,
    LOGGER,
    MAX_GRID_STEP,
    MAX_THREADS,
    MIN_SAMPLES,
    NAME,
    SECOND_INTEGRAL_BOUND,
    SECOND_INTEGRAL_RAW_BOUND,
    SIGNIFICANT_DIGITS,
    STARTUP_MESSAGE,
    THETA,
    VERSION,
)
from .coordinator import clamp, default_threads
from .exceptions import ParameterError, ReproductionFailureError, ToolkitError
from .model import DeficitResult, McParams, RunConfig

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

CONFIG_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_THREADS): vol.All(int, vol.Range(min=1, max=MAX_THREADS)),
        vol.Optional(CONF_SEED): vol.All(int, vol.Range(min=0, max=2**64 - 1)),
        vol.Optional(CONF_SAMPLES): vol.All(int, vol.Range(min=MIN_SAMPLES)),
        vol.Optional(CONF_STRATA): vol.All(int, vol.Range(min=1)),
        vol.Optional(CONF_OUT): str,
        vol.Optional(CONF_FORMAT): vol.In(FORMATS),
        vol.Optional(CONF_LOG_LEVEL): vol.All(vol.Upper, vol.In(LOG_LEVELS)),
        vol.Optional(CONF_GRID_STEP): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=MAX_GRID_STEP, min_included=False)
        ),
        vol.Optional(CONF_U_MAX): vol.All(vol.Coerce(float), vol.Range(min=3)),
        vol.Optional(CONF_DELTA): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=0.1, min_included=False, max_included=False)
        ),
        vol.Optional(CONF_BUDGET): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=1, max_included=False)
        ),
    }
)


@dataclass
class Output:
    """Result of one command: a JSON body and the same data as CSV rows."""

    result: dict[str, Any]
    columns: list[str] = field(default_factory=list)
    rows: list[list[Any]] = field(default_factory=list)


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so run() owns the exit code."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        raise ParameterError(message)


def load_config(path: str | Path) -> dict[str, Any]:
    """Read and validate a YAML or JSON run configuration."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ParameterError(f"cannot read config {path}: {err}") from err
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as err:
        raise ParameterError(f"cannot parse config {path}: {err}") from err
    try:
        return CONFIG_SCHEMA(raw or {})
    except vol.Invalid as err:
        raise ParameterError(f"invalid config {path}: {err}") from err


def setup_logging(level: str) -> None:
    """Install the colored stderr handler on the package logger."""
    for handler in list(LOGGER.handlers):
        if getattr(handler, "_primeab", False):
            LOGGER.removeHandler(handler)
    handler = colorlog.StreamHandler(sys.stderr)
    handler.setFormatter(
        colorlog.ColoredFormatter("%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s")
    )
    handler._primeab = True
    LOGGER.addHandler(handler)
    LOGGER.setLevel(getattr(logging, level.upper()))


def _global_flags(parser: argparse.ArgumentParser, default: Any) -> None:
    parser.add_argument("--threads", type=int, default=default)
    parser.add_argument("--config", default=default)
    parser.add_argument("--out", default=default)
    parser.add_argument("--format", choices=FORMATS, default=default)
    parser.add_argument("--log-level", choices=LOG_LEVELS, default=default)


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser for every subcommand.

    Global flags are accepted before the command and again after it; a flag left out after
    the command keeps the value given before it.
    """
    parser = _Parser(prog=NAME, description="Sieve toolkit for n = p + ab")
    parser.add_argument("--version", action="version", version=f"{NAME} {VERSION}")
    _global_flags(parser, None)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def group(name: str) -> Any:
        return commands.add_parser(name).add_subparsers(dest="action", required=True, parser_class=_Parser)

    buchstab_ = group("buchstab")
    table = buchstab_.add_parser("table", parents=[common])
    table.add_argument("--from", "--u0", dest="u0", type=float, default=1.0)
    table.add_argument("--to", "--u1", dest="u1", type=float, default=DEFAULT_U_MAX)
    table.add_argument("--step", type=float, default=0.01)
    _evaluator_flags(table)

    deficit_ = group("deficit")
    run_ = deficit_.add_parser("run", parents=[common])
    run_.add_argument("--integral", choices=["first", "second", "total"], default="total")
    run_.add_argument("--samples", type=int, default=None)
    run_.add_argument("--seed", type=int, default=None)
    run_.add_argument("--strata-per-dim", type=int, default=None)
    run_.add_argument("--limit", choices=[deficit.LIMIT_CUBE, deficit.LIMIT_H2], default=deficit.LIMIT_CUBE)
    run_.add_argument("--alpha1", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    run_.add_argument("--no-removal", action="store_true")
    run_.add_argument("--imported", type=float, default=IMPORTED_D2_DEFICIT)
    _evaluator_flags(run_)

    lambda_ = group("lambda")
    profile = lambda_.add_parser("profile", parents=[common])
    profile.add_argument("--x", type=int, required=True)
    profile.add_argument("--y", type=int, default=None)
    profile.add_argument("--window", "--h0", dest="h0", type=int, default=None)
    profile.add_argument("--decomposition", "--plan", dest="plan", default=None)

    charsum = group("charsum")
    scan = charsum.add_parser("scan", parents=[common])
    scan.add_argument("--x", type=int, required=True)
    scan.add_argument("--q-max", type=int, required=True)
    scan.add_argument("--q-min", type=int, default=2)
    scan.add_argument("--f", choices=["rho", "lambda"], default="rho")
    scan.add_argument("--h", type=int, default=None)
    scan.add_argument("--h0", type=int, default=None)

    verify_ = group("verify")
    vscan = verify_.add_parser("scan", parents=[common])
    vscan.add_argument("--lo", type=int, required=True)
    vscan.add_argument("--hi", type=int, required=True)
    vscan.add_argument("--delta", type=float, default=None)
    vscan.add_argument("--budget", type=float, default=None)
    l71 = verify_.add_parser("lemma71", parents=[common])
    l71.add_argument("--n", type=int, required=True)
    l71.add_argument("--y", type=int, required=True)
    l71.add_argument("--v", type=int, default=1)
    l72 = verify_.add_parser("lemma72", parents=[common])
    l72.add_argument("--E", type=int, required=True)
    l72.add_argument("--d", type=int, default=1)
    l72.add_argument("--n", type=int, default=1)

    arith_ = group("arith")
    pi = arith_.add_parser("pi", parents=[common])
    pi.add_argument("--limit", type=int, required=True)
    return parser


def _evaluator_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid-step", type=float, default=None)
    parser.add_argument("--u-max", type=float, default=None)


def _pick(value: Any, config: dict[str, Any], key: str, default: Any) -> Any:
    """Flag, else config file, else default."""
    if value is not None:
        return value
    return config.get(key, default)


def _rounded(value: Any) -> Any:
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (float, np.floating)):
        return float(f"{float(value):.{SIGNIFICANT_DIGITS}g}")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, dict):
        return {str(k): _rounded(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(v) for v in value]
    return value


def render(output: Output, run_config: RunConfig) -> str:
    """Serialize the output with its configuration echo."""
    config = _rounded(run_config.model_dump())
    if run_config.format == FORMAT_CSV:
        buffer = io.StringIO()
        buffer.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        columns = output.columns or sorted(output.result)
        rows = output.rows or [[output.result[c] for c in columns]]
        writer.writerow(columns)
        for row in rows:
            writer.writerow(_rounded(list(row)))
        return buffer.getvalue()
    body = {"config": config, "result": _rounded(output.result)}
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _evaluator(args: argparse.Namespace, config: dict[str, Any]) -> buchstab.BuchstabEvaluator:
    return buchstab.build_evaluator(
        u_max=_pick(args.u_max, config, CONF_U_MAX, DEFAULT_U_MAX),
        grid_step=_pick(args.grid_step, config, CONF_GRID_STEP, DEFAULT_GRID_STEP),
    )


def _deficit_output(result: DeficitResult) -> Output:
    body = result.model_dump()
    columns = ["region", "limit", "value", "std_error", "samples"]
    rows = [[result.region_name, result.limit or "", result.value, result.std_error, result.samples]]
    rows += [[name, "", value, "", ""] for name, value in result.components.items()]
    return Output(body, columns, rows)


def cmd_buchstab(args, config, threads) -> tuple[Output, dict[str, Any]]:
    """buchstab table."""
    ev = _evaluator(args, config)
    rows = buchstab.table(ev, args.u0, args.u1, args.step)
    params = {"u0": args.u0, "u1": args.u1, "step": args.step, "u_max": ev.u_max, "grid_step": ev.grid_step}
    return Output({"rows": [list(r) for r in rows]}, ["u", "omega"], [list(r) for r in rows]), params


def cmd_deficit(args, config, threads) -> tuple[Output, dict[str, Any]]:
    """deficit run."""
    ev = _evaluator(args, config)
    p = McParams(
        samples=_pick(args.samples, config, CONF_SAMPLES, DEFAULT_SAMPLES),
        seed=_pick(args.seed, config, CONF_SEED, DEFAULT_SEED),
        strata_per_dim=_pick(args.strata_per_dim, config, CONF_STRATA, DEFAULT_STRATA_PER_DIM),
    )
    params = {
        "integral": args.integral,
        "samples": p.samples,
        "strata_per_dim": p.strata_per_dim,
        "limit": args.limit,
        "alpha1": args.alpha1,
        "removal": not args.no_removal,
        "imported": args.imported,
        "u_max": ev.u_max,
        "grid_step": ev.grid_step,
    }
    if args.integral == "first":
        alpha1 = tuple(args.alpha1) if args.alpha1 else None
        result = deficit.first_integral(ev, p, alpha1, args.limit, threads)
        if alpha1 is None and not result.value < FIRST_INTEGRAL_BOUND:
            raise ReproductionFailureError(
                f"first integral {result.value:.6f} not below {FIRST_INTEGRAL_BOUND}", {"first": result.value}
            )
    elif args.integral == "second":
        result = deficit.second_integral(ev, p, not args.no_removal, threads)
        bound = SECOND_INTEGRAL_RAW_BOUND if args.no_removal else SECOND_INTEGRAL_BOUND
        if not result.value < bound:
            raise ReproductionFailureError(
                f"second integral {result.value:.6f} not below {bound}", {"second": result.value}
            )
    else:
        result = deficit.total_deficit(ev, p, args.imported, threads, limit=args.limit)
    return _deficit_output(result), params


def cmd_lambda(args, config, threads) -> tuple[Output, dict[str, Any]]:
    """lambda profile."""
    d = decomposition.read_plan(args.plan)
    profile = decomposition.lambda_profile(d, args.x, args.y, args.h0, threads)
    body = profile.model_dump()
    params = {"x": args.x, "y": args.y, "window": args.h0, "decomposition": args.plan or "D1"}
    return Output(body, sorted(body), [[body[c] for c in sorted(body)]]), params


def _function_window(kind: str, x: int, lo: int, hi: int) -> dirichlet.SampledFunction:
    """f(n) for lo < n <= hi."""
    if kind == "rho":
        table = arith.segmented_sieve(max(2, lo + 1), hi + 1)
        values = np.zeros(hi - lo)
        values[table.primes - (lo + 1)] = 1.0
        return dirichlet.SampledFunction(start=lo + 1, values=values)
    d = decomposition.read_plan()
    values = decomposition.lambda_values(d, arith.factor_range(lo + 1, hi), x)
    return dirichlet.SampledFunction(start=lo + 1, values=values)


def cmd_charsum(args, config, threads) -> tuple[Output, dict[str, Any]]:
    """charsum scan."""
    x = args.x
    h = args.h if args.h is not None else int(x**0.5)
    h0 = args.h0 if args.h0 is not None else decomposition.default_h0(x)
    f = _function_window(args.f, x, x - max(h, h0), x)
    reports = dirichlet.discrepancy_scan(f, x, args.q_max, h, h0, q_min=args.q_min, threads=threads)
    columns = ["q", "max_abs_chi", "max_abs_progression", "eta", "normalized"]
    rows = [[getattr(r, c) for c in columns] for r in reports]
    params = {"x": x, "q_min": args.q_min, "q_max": args.q_max, "f": args.f, "h": h, "h0": h0, "theta": THETA}
    return Output({"reports": [r.model_dump() for r in reports]}, columns, rows), params


def cmd_verify(args, config, threads) -> tuple[Output, dict[str, Any]]:
    """verify scan | lemma71 | lemma72."""
    if args.action == "scan":
        delta = _pick(args.delta, config, CONF_DELTA, DEFAULT_DELTA)
        budget = _pick(args.budget, config, CONF_BUDGET, DEFAULT_BUDGET)
        summary = verify.scan_range(args.lo, args.hi, delta, budget, threads)
        rows = [[r.n, r.p, r.a, r.b, r.theta_n] for r in summary.records]
        params = {"lo": args.lo, "hi": args.hi, "delta": delta, "budget": budget}
        return Output(summary.model_dump(), ["n", "p", "a", "b", "theta"], rows), params
    if args.action == "lemma71":
        ratio = verify.lemma71_ratio(args.n, args.y, args.v)
        return Output({"n": args.n, "y": args.y, "v": args.v, "ratio": ratio}), {"n": args.n, "y": args.y, "v": args.v}
    check = verify.lemma72_check(args.E, args.d, args.n)
    body = check.model_dump() | {"relative_error": check.relative_error}
    return Output(body), {"E": args.E, "d": args.d, "n": args.n}


def cmd_arith(args, config, threads) -> tuple[Output, dict[str, Any]]:
    """arith pi."""
    return Output({"limit": args.limit, "pi": arith.prime_count(args.limit)}), {"limit": args.limit}


# commands whose natural output is a table
CSV_COMMANDS = {"buchstab table", "charsum scan"}


def _default_format(command: str, out: str | None) -> str:
    """Format from the output file suffix, else the command's own default."""
    suffix = Path(out).suffix.lstrip(".") if out else ""
    if suffix in FORMATS:
        return suffix
    return FORMAT_CSV if command in CSV_COMMANDS else FORMAT_JSON


COMMANDS = {
    "buchstab": cmd_buchstab,
    "deficit": cmd_deficit,
    "lambda": cmd_lambda,
    "charsum": cmd_charsum,
    "verify": cmd_verify,
    "arith": cmd_arith,
}


def run(argv: list[str] | None = None) -> int:
    """Execute one command; 0 on success, 1 on a missed published bound, 2 on usage errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ParameterError as err:
        print(f"{NAME}: error: {err.message}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:
        # --help and --version
        return int(err.code or 0)

    try:
        config = load_config(args.config) if args.config else {}
    except ParameterError as err:
        print(f"{NAME}: {err}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(_pick(args.log_level, config, CONF_LOG_LEVEL, "INFO"))
    LOGGER.info(STARTUP_MESSAGE)

    threads = _pick(args.threads, config, CONF_THREADS, None) or default_threads()
    threads = int(clamp(threads, 1, MAX_THREADS))
    out = _pick(args.out, config, CONF_OUT, None)
    command = f"{args.command} {args.action}"
    fmt = _pick(args.format, config, CONF_FORMAT, None) or _default_format(command, out)
    try:
        output, params = COMMANDS[args.command](args, config, threads)
    except ReproductionFailureError as err:
        LOGGER.error("%s (components %s)", err, err.components)
        return EXIT_FAILURE
    except ToolkitError as err:
        LOGGER.error("%s", err)
        return EXIT_USAGE
    except ValidationError as err:
        LOGGER.error("Invalid parameters: %s", err)
        return EXIT_USAGE

    seed = params.get("seed", _pick(getattr(args, "seed", None), config, CONF_SEED, DEFAULT_SEED))
    run_config = RunConfig(command=command, params=params, seed=seed, threads=threads, out=out, format=fmt)
    text = render(output, run_config)
    if out:
        Path(out).write_text(text)
        LOGGER.info("Wrote %s", out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main() -> None:
    """Console script entry point."""
    sys.exit(run())
