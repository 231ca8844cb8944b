"""Command-line front end.

Exit codes: 0 on success, 2 for bad arguments or configs, 1 when a run fails.
Every command writes CSV to ``--out`` or standard output; logs go to stderr.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .belief import InvalidConfigurationError
from .config import ConfigError, load_configs
from .envs import Inventory, inventory_oracle, load_inventory_table
from .harness import RESULT_COLUMNS, curve_rows, run_experiment, write_csv
from .pcs import PosteriorSnapshot, approximation_sweep
from .ratios import RatioProblem, g_value, solve_ratios

log = logging.getLogger("goodsubset")

THREADS_ENV = "GOODSUBSET_THREADS"
RATIO_REPORT_COLUMNS = ("policy", "m", "alternative", "mean_ratio", "conditional_ratio",
                        "survivor", "theory_ratio", "residual")
RATIOS_COLUMNS = ("alternative", "role", "ratio", "g_value", "rate_residual",
                  "balance_residual", "converged")
APPROX_COLUMNS = ("scale", "d", "region_estimate", "region_std_error", "ball_value", "gap")
ORACLE_COLUMNS = ("alternative", "s", "S", "mean_cost", "std_error")


class UsageError(Exception):
    """Bad command-line values that argparse cannot catch on its own."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if value < 1:
        raise UsageError(f"{THREADS_ENV} must be >= 1")
    return value


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="goodsubset",
                     description="Sequential sampling for selecting a good-enough subset.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run macro experiments from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.add_argument("--threads", type=int, help=f"worker processes (default ${THREADS_ENV} or 1)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--macros", type=int, help="override the config macro count")
    run.add_argument("--ratios-out", help="also write the empirical ratio report here")

    ratios = sub.add_parser("ratios", help="solve the asymptotic sampling ratios")
    ratios.add_argument("--problem", help="JSON file with means, stds, m and optional survivor")
    ratios.add_argument("--k", type=int)
    ratios.add_argument("--m", type=int)
    ratios.add_argument("--means", type=_floats)
    ratios.add_argument("--stds", type=_floats)
    ratios.add_argument("--survivor", type=int, help="1-based survivor (default: true best)")
    ratios.add_argument("--out")

    approx = sub.add_parser("validate-approx",
                            help="compare the region probability with the inscribed-ball value")
    approx.add_argument("--means", type=_floats, default=_floats("1.0,0.8,0.2,0.0,-0.3"))
    approx.add_argument("--variances", type=_floats, default=_floats("0.4,0.4,0.4,0.4,0.4"))
    approx.add_argument("--m", type=int, default=2)
    approx.add_argument("--rank", type=int, default=1, help="1-based rank within the top m")
    approx.add_argument("--scales", type=_floats, default=_floats("1,2,4,8"))
    approx.add_argument("--samples", type=int, default=1_000_000)
    approx.add_argument("--seed", type=int, default=0)
    approx.add_argument("--out")

    oracle = sub.add_parser("inventory-oracle", help="long-run mean cost of each (s, S) policy")
    oracle.add_argument("--reps", type=int, default=1_000_000)
    oracle.add_argument("--table", help="CSV with columns index, s, S")
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--lost-sales", action="store_true",
                        help="lost-sales accounting instead of backlogging")
    oracle.add_argument("--initial-level", default="zero",
                        help="zero, s, S or a number (default zero)")
    oracle.add_argument("--out")

    sub.add_parser("version", help="print the package version")
    return parser


def _cmd_run(args) -> int:
    configs = load_configs(args.config)
    if args.seed is not None or args.macros is not None:
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.macros is not None:
            overrides["macros"] = args.macros
        configs = [replace(c, **overrides) for c in configs]
    threads = args.threads if args.threads is not None else _default_threads()
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    for cfg in configs:
        log.info("config: env=%s m=%d T=%d n0=%d policy=%s macros=%d seed=%d variance=%s%s",
                 type(cfg.env).__name__, cfg.m, cfg.T, cfg.n0, cfg.policy.value, cfg.macros,
                 cfg.seed, cfg.var_mode.kind, "-frozen" if cfg.var_mode.freeze_after_init else "")
    rows, ratio_rows = [], []
    for cfg in configs:
        result = run_experiment(cfg, threads=threads)
        rows.extend(curve_rows(result))
        if args.ratios_out:
            for r in result.ratio_report():
                ratio_rows.append({"policy": cfg.policy.value, "m": cfg.m, **r})
    with _output(args.out) as fh:
        write_csv(rows, RESULT_COLUMNS, fh)
    if args.ratios_out:
        with _output(args.ratios_out) as fh:
            write_csv(ratio_rows, RATIO_REPORT_COLUMNS, fh)
    return 0


def _ratio_problem(args) -> RatioProblem:
    if args.problem:
        path = Path(args.problem)
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read problem: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
        unknown = set(raw) - {"means", "stds", "m", "survivor"}
        if unknown:
            raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
        means, stds, m, survivor = raw.get("means"), raw.get("stds"), raw.get("m"), raw.get("survivor")
    else:
        means, stds, m, survivor = args.means, args.stds, args.m, args.survivor
    if means is None or stds is None or m is None:
        raise UsageError("ratios needs --means, --stds and --m (or --problem)")
    if args.k is not None and not (len(means) == len(stds) == args.k):
        raise UsageError(f"--k {args.k} does not match the lengths of --means and --stds")
    try:
        return RatioProblem(np.array(means, dtype=float), np.array(stds, dtype=float), int(m),
                            survivor=None if survivor is None else int(survivor) - 1)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _cmd_ratios(args) -> int:
    problem = _ratio_problem(args)
    sol = solve_ratios(problem)
    if not sol.converged:
        log.warning("ratio solver stopped after %d iterations, residual %.3g",
                    sol.iterations, sol.residual)
    s = problem.survivor
    comp = set(int(j) for j in problem.complement)
    rows = []
    for i in range(problem.k):
        if i == s:
            role, g = "survivor", ""
        elif i in comp:
            role = "complement"
            g = g_value(problem.means[s], problem.stds[s], sol.r[s],
                        problem.means[i], problem.stds[i], sol.r[i])
        else:
            role, g = "top", ""
        rows.append({"alternative": i + 1, "role": role, "ratio": float(sol.r[i]), "g_value": g,
                     "rate_residual": sol.rate_residual, "balance_residual": sol.balance_residual,
                     "converged": sol.converged})
    with _output(args.out) as fh:
        write_csv(rows, RATIOS_COLUMNS, fh)
    return 0


def _cmd_validate_approx(args) -> int:
    if len(args.means) != len(args.variances):
        raise UsageError("--means and --variances need the same length")
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    try:
        snap = PosteriorSnapshot(np.array(args.means), np.array(args.variances), args.m)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not 1 <= args.rank <= args.m:
        raise UsageError(f"--rank must lie in 1..{args.m}")
    rows = approximation_sweep(snap, args.rank - 1, args.scales, args.samples, args.seed)
    with _output(args.out) as fh:
        write_csv(rows, APPROX_COLUMNS, fh)
    return 0


def _cmd_inventory_oracle(args) -> int:
    if args.reps < 2:
        raise UsageError("--reps must be >= 2")
    level = args.initial_level
    if level not in ("zero", "s", "S"):
        try:
            level = float(level)
        except ValueError:
            raise UsageError(f"--initial-level {level!r} is not zero, s, S or a number") from None
    kwargs = {"backlog": not args.lost_sales, "initial_level": level}
    if args.table:
        try:
            kwargs["policies"] = load_inventory_table(args.table)
        except OSError as exc:
            raise ConfigError(f"{args.table}: cannot read table: {exc.strerror}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        kwargs["best"] = None
    env = Inventory(**kwargs)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
    mean, se = inventory_oracle(env, args.reps, rng)
    rows = [{"alternative": i + 1, "s": int(env.s[i]), "S": int(env.big_s[i]),
             "mean_cost": float(mean[i]), "std_error": float(se[i])} for i in range(env.k)]
    with _output(args.out) as fh:
        write_csv(rows, ORACLE_COLUMNS, fh)
    log.info("lowest mean cost: alternative %d", int(np.argmin(mean)) + 1)
    return 0


_COMMANDS = {"run": _cmd_run, "ratios": _cmd_ratios, "validate-approx": _cmd_validate_approx,
             "inventory-oracle": _cmd_inventory_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"goodsubset: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.command == "version":
        print(f"goodsubset {__version__}")
        return 0
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, InvalidConfigurationError) as exc:
        print(f"goodsubset: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and exit non-zero
        log.debug("run failed", exc_info=True)
        print(f"goodsubset: run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
