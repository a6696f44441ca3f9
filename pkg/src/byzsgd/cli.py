"""``byzsgd`` command line.

    byzsgd run --config exp.json --out runs/exp [--force]
    byzsgd gamma-scan --rule krum --p 2 --f 10 --dims 64,256,1024,4096 --out scans/krum
    byzsgd check resilience --rule bulyan:krum --out checks/res
    byzsgd plot --in a.csv,baseline --in b.csv,attacked --x epoch --y accuracy --out fig.svg

Exit status: 0 on success, 2 for usage or configuration problems, 3 when a
run fails at runtime. Diagnostics go to stderr as a single ``byzsgd: ...`` line.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__, analysis, gar
from .attack import AttackMode, GaussianModel, MarginSearch
from .plot import MissingColumnError, PlotSpec, parse_input, plot
from .simulator import ExperimentConfig, SimulationDiverged, run_experiment
from .vectors import norm_order

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _prepare_out(out: Path, force: bool, names: Sequence[str]) -> None:
    clash = [n for n in names if (out / n).exists()]
    if clash and not force:
        raise UsageError(f"{out} already holds {clash[0]}; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# -- commands -------------------------------------------------------------------


def cmd_run(args) -> int:
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        config = ExperimentConfig.load(path)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"{path}: {exc}") from exc
    out = Path(args.out)
    _prepare_out(out, args.force, ("log.csv", "config.json", "manifest.json"))
    log = run_experiment(config)
    log.write_csv(out / "log.csv")
    _write_json(out / "config.json", config.to_dict())
    _write_json(out / "manifest.json", {
        "master_seed": config.master_seed,
        "byzsgd": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "records": len(log.records),
    })
    return EXIT_OK


def cmd_gamma_scan(args) -> int:
    dims = _int_list(args.dims)
    if len(dims) < 3:
        raise UsageError("need >= 3 points for a slope")
    search = MarginSearch(trials_per_probe=args.trials, tol_rel=args.tol)
    report = analysis.gamma_scaling_study(
        args.rule, norm_order(args.p), args.f, dims, s=args.s, search=search, seed=args.seed,
        mode=AttackMode(args.mode),
    )
    report.write(Path(args.out), "gamma_scan")
    return EXIT_OK


def cmd_check(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.study == "resilience":
        rule = args.rule or "krum"
        f = 1 if args.f is None else args.f
        n = args.n or analysis.quorum_size(rule, f)
        d = args.d or 50
        model = GaussianModel(np.full(d, 1.0 / math.sqrt(d)), np.full(d, args.s))
        report = analysis.check_resilience_condition1(
            rule, model, n, f, args.strategy, trials=args.trials, alpha=args.alpha, seed=args.seed
        )
        _write_json(out / "resilience.json", report.summary())
    elif args.study == "leeway":
        rule = args.rule or "bulyan:krum"
        f = 2 if args.f is None else args.f
        n = args.n or analysis.quorum_size(rule, f)
        dims = _int_list(args.dims or "64,256,1024")
        report = analysis.measure_bulyan_leeway(args.s, n, f, dims, trials=args.trials, seed=args.seed, rule=rule)
        report.write(out, "leeway")
    else:
        rule = args.rule or "bulyan:krum"
        ns = _int_list(args.ns or "15,31,63")
        report = analysis.complexity_study(rule, args.d or 1000, ns, repetitions=args.repetitions, seed=args.seed)
        report.write(out, "complexity")
    return EXIT_OK


def cmd_plot(args) -> int:
    inputs = tuple(parse_input(a) for a in args.inputs)
    for path, _ in inputs:
        if not path.is_file():
            raise UsageError(f"input not found: {path}")
    plot(PlotSpec(inputs, args.x, args.y, Path(args.out), args.vline))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="byzsgd", description="Byzantine-resilient SGD experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one training experiment from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--force", action="store_true", help="overwrite an existing run directory")
    run.set_defaults(func=cmd_run)

    scan = sub.add_parser("gamma-scan", help="attack margin versus dimension")
    scan.add_argument("--rule", required=True, choices=gar.RULE_IDS)
    scan.add_argument("--p", default="2")
    scan.add_argument("--f", type=int, required=True)
    scan.add_argument("--dims", required=True, help="comma-separated dimensions")
    scan.add_argument("--out", required=True)
    scan.add_argument("--s", type=float, default=1.0, help="per-coordinate standard deviation")
    scan.add_argument("--trials", type=int, default=200, help="honest draws per probe")
    scan.add_argument("--tol", type=float, default=1e-2)
    scan.add_argument("--seed", type=int, default=0)
    scan.add_argument("--mode", default="lp-single", choices=[m.value for m in AttackMode])
    scan.set_defaults(func=cmd_gamma_scan)

    check = sub.add_parser("check", help="resilience, leeway or complexity study")
    check.add_argument("study", choices=("resilience", "leeway", "complexity"))
    check.add_argument("--out", required=True)
    check.add_argument("--rule", choices=gar.RULE_IDS)
    check.add_argument("--n", type=int)
    check.add_argument("--f", type=int)
    check.add_argument("--d", type=int)
    check.add_argument("--dims")
    check.add_argument("--ns")
    check.add_argument("--s", type=float, default=1.0)
    check.add_argument("--trials", type=int, default=200)
    check.add_argument("--alpha", type=float, default=math.pi / 4)
    check.add_argument("--strategy", default="crafted", choices=("crafted", "opposite", "honest"))
    check.add_argument("--repetitions", type=int, default=5)
    check.add_argument("--seed", type=int, default=0)
    check.set_defaults(func=cmd_check)

    pl = sub.add_parser("plot", help="render CSV columns as an SVG line chart")
    pl.add_argument("--in", dest="inputs", action="append", required=True, metavar="CSV[,LABEL]")
    pl.add_argument("--x", required=True)
    pl.add_argument("--y", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--vline", type=float)
    pl.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"byzsgd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (gar.QuorumError, MissingColumnError, ValueError) as exc:
        print(f"byzsgd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimulationDiverged, gar.BruteFeasibilityError, RuntimeError, OSError) as exc:
        print(f"byzsgd: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
