"""Command line entry point: ``python -m weakdet <command>``.

Commands
--------
verify   run the acceptance battery, exit 0 iff every check passes
sweep    tabulate functionals over n for one family, with extrapolated limits
tartar   determinant sweep for the Tartar family next to its closed form
report   re-read a report file, print a summary or convert it
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .. import convergence as cv
from .. import functionals as fn
from . import checks as chk
from .config import ConfigError, RunConfig, family_template
from .report import Report, read

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def parse_n_list(text: str) -> tuple[int, ...]:
    """``'4,8,16'`` or ``'4..64'`` (doubling from 4 up to 64)."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(v) for v in text.split("..", 1))
            if lo < 1 or hi < lo:
                raise ValueError
            out, n = [], lo
            while n <= hi:
                out.append(n)
                n *= 2
            return tuple(out)
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n list {text!r}; use 4,8,16 or 4..64") from None


def _common(p: argparse.ArgumentParser, functionals=True):
    p.add_argument("--config", help="JSON file replacing the shipped defaults")
    p.add_argument("--dim", type=int)
    p.add_argument("--n", type=parse_n_list, dest="n_list", metavar="N_LIST")
    p.add_argument("--family", help="raw, normalized, scaled[:c], reflected[:axis], tartar[:a], "
                                    "identity or zero")
    if functionals:
        p.add_argument("--functional", action="append", dest="functionals",
                       help="det, abs_det, grad_lp[:p], lp[:p], sobolev_energy, image_volume, "
                            "concentration[:rho]; repeatable")
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weakdet", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("verify", help="run the acceptance battery"), functionals=False)
    _common(sub.add_parser("sweep", help="functional sweep over n"))
    p = sub.add_parser("tartar", help="Tartar determinant sweep")
    _common(p, functionals=False)
    p.add_argument("--a", type=float, dest="tartar_a")
    p = sub.add_parser("report", help="summarize or convert a report file")
    p.add_argument("path")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out")
    return parser


def load_config(args) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in
                 ("dim", "n_list", "family", "tol", "seed", "format", "out", "tartar_a")}
    funcs = getattr(args, "functionals", None)
    overrides["functionals"] = tuple(funcs) if funcs else None
    return RunConfig.default(getattr(args, "config", None), **overrides)


def cmd_verify(cfg: RunConfig, log=None) -> Report:
    report = Report("verify", cfg.echo())
    for res in chk.run_all(cfg, log=log):
        for row in res.rows:
            report.add_row(**row)
        report.checks.append(res.as_dict())
    return report


def _limits(rep: cv.SequenceReport) -> dict:
    return {name: {"limit": fit.limit, "slope": fit.slope, "residual": fit.residual,
                   "model": rep.model, "n_used": list(fit.n_used)}
            for name, fit in rep.fits.items()}


def cmd_sweep(cfg: RunConfig) -> Report:
    template = family_template(cfg.family, cfg.dim, cfg.c, cfg.tartar_a)
    try:
        rep = cv.sweep(template, cfg.n_list, cfg.functionals, cfg.tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = Report("sweep", cfg.echo())
    for row in rep.rows:
        for spec in rep.functionals:
            res = row.results[spec]
            report.add_row(row.n, res.label, res.value, res.error, res.nodes, res.converged)
    report.limits = _limits(rep)
    return report


def cmd_tartar(cfg: RunConfig) -> Report:
    a = cfg.tartar_a
    if not 0 < a < 1:
        raise ConfigError(f"a must lie in (0, 1), got {a}")
    rep = cv.sweep(family_template(f"tartar:{a!r}", 2), cfg.tartar_n_list, ["det"], cfg.tol)
    report = Report("tartar", cfg.echo())
    for row in rep.rows:
        res = row.results["det"]
        report.add_row(row.n, "det", res.value, res.error, res.nodes, res.converged,
                       truth=chk.tartar_closed_form(a, row.n))
    report.limits = _limits(rep)
    report.limits["closed_form_limit"] = {"limit": -a / 2, "slope": 0.0, "residual": 0.0,
                                          "model": "exact", "n_used": []}
    return report


def _emit(report: Report, fmt_name: str, out: str | None):
    text = report.dumps(fmt_name)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            report = read(args.path)
            if args.format or args.out:
                _emit(report, args.format or "csv", args.out)
            else:
                print(report.summary())
            return EXIT_OK
        cfg = load_config(args)
        if args.command == "tartar" and args.n_list:
            cfg = cfg.with_overrides(tartar_n_list=args.n_list)
        if args.command == "verify":
            log = (lambda msg: print(msg, file=sys.stderr))
            report = cmd_verify(cfg, log=log).stamp()
            _emit(report, cfg.format, cfg.out)
            failed = [c["name"] for c in report.checks if not c["passed"]]
            if failed:
                print("failed checks: " + ", ".join(failed), file=sys.stderr)
                return EXIT_FAIL
            return EXIT_OK
        if args.command == "sweep":
            report = cmd_sweep(cfg).stamp()
        else:
            report = cmd_tartar(cfg).stamp()
        _emit(report, cfg.format, cfg.out)
        return EXIT_OK
    except (ConfigError, FileNotFoundError) as exc:
        print(f"weakdet: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
