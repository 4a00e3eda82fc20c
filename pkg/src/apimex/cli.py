"""Command line entry point (``apimex``)."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .errors import ApimexError, ConfigError
from .tableaux import classify, format_catalog, is_globally_stiffly_accurate, r_infinity, resolve, validate_order


def _cmd_validate(args) -> int:
    try:
        tab = resolve(args.tableau)
    except (KeyError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = validate_order(tab, args.order or tab.declared_order)
    print(report.summary())
    print(f"class: {classify(tab).value}")
    print(f"R(inf): {r_infinity(tab):.6g}")
    print(f"implicit part stiffly accurate: {tab.implicit_stiffly_accurate()}")
    print(f"globally stiffly accurate: {is_globally_stiffly_accurate(tab)}")
    if args.catalog:
        print(format_catalog([tab]), end="")
    return 0 if (report.passed or not args.check) else 1


def _cmd_experiment(kind: str):
    def handler(args) -> int:
        try:
            cfg = harness.load_config(args.config)
        except (OSError, ConfigError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if kind is not None and cfg.kind != kind:
            print(f"error: config kind is {cfg.kind!r}, this verb runs {kind!r}", file=sys.stderr)
            return 2
        outdir = Path(args.output) if args.output else Path(cfg.output)
        try:
            manifest = harness.run(cfg, outdir)
        except ApimexError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        summary = (outdir / "summary.txt").read_text()
        print(summary, end="")
        for name in sorted(manifest["outputs"]):
            print(f"wrote {outdir / name}")
        print(f"wrote {outdir / 'manifest.json'}")
        if args.check and not manifest["passed"]:
            return 1
        return 0

    return handler


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apimex", description="IMEX Runge-Kutta experiments for diffusive relaxation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-tableau", help="check order conditions of a builtin or catalog tableau")
    p.add_argument("tableau", help="builtin name or catalog file")
    p.add_argument("--order", type=int, default=None, help="order to check (default: declared order)")
    p.add_argument("--catalog", action="store_true", help="also print the tableau in catalog format")
    p.add_argument("--check", action="store_true", help="exit 1 when a condition fails")
    p.set_defaults(func=_cmd_validate)

    verbs = {
        "converge": "converge",
        "sweep-eps": "sweep-eps",
        "stability": "stability",
        "transport": "transport",
        "run": None,
    }
    for verb, kind in verbs.items():
        p = sub.add_parser(verb, help=f"run a {verb} config" if kind else "run any config (or a run manifest)")
        p.add_argument("config", help="config file (or manifest.json for 'run')")
        p.add_argument("-o", "--output", default=None, help="output directory (default: the config's 'output')")
        p.add_argument("--check", action="store_true", help="exit 1 when an acceptance tolerance is breached")
        p.set_defaults(func=_cmd_experiment(kind))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
