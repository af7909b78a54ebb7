"""Command-line entry point.

``run`` writes ``report.csv`` and ``summary.txt`` into the output directory
and exits 0 on PASS, 2 on any FAIL flag and 1 on error. ``validate`` performs
the dry-run checks and ``oracle`` prints analytic fixture spectra.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from importlib.metadata import PackageNotFoundError, version

from .config import load_config
from .errors import QGraphError
from .fixtures import oracle_spectrum
from .runner import run_experiment, validate_config

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def package_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _load(args):
    cfg = load_config(args.config)
    for item in args.set or ():
        cfg.set(item)
    if getattr(args, "seed", None) is not None:
        cfg.set(f"numerics.seed={args.seed}")
    return cfg


def _config_hash(cfg) -> str:
    h = hashlib.sha256(cfg.text.encode("utf-8"))
    for section in cfg.parser.sections():
        for k, v in sorted(cfg.parser.items(section)):
            h.update(f"\n[{section}]{k}={v}".encode("utf-8"))
    return h.hexdigest()


def cmd_run(args) -> int:
    cfg = _load(args)
    out = args.output or cfg.get("experiment", "output", default="results")
    report = run_experiment(cfg, workers=max(1, args.threads))
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(report.to_csv())
    seed = cfg.get("numerics", "seed", int, default=0)
    head = [f"version: {package_version()}", f"config_sha256: {_config_hash(cfg)}", f"config_seed: {seed}"]
    lines = head + report.summary_lines()
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_validate(args) -> int:
    for line in validate_config(_load(args)):
        print(line)
    return EXIT_PASS


def cmd_oracle(args) -> int:
    params = {}
    if args.length is not None:
        params["l"] = args.length
    if args.K is not None:
        params["K"] = args.K
    for x in oracle_spectrum(args.kind, args.count, **params):
        print(repr(float(x)))
    return EXIT_PASS


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1 so that 2 stays reserved for FAIL."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qgraph-wegner", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override a config value; repeatable")
        sp.add_argument("--seed", type=int, default=None, help="override [numerics] seed")

    r = sub.add_parser("run", help="execute an experiment")
    common(r)
    r.add_argument("--output", metavar="DIR", default=None)
    r.add_argument("--threads", type=int, default=1, help="worker processes; never changes results")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="dry-run checks without sampling")
    common(v)
    v.set_defaults(func=cmd_validate)

    o = sub.add_parser("oracle", help="print analytic fixture spectra")
    o.add_argument("kind", choices=("interval", "loop", "star"))
    o.add_argument("--count", type=int, default=10)
    o.add_argument("--length", type=float, default=None)
    o.add_argument("--K", type=int, default=None)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
