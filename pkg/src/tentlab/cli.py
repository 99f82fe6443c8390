"""``lab`` command line: run scenario configs, diff reports, list checkers."""
from __future__ import annotations

import argparse
import sys

from .exceptions import SchemaMismatchError
from .scenarios import CONFIG_DIR, REGISTRY, ConfigError, golden_diff, run

EXIT_OK, EXIT_FAIL, EXIT_PARSE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description="Numerical checks of Gaussian transport inequalities.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute a scenario config")
    r.add_argument("config", help=f"config path, or the name of a bundled config in {CONFIG_DIR}")
    r.add_argument("--out", default="reports", help="output directory (default: %(default)s)")
    r.add_argument("--seed", type=int, default=None, help="override every scenario seed")
    r.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel (default: 1)")
    d = sub.add_parser("diff", help="compare a JSONL report with a golden file")
    d.add_argument("report")
    d.add_argument("golden")
    sub.add_parser("list-checkers", help="print the registered checkers and their parameters")
    return p


def _list_checkers(stream) -> None:
    for name in sorted(REGISTRY):
        c = REGISTRY[name]
        print(f"{name}: {c.doc}", file=stream)
        for key, (kind, default) in c.params.items():
            print(f"    {key} ({kind}) = {default}", file=stream)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-checkers":
        _list_checkers(sys.stdout)
        return EXIT_OK
    if args.command == "diff":
        try:
            ok, msg = golden_diff(args.report, args.golden)
        except (OSError, SchemaMismatchError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        print(("pass: " if ok else "fail: ") + msg)
        return EXIT_OK if ok else EXIT_FAIL
    try:
        return run(args.config, args.out, seed=args.seed, jobs=max(1, args.jobs))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
