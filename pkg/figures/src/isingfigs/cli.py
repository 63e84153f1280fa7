"""One subcommand per figure kind; reads isinglab CSVs, writes SVG files."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, plotted_checksum, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isingfigs", description="Render isinglab experiment CSVs as figures"
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in FIGURE_KINDS:
        p = sub.add_parser(kind.replace("_", "-"), help=f"render a {kind} figure")
        p.add_argument("--csv", required=True, help="main data table")
        p.add_argument("--fit-csv", default=None, help="fit table for overlays")
        p.add_argument("--oracle-csv", default=None, help="exact-reference table")
        p.add_argument("--out", required=True, help="output SVG path")
        p.add_argument("--title", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind.replace("-", "_"),
        csv=args.csv,
        fit_csv=args.fit_csv,
        oracle_csv=args.oracle_csv,
        out=args.out,
        title=args.title,
    )
    try:
        plotted = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    print(f"{args.out} checksum={plotted_checksum(plotted)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
