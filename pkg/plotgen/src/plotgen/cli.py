"""plotgen command line: sweep and prop-error figures from aggregate CSVs.

In --dry-run mode the rows that would be plotted are printed verbatim and no
image is written, which gives tests an exact round-trip check without any
pixel comparisons.
"""

from __future__ import annotations

import argparse
import sys

from .plots import plot_proportion_error, plot_sweep, sweep_rows
from .tables import METRIC_ACCURACY, METRIC_L1, SchemaMismatch, load_table


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotgen")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("sweep", "line plot with +/- std bands over a sweep axis"),
                            ("prop-error", "grouped proportion-error bars per setting")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--in", dest="infile", required=True, help="aggregate CSV")
        p.add_argument("--out", help="output image path (required unless --dry-run)")
        p.add_argument("--dry-run", action="store_true",
                       help="print the plotted series verbatim instead of rendering")
        if name == "sweep":
            p.add_argument("--axis-label", default="majority class proportion")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    metric = METRIC_ACCURACY if args.command == "sweep" else METRIC_L1
    try:
        if args.dry_run:
            for row in sweep_rows(load_table(args.infile), metric):
                print(row.raw)
            return 0
        if not args.out:
            print("error: --out is required unless --dry-run is given", file=sys.stderr)
            return 2
        if args.command == "sweep":
            plot_sweep(args.infile, args.axis_label, args.out)
        else:
            plot_proportion_error(args.infile, args.out)
    except SchemaMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
