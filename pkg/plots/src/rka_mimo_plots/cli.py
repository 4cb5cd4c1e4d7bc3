"""Command-line entry point: ``rka-mimo-plots render --fig N --in CSV --out IMG``."""

import argparse
import os
import sys

from .io import SchemaError
from .render import render_figure


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rka-mimo-plots",
        description="Render static figures from rka-mimo experiment CSV tables.")
    sub = parser.add_subparsers(dest="command", required=True)
    render = sub.add_parser("render", help="render one figure from one CSV")
    render.add_argument("--fig", type=int, required=True, choices=range(1, 6),
                        help="figure number (1-5); selects the expected schema")
    render.add_argument("--in", dest="csv_path", required=True,
                        help="input CSV produced by the rka-mimo harness")
    render.add_argument("--out", dest="out_path", required=True,
                        help="output image path (.png, .svg, or .pdf)")
    return parser


def main(argv=None) -> int:
    # pin the embedded timestamps some backends write, for reproducible bytes
    os.environ.setdefault("SOURCE_DATE_EPOCH", "0")
    args = build_parser().parse_args(argv)
    try:
        out = render_figure(args.fig, args.csv_path, args.out_path)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
