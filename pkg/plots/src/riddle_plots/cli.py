"""Entry points for the two batch plotting scripts."""
from __future__ import annotations

import argparse
import sys

from .curves import CurveSpec, plot_curves
from .heatmap import plot_freq_heatmap


def _parse_refs(values):
    refs = {}
    for item in values:
        label, _, raw = item.partition("=")
        if not raw:
            raise ValueError(f"expected LABEL=VALUE, got {item!r}")
        refs[label] = float(raw)
    return refs


def curves_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot-curves",
        description="Plot training curves (mean over seeds, 95% CI band) "
                    "from metrics CSV files.",
    )
    parser.add_argument("--csv", required=True, nargs="+",
                        help="one or more metrics/ablation CSV files")
    parser.add_argument("--group", default="variant",
                        help="comma-separated grouping columns")
    parser.add_argument("--ref", default=[], action="append", metavar="LABEL=VALUE",
                        help="dashed horizontal reference line; repeatable")
    parser.add_argument("--out", required=True, help="output image base path")
    parser.add_argument("--title", default="")
    parser.add_argument("--ylabel", default="")
    parser.add_argument("--raw", action="store_true",
                        help="plot raw mean reward instead of normalised")
    args = parser.parse_args(argv)
    try:
        spec = CurveSpec(
            csv_paths=args.csv,
            group_keys=tuple(k.strip() for k in args.group.split(",") if k.strip()),
            reference_lines=_parse_refs(args.ref),
            out_path=args.out,
            title=args.title,
            ylabel=args.ylabel,
            raw_reward=args.raw,
        )
        png, svg = plot_curves(spec)
    except (OSError, ValueError) as exc:
        print(f"plot-curves: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {png} and {svg}")
    return 0


def heatmap_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot-freq-heatmap",
        description="Render per-action frequency heatmaps over "
                    "(day, prior visitor count) from a frequency CSV.",
    )
    parser.add_argument("--csv", required=True)
    parser.add_argument("--out", required=True, help="output image base path")
    args = parser.parse_args(argv)
    try:
        png, svg = plot_freq_heatmap(args.csv, args.out)
    except (OSError, ValueError) as exc:
        print(f"plot-freq-heatmap: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {png} and {svg}")
    return 0


if __name__ == "__main__":
    sys.exit(curves_main())
