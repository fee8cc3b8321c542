"""Command line entry point.

Exit codes mirror the engine's convention: 0 success, 1 data/model
failure, 2 bad arguments.
"""

from __future__ import annotations

import argparse
import sys

from radeval_export.errors import ExportError, SpecError
from radeval_export.export import export
from radeval_export.spec import KINDS, POOLINGS, ExportSpec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radeval-export",
        description="Encode reports with a local pretrained model and write "
                    "a radeval sidecar file.")
    parser.add_argument("--model", required=True,
                        help="path or identifier of a local pretrained model")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="FILE",
                        help="studies or candidates file; repeatable")
    parser.add_argument("--out", required=True, help="output sidecar path")
    parser.add_argument("--pooling", default="mean", choices=POOLINGS,
                        help="report-kind pooling (default mean)")
    parser.add_argument("--layer", type=int, default=-1,
                        help="hidden-state layer index (default -1, the last)")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--threshold", type=float, default=0.5,
                        help="labels-kind positive threshold (default 0.5)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = ExportSpec(
            model=args.model,
            kind=args.kind,
            inputs=tuple(args.inputs),
            output=args.out,
            pooling=args.pooling,
            layer=args.layer,
            batch_size=args.batch_size,
            threshold=args.threshold,
        )
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        count = export(spec)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} {spec.kind} records to {spec.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
