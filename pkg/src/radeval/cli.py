"""Command-line entry point.

Subcommands: score, compare, agree, retrieve, validate. All take a JSON
config (--config); selected fields are overridable by flags. Exit codes:
0 success, 1 validation/data failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from radeval.errors import ConfigError, ParseError, RadEvalError
from radeval import runner


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radeval",
        description="Deterministic evaluation for radiology report generation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--output-dir", default=None, help="override output directory")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker cap (RADEVAL_THREADS wins)")
        p.add_argument("--metrics", default=None,
                       help="comma-separated metric list override")

    p = sub.add_parser("score", help="per-candidate and aggregate score matrices")
    common(p)

    p = sub.add_parser("compare", help="paired significance test between two systems")
    common(p)
    p.add_argument("--system-a", required=True)
    p.add_argument("--system-b", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--iterations", type=int, default=10000,
                   help="permutation iterations")
    p.add_argument("--resamples", type=int, default=1000, help="bootstrap resamples")
    p.add_argument("--level", type=float, default=0.95, help="CI level")

    p = sub.add_parser("agree", help="metric-expert agreement (tau_b + bootstrap CI)")
    common(p)
    p.add_argument("--endpoint", action="append", default=None,
                   help="kind[:category][@section], e.g. total_significant@findings; "
                        "repeatable (default total_significant over all sections)")
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)

    p = sub.add_parser("retrieve", help="seeded retrieval protocol")
    common(p)
    p.add_argument("--seeds", default=None,
                   help="comma-separated seed list (default: seed..seed+n_seeds-1)")
    p.add_argument("--n-seeds", type=int, default=10)
    p.add_argument("--n-queries", type=int, default=10)
    p.add_argument("--max-pos-per-label", type=int, default=200)
    p.add_argument("--ks", default="5,10,50,100", help="comma-separated cutoffs")
    p.add_argument("--query-sampling", choices=["uniform", "per_label"],
                   default="uniform")
    p.add_argument("--restrict-label", default=None,
                   help="evaluate within one label category only")
    p.add_argument("--divide-by-k", action="store_true",
                   help="P@k divides by k even when the pool is smaller")

    p = sub.add_parser("validate", help="parse and cross-check all configured files")
    common(p)
    return parser


def _int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{flag} must be a comma-separated integer list, got {text!r}")


def _load(args: argparse.Namespace) -> runner.RunConfig:
    overrides = {
        "output_dir": args.output_dir,
        "seed": args.seed,
        "threads": args.threads,
    }
    if args.metrics is not None:
        overrides["metrics"] = [m.strip() for m in args.metrics.split(",") if m.strip()]
    return runner.load_config(args.config, overrides)


def _dispatch(args: argparse.Namespace) -> int:
    config = _load(args)
    if args.command == "score":
        runner.cmd_score(config)
        print(f"wrote {config.output_dir}/results.json")
        return 0
    if args.command == "compare":
        results = runner.cmd_compare(
            config, args.system_a, args.system_b, args.metric,
            iterations=args.iterations, resamples=args.resamples, level=args.level)
        r = results["results"]
        print(f"mean diff {r['mean_diff']:+.6f}, p = {r['p_value']:.6f}, "
              f"CI [{r['ci_low']:.6f}, {r['ci_high']:.6f}]")
        return 0
    if args.command == "agree":
        texts = args.endpoint or ["total_significant"]
        endpoints = [runner.parse_endpoint(t) for t in texts]
        runner.cmd_agree(config, endpoints,
                         resamples=args.resamples, level=args.level)
        print(f"wrote {config.output_dir}/results.json")
        return 0
    if args.command == "retrieve":
        seeds = _int_list(args.seeds, "--seeds") if args.seeds else None
        ks = _int_list(args.ks, "--ks")
        runner.cmd_retrieve(
            config, seeds=seeds, n_seeds=args.n_seeds, n_queries=args.n_queries,
            max_pos_per_label=args.max_pos_per_label, ks=ks,
            query_sampling=args.query_sampling, restrict_label=args.restrict_label,
            divide_by_k=args.divide_by_k)
        print(f"wrote {config.output_dir}/results.json")
        return 0
    if args.command == "validate":
        report = runner.cmd_validate(config)
        for issue in report.issues:
            print(str(issue))
        if report.ok:
            print("validation ok: no issues")
            return 0
        print(f"validation failed: {len(report.issues)} issue(s)")
        return 1
    raise ConfigError(f"unknown command {args.command!r}")  # pragma: no cover


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except runner.ValidationFailure as exc:
        for issue in exc.report.issues:
            print(str(issue), file=sys.stderr)
        print(f"validation failed: {len(exc.report.issues)} issue(s)", file=sys.stderr)
        return 1
    except (ParseError, RadEvalError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
