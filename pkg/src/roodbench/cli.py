"""``roodbench`` command-line interface.

Exit codes: 0 on success, 1 when some samples or cells failed, 2 on usage or
configuration errors. Diagnostics go to stderr; results only to files.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from typing import List, Optional, Sequence

from . import __version__
from .pipeline import (
    PipelineError,
    discover_samples,
    evaluate_predictions,
    generate_benchmark,
    read_metrics,
    report_from_metrics,
    usable_metrics,
)
from .robustness import DEFAULT_ALPHA, MetricsError, compare_models
from .transforms.severity import ConfigError, SeverityTable, TransformKind
from .volume import (
    VolumeError,
    load_label,
    load_volume,
    reorient_to_ras,
    resample_isotropic,
    save_label,
    save_volume,
    zscore_normalize,
)

log = logging.getLogger("roodbench")

CONFIG_ENV = "ROODBENCH_CONFIG"
EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


def _say(fmt: str, *args) -> None:
    """Summary line on stderr, shown regardless of --verbose."""
    print("roodbench: " + (fmt % args if args else fmt), file=sys.stderr)


def _alpha(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid float value: {text!r}") from None
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError("alpha must be in (0, 1]")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid int value: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid int value: {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {value}")
    return value


def _transform_list(text: str) -> List[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    valid = [k.value for k in TransformKind]
    bad = [n for n in names if n not in valid]
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"unknown transform(s) {bad or [text]}; choose from {', '.join(valid)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="global seed (default: 0)")
    common.add_argument("--config", default=None,
                        help=f"severity table (TOML or JSON); defaults to ${CONFIG_ENV} if set")
    common.add_argument("--jobs", type=_positive_int, default=1,
                        help="worker processes (default: 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="roodbench",
                                     description="Generate corrupted MRI test sets and score robustness.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", parents=[common], help="write transformed sets and a manifest")
    p.add_argument("--input-dir", required=True, help="directory of <id>.nii[.gz] / <id>_label.nii[.gz]")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--transforms", type=_transform_list, default=None,
                   help="comma-separated subset of transforms (default: all 11)")
    p.add_argument("--compress", action="store_true", help="write .nii.gz instead of .nii")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred-dir", required=True,
                   help="predictions named <id>__<transform>__s<severity>.nii[.gz]")
    p.add_argument("--output", default="metrics.csv", help="metrics CSV (default: metrics.csv)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="aggregate a metrics file")
    p.add_argument("--metrics", required=True)
    p.add_argument("--output-dir", default=".")
    p.add_argument("--prefix", default="report", help="output file prefix (default: report)")
    p.add_argument("--alpha", type=_alpha, default=DEFAULT_ALPHA,
                   help="severity weight base, in (0, 1] (default: 0.6667, i.e. 2/3)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("compare", parents=[common], help="paired signed-rank test of two models")
    p.add_argument("--metrics-a", required=True)
    p.add_argument("--metrics-b", required=True)
    p.add_argument("--metric", choices=("dsc", "hd95"), default="dsc")
    p.add_argument("--significance", type=_probability, default=0.01,
                   help="family-wise level before Bonferroni (default: 0.01)")
    p.add_argument("--comparisons", type=_positive_int, default=5,
                   help="Bonferroni factor (default: 5 severity levels)")
    p.add_argument("--output", default="comparison.csv", help="(default: comparison.csv)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("preprocess", parents=[common],
                       help="reorient to RAS+, resample isotropically and z-score images")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--spacing", type=float, default=1.0, help="target spacing in mm (default: 1)")
    p.add_argument("--no-zscore", action="store_true", help="skip intensity normalization")
    p.set_defaults(func=cmd_preprocess)
    return parser


def _load_table(path: Optional[str]) -> SeverityTable:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return SeverityTable()
    log.info("severity table: %s", path)
    return SeverityTable.from_file(path)


def cmd_generate(args: argparse.Namespace) -> int:
    table = _load_table(args.config)
    manifest = generate_benchmark(args.input_dir, args.output_dir, table, args.transforms,
                                  args.seed, args.jobs, args.compress)
    failed = manifest.failed()
    _say("generated %d of %d cells into %s", len(manifest.rows) - len(failed),
         len(manifest.rows), args.output_dir)
    for row in failed:
        log.error("failed: %s %s s%d: %s", row.sample_id, row.transform, row.severity,
                  row.aux.get("error", ""))
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    rows = evaluate_predictions(args.manifest, args.pred_dir, args.output, args.jobs)
    counts = {}
    for r in rows:
        counts[r.status] = counts.get(r.status, 0) + 1
    _say("evaluated %d rows: %s", len(rows),
         ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    for r in rows:
        if r.status != "ok":
            log.info("%s: %s %s s%d", r.status, r.sample_id, r.transform, r.severity)
    return EXIT_OK if counts.get("ok", 0) == len(rows) else EXIT_PARTIAL


def cmd_report(args: argparse.Namespace) -> int:
    metrics = read_metrics(args.metrics)
    skipped = sum(r.status != "ok" for r in metrics)
    _, paths = report_from_metrics(metrics, args.alpha, args.output_dir, args.prefix)
    _say("report written: %s", ", ".join(paths.values()))
    if skipped:
        _say("%d metrics rows without a score were excluded", skipped)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    a = usable_metrics(read_metrics(args.metrics_a))
    b = usable_metrics(read_metrics(args.metrics_b))
    cells = compare_models(a, b, args.significance, args.comparisons, args.metric)
    with open(args.output, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["transform", "severity", "n", "statistic", "p_raw", "p_corrected",
                         "significant", "decision", "mean_difference"])
        for c in cells:
            writer.writerow([c.transform, c.severity, c.n, _g(c.statistic), _g(c.p_raw),
                             _g(c.p_corrected), str(c.significant).lower(), c.decision,
                             _g(c.mean_difference)])
    n_sig = sum(c.significant for c in cells)
    _say("%d of %d cells significant at %g (Bonferroni x%d); written to %s", n_sig,
         len(cells), args.significance, args.comparisons, args.output)
    return EXIT_OK


def _g(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.6g}"


def cmd_preprocess(args: argparse.Namespace) -> int:
    if not args.spacing > 0:
        raise ConfigError("--spacing must be positive")
    os.makedirs(args.output_dir, exist_ok=True)
    failures = 0
    for sample_id, image_path, label_path in discover_samples(args.input_dir):
        try:
            image = resample_isotropic(reorient_to_ras(load_volume(image_path)), args.spacing)
            if not args.no_zscore:
                image = zscore_normalize(image)
            label = resample_isotropic(reorient_to_ras(load_label(label_path)), args.spacing)
            save_volume(image, os.path.join(args.output_dir, f"{sample_id}.nii.gz"))
            save_label(label, os.path.join(args.output_dir, f"{sample_id}_label.nii.gz"))
            log.info("%s: %s -> %s", sample_id, image.shape, args.output_dir)
        except (VolumeError, OSError) as exc:
            failures += 1
            log.error("%s: %s", sample_id, exc)
    return EXIT_PARTIAL if failures else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="roodbench: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, MetricsError) as exc:
        print(f"roodbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PipelineError, VolumeError, FileNotFoundError) as exc:
        print(f"roodbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"roodbench: error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
