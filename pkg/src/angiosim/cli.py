"""Command-line front end.

Subcommands compose the pipeline: ``generate`` renders seeded datasets,
``estimate`` extracts per-image thickness CSVs, ``evaluate`` compares a
candidate directory against a reference, ``floor`` calibrates estimator
noise floors, and ``report`` aggregates evaluation JSONs into one CSV.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ._version import __version__
from .errors import AngiosimError
from .morphology import estimate_batch, write_thickness_csv
from .phantom import load_config, perturbed, preset
from .stats import (
    HistogramSpec,
    NoiseFloorSummary,
    compare_image_sets,
    noise_floor,
    read_report_json,
    report_csv_row,
    REPORT_CSV_HEADER,
    write_report_json,
)

_METRIC_ALIASES = {"kl": "kl", "js": "js", "ffd": "frechet", "frechet": "frechet"}


def _resolve_config(args, parser: argparse.ArgumentParser):
    if args.config is not None:
        return load_config(args.config)
    return preset(args.preset)


def _parse_perturb(text: str, parser: argparse.ArgumentParser) -> dict:
    shifts = {"t0": 0.0, "prevalence": 0.0, "edge_noise": 0.0}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        key, sep, value = part.partition("=")
        key = key.strip()
        if not sep or key not in shifts:
            parser.error(f"bad --perturb entry {part!r}; expected t0=, prevalence=, edge_noise=")
        try:
            shifts[key] = float(value)
        except ValueError:
            parser.error(f"bad --perturb value in {part!r}")
    return shifts


def cmd_generate(args, parser) -> int:
    from .dataset import generate_batch

    config = _resolve_config(args, parser)
    if args.perturb:
        shifts = _parse_perturb(args.perturb, parser)
        config = perturbed(
            config,
            t0_shift=shifts["t0"],
            prevalence_shift=shifts["prevalence"],
            edge_noise_shift=shifts["edge_noise"],
        )
    manifest = generate_batch(config, args.count, args.seed, args.out)
    print(
        f"generated {manifest.count} images in {args.out} "
        f"(aneurysm fraction {manifest.aneurysm_fraction:.4f}, "
        f"config digest {manifest.config_digest})"
    )
    return 0


def cmd_estimate(args, parser) -> int:
    result = estimate_batch(args.in_dir, threshold=args.threshold, search_radius=args.search_radius)
    write_thickness_csv(result, args.out)
    values = result.samples.values
    mean = float(values.mean()) if values.size else float("nan")
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    print(
        f"estimated {len(result.records)} images ({result.invalid_count} invalid, "
        f"{len(result.errors)} unreadable); thickness mean {mean:.3f} px, std {std:.3f} px"
    )
    return 0


def _parse_metrics(text: str, parser) -> tuple[str, ...]:
    metrics = []
    for name in text.split(","):
        name = name.strip().lower()
        if not name:
            continue
        if name not in _METRIC_ALIASES:
            parser.error(f"unknown metric {name!r}; expected kl, js, ffd")
        metrics.append(_METRIC_ALIASES[name])
    if not metrics:
        parser.error("--metrics must name at least one of kl, js, ffd")
    return tuple(dict.fromkeys(metrics))


def cmd_evaluate(args, parser) -> int:
    metrics = _parse_metrics(args.metrics, parser)
    spec = HistogramSpec(
        lo=args.hist_lo,
        hi=args.hist_hi,
        bin_width=args.hist_bin_width,
        smoothing_epsilon=args.hist_epsilon,
    )
    floor = None
    if args.floor_from:
        doc = json.loads(Path(args.floor_from).read_text(encoding="utf-8"))
        floor = NoiseFloorSummary(
            metric=doc["metric"],
            mean=doc["mean"],
            std=doc["std"],
            n=doc["n"],
            replicates=doc["replicates"],
        )
    run_label = args.label or Path(args.cand).name
    report = compare_image_sets(
        args.ref,
        args.cand,
        metrics=metrics,
        spec=spec,
        threshold=args.threshold,
        search_radius=args.search_radius,
        run_label=run_label,
        floor=floor,
    )
    out = Path(args.out)
    write_report_json(report, out)
    csv_path = out.with_suffix(".csv")
    csv_path.write_text(
        REPORT_CSV_HEADER + "\n" + report_csv_row(report) + "\n", encoding="utf-8", newline="\n"
    )
    shown = {
        "kl_nats": report.kl_nats,
        "js_nats": report.js_nats,
        "frechet_sq": report.frechet_sq,
    }
    parts = [f"{k}={v:.6f}" for k, v in shown.items() if v is not None]
    if report.above_floor_3sigma is not None:
        parts.append(f"above_floor_3sigma={report.above_floor_3sigma}")
    print(f"{run_label}: " + " ".join(parts))
    return 0


def cmd_floor(args, parser) -> int:
    if args.n < 100:
        parser.error("--n must be >= 100")
    if args.reps < 1:
        parser.error("--reps must be >= 1")
    metric = _METRIC_ALIASES[args.metric]
    config = _resolve_config(args, parser)
    floor = noise_floor(config, n=args.n, replicates=args.reps, metric=metric, master_seed=args.seed)
    doc = {
        "metric": floor.metric,
        "mean": floor.mean,
        "std": floor.std,
        "values": list(floor.values),
        "n": floor.n,
        "replicates": floor.replicates,
        "single_replicate_warning": floor.replicates == 1,
    }
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n")
    print(
        f"noise floor ({floor.metric}, n={floor.n}, {floor.replicates} replicates): "
        f"mean {floor.mean:.6f}, std {floor.std:.6f}"
    )
    return 0


def cmd_report(args, parser) -> int:
    import glob

    paths = sorted(glob.glob(args.runs))
    if not paths:
        raise AngiosimError(f"no report files match {args.runs!r}")
    reports = [read_report_json(p) for p in paths]
    reports.sort(key=lambda r: r.run_label)
    lines = [REPORT_CSV_HEADER] + [report_csv_row(r) for r in reports]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    print(f"wrote {len(reports)} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="angiosim",
        description="Simulate vessel angiograms and evaluate image populations.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="render a seeded image dataset")
    src = gen.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a key-value config file")
    src.add_argument("--preset", choices=("sim23", "sim27", "sim33"))
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument(
        "--perturb",
        default="",
        help="comma list of shifts, e.g. t0=-6,prevalence=+0.1,edge_noise=+0.2",
    )
    gen.set_defaults(func=cmd_generate)

    est = sub.add_parser("estimate", help="write per-image thickness CSV for a directory")
    est.add_argument("--in", dest="in_dir", required=True)
    est.add_argument("--out", required=True)
    est.add_argument("--threshold", type=float, default=0.5)
    est.add_argument("--search-radius", type=float, default=40.0)
    est.set_defaults(func=cmd_estimate)

    ev = sub.add_parser("evaluate", help="compare a candidate directory against a reference")
    ev.add_argument("--ref", required=True)
    ev.add_argument("--cand", required=True)
    ev.add_argument("--metrics", default="kl,js")
    ev.add_argument("--out", required=True)
    ev.add_argument("--label", default="")
    ev.add_argument("--threshold", type=float, default=0.5)
    ev.add_argument("--search-radius", type=float, default=40.0)
    ev.add_argument("--hist-lo", type=float, default=0.0)
    ev.add_argument("--hist-hi", type=float, default=64.0)
    ev.add_argument("--hist-bin-width", type=float, default=0.5)
    ev.add_argument("--hist-epsilon", type=float, default=0.5)
    ev.add_argument("--floor-from", default="")
    ev.set_defaults(func=cmd_evaluate)

    fl = sub.add_parser("floor", help="estimate a metric's noise floor for a model")
    fsrc = fl.add_mutually_exclusive_group(required=True)
    fsrc.add_argument("--config", help="path to a key-value config file")
    fsrc.add_argument("--preset", choices=("sim23", "sim27", "sim33"))
    fl.add_argument("--n", type=int, required=True)
    fl.add_argument("--reps", type=int, required=True)
    fl.add_argument("--metric", choices=("kl", "js", "ffd"), required=True)
    fl.add_argument("--seed", type=int, default=0)
    fl.add_argument("--out", required=True)
    fl.set_defaults(func=cmd_floor)

    rep = sub.add_parser("report", help="aggregate evaluation JSONs into a CSV table")
    rep.add_argument("--runs", required=True, help="glob of report JSON files")
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (AngiosimError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
