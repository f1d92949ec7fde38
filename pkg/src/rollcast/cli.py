"""Command-line harness.

Subcommands: synth (emit a synthetic dataset), forecast (one task to JSON),
bench (method matrix to records and tables), compare (win table), aggregate
(summary table with optional external imports and exclusions).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import rollout
from .backends import make_backend
from .bench import (
    BenchmarkRecord,
    MethodSpec,
    RunConfig,
    compare,
    compare_table,
    import_external,
    load_reference_results,
    make_tasks,
    pivot_table,
    read_records,
    run,
    summary_table,
    write_csv,
    write_markdown,
)
from .core import ForecastTask
from .data import (
    DatasetManifest,
    LorenzConfig,
    gen_lorenz,
    gen_shared_latent,
    gen_var1,
    save_dataset,
)
from .featurize import default_spec_for
from .metrics import DEFAULT_QUANTILE_LEVELS, aggregate
from .transform import fit_transform, inverse


def _parse_quantiles(text: str) -> tuple[float, ...]:
    return tuple(float(q) for q in text.split(","))


def _add_method_flags(parser):
    parser.add_argument("--mode", choices=["joint", "autoregressive", "ci"], default="joint")
    parser.add_argument("--norm", choices=["zscore", "diff", "none"], default="zscore")
    parser.add_argument("--backend", default="icm-gp")
    parser.add_argument("--context-limit", type=int, default=4096)
    parser.add_argument("--quantiles", type=_parse_quantiles,
                        default=DEFAULT_QUANTILE_LEVELS, metavar="CSV")
    parser.add_argument("--seed", type=int, default=0)


def _mode_name(flag: str) -> str:
    return "channel_independent" if flag == "ci" else flag


def cmd_synth(args) -> int:
    if args.generator == "lorenz":
        series = gen_lorenz(LorenzConfig(steps=args.steps), seed=args.seed)
        horizons = {"short": 48, "medium": 120, "long": 240}
    elif args.generator == "var1":
        coupling = np.array([[0.9, 0.0], [0.5, 0.4]])
        series = gen_var1(coupling, noise_scale=0.5, steps=args.steps, seed=args.seed)
        horizons = {"short": 24, "medium": 48, "long": 96}
    else:
        series = gen_shared_latent(args.steps, 0.05, 0.5, seed=args.seed)
        horizons = {"short": 24, "medium": 48, "long": 96}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = args.name or args.generator
    csv_path = out / f"{name}.csv"
    save_dataset(series, csv_path)
    manifest = DatasetManifest(
        name=name,
        frequency=series.frequency,
        channels=series.channels,
        horizon_by_term=horizons,
        csv_path=csv_path.name,
    )
    manifest.save(out / f"{name}.json")
    print(f"wrote {csv_path} and {out / (name + '.json')}")
    return 0


def cmd_forecast(args) -> int:
    manifest = DatasetManifest.load(args.data)
    (eval_task,) = make_tasks(manifest, args.horizon_term)
    history = rollout.truncate_history(eval_task.task.history, args.context_limit)
    transformed, state = fit_transform(history, args.norm)
    spec = default_spec_for(history.frequency)
    backend = make_backend(args.backend, season_length=eval_task.seasonality)
    task = ForecastTask(
        history=transformed,
        horizon=eval_task.task.horizon,
        quantile_levels=args.quantiles,
        mode=_mode_name(args.mode),
    )
    forecast = inverse(rollout.predict(task, backend, spec, seed=args.seed), state)
    payload = {
        "dataset_task": eval_task.dataset_task,
        "channels": list(forecast.channels),
        "timestamps": [int(t) for t in forecast.horizon_timestamps],
        "mean": forecast.mean.tolist(),
        "quantile_levels": list(forecast.quantile_levels),
        "quantiles": forecast.quantiles.tolist(),
        "mode": _mode_name(args.mode),
        "norm": args.norm,
        "backend": args.backend,
        "seed": args.seed,
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _parse_method(text: str, args) -> MethodSpec:
    """label:mode:norm:backend (mode/norm/backend optional, fall back to flags)."""
    parts = text.split(":")
    label = parts[0]
    mode = parts[1] if len(parts) > 1 and parts[1] else args.mode
    norm = parts[2] if len(parts) > 2 and parts[2] else args.norm
    backend = ":".join(parts[3:]) if len(parts) > 3 and parts[3] else args.backend
    return MethodSpec(
        label=label,
        mode=_mode_name(mode),
        norm=norm,
        backend=backend,
        context_limit=args.context_limit,
    )


def cmd_bench(args) -> int:
    manifests = tuple(DatasetManifest.load(p) for p in args.data)
    if args.method:
        methods = tuple(_parse_method(m, args) for m in args.method)
    else:
        methods = (
            MethodSpec(
                label=f"{args.mode}-{args.norm}-{args.backend.split(':')[0]}",
                mode=_mode_name(args.mode),
                norm=args.norm,
                backend=args.backend,
                context_limit=args.context_limit,
            ),
        )
    config = RunConfig(
        datasets=manifests,
        methods=methods,
        terms=tuple(args.horizon_term),
        quantile_levels=args.quantiles,
        seed=args.seed,
        output_dir=args.out,
    )
    records = run(config)
    scored = [r for r in records if r.error is None]
    out = Path(args.out)
    for metric in ("mase", "wql"):
        write_csv(pivot_table(scored, metric), out / f"table_{metric}.csv")
        write_markdown(pivot_table(scored, metric), out / f"table_{metric}.md")
    if len({r.method for r in scored}) > 1 and scored:
        summary = aggregate(scored)
        write_csv(summary_table(summary), out / "summary.csv")
        write_markdown(summary_table(summary), out / "summary.md")
    failures = [r for r in records if r.error is not None]
    for rec in failures:
        print(f"FAILED {rec.dataset_task} [{rec.method}]: {rec.error}", file=sys.stderr)
    print(f"{len(scored)} cells scored, {len(failures)} failed; records in {out/'records.jsonl'}")
    return 1 if failures else 0


def cmd_compare(args) -> int:
    records = read_records(args.records)
    result = compare(records, args.baseline, args.candidate)
    table = compare_table(result)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(table, out / "compare.csv")
    write_markdown(table, out / "compare.md")
    print(
        f"{result.candidate} beats {result.baseline} on "
        f"{sum(r[3] for r in result.rows)}/{len(result.rows)} datasets "
        f"(win fraction {result.win_fraction:.3f})"
    )
    return 0


def cmd_aggregate(args) -> int:
    records: list[BenchmarkRecord] = []
    if args.records:
        records.extend(r for r in read_records(args.records) if r.error is None)
    for path in args.import_csv or ():
        records.extend(import_external(path))
    for name in args.import_reference or ():
        records.extend(load_reference_results(name))
    summary = aggregate(records, exclude=tuple(args.exclude or ()))
    table = summary_table(summary)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(table, out / "aggregate.csv")
    write_markdown(table, out / "aggregate.md")
    for row in table:
        print("  ".join(str(c).ljust(14) for c in row))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rollcast",
        description="Multivariate forecasting via channel-rollout tabular regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset (CSV + manifest)")
    p.add_argument("--generator", choices=["lorenz", "var1", "shared-latent"], required=True)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default=None)
    p.add_argument("--out", default="datasets")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("forecast", help="forecast one dataset task, emit JSON")
    p.add_argument("--data", required=True, help="path to a dataset manifest JSON")
    p.add_argument("--horizon-term", choices=["short", "medium", "long"], default="short")
    _add_method_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("bench", help="run a benchmark matrix")
    p.add_argument("--data", nargs="+", required=True, help="dataset manifest JSONs")
    p.add_argument("--horizon-term", nargs="+", choices=["short", "medium", "long"],
                   default=["short"])
    p.add_argument("--method", action="append", metavar="LABEL[:MODE[:NORM[:BACKEND]]]",
                   help="repeatable; omitted fields fall back to the flags below")
    _add_method_flags(p)
    p.add_argument("--out", default="bench-out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="win table of candidate vs baseline MASE")
    p.add_argument("--records", required=True, help="records.jsonl from a bench run")
    p.add_argument("--baseline", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--out", default="bench-out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("aggregate", help="per-method averages and average ranks")
    p.add_argument("--records", default=None, help="records.jsonl from a bench run")
    p.add_argument("--import-csv", action="append", metavar="CSV",
                   help="externally produced results (dataset_task,method,mase,wql)")
    p.add_argument("--import-reference", action="append", choices=["mv_pair", "sota"],
                   help="shipped reference result files")
    p.add_argument("--exclude", action="append", metavar="GLOB",
                   help="dataset_task patterns to drop, e.g. 'jena_weather*'")
    p.add_argument("--out", default="bench-out")
    p.set_defaults(func=cmd_aggregate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
