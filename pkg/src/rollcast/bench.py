"""Benchmark harness: task construction, method matrix, scoring, persistence.

One run evaluates every (dataset, term, method) cell on a single held-out
final window: fit the per-channel transform on the (possibly truncated)
context, build tables, predict in the method's mode, invert the transform,
then score MASE and WQL on the original scale. Records append to a
JSON-lines file as they complete, so an interrupted run leaves valid output.

Fairness rule: every method sees the same number of past time steps per
variate, so the channel-independent baseline is truncated exactly like the
joint rollout.
"""
from __future__ import annotations

import csv
import importlib.resources
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rollout, transform
from .backends import make_backend
from .core import ForecastTask, MultivariateSeries, RollcastError
from .data import DatasetManifest, SchemaError, load_dataset
from .featurize import FeatureSpec, default_spec_for
from .metrics import (
    DEFAULT_QUANTILE_LEVELS,
    AggregateSummary,
    MissingCell,
    mase,
    seasonality_for,
    wql,
)


class HistoryTooShort(RollcastError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    """One column of the method matrix."""

    label: str
    mode: str = "joint"
    norm: str = "zscore"
    backend: str = "icm-gp"
    feature_spec: FeatureSpec | None = None  # None: default for the frequency
    context_limit: int | None = 4096

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "mode": self.mode,
            "norm": self.norm,
            "backend": self.backend,
            "feature_spec": self.feature_spec.to_dict() if self.feature_spec else None,
            "context_limit": self.context_limit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MethodSpec":
        spec = d.get("feature_spec")
        return cls(
            label=d["label"],
            mode=d.get("mode", "joint"),
            norm=d.get("norm", "zscore"),
            backend=d.get("backend", "icm-gp"),
            feature_spec=FeatureSpec.from_dict(spec) if spec else None,
            context_limit=d.get("context_limit", 4096),
        )


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple[DatasetManifest, ...]
    methods: tuple[MethodSpec, ...]
    terms: tuple[str, ...] = ("short",)
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILE_LEVELS
    seed: int = 0
    output_dir: str = "bench-out"

    def __post_init__(self):
        if not self.datasets or not self.methods:
            raise ValueError("run config needs at least one dataset and one method")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ValueError("method labels must be unique")


@dataclass(frozen=True)
class BenchmarkRecord:
    dataset_task: str
    method: str
    mase: float
    wql: float
    wall_seconds: float
    seed: int
    backend_version: str
    error: str | None = None

    def to_json(self) -> str:
        d = {
            "dataset_task": self.dataset_task,
            "method": self.method,
            "mase": self.mase,
            "wql": self.wql,
            "wall_seconds": self.wall_seconds,
            "seed": self.seed,
            "backend_version": self.backend_version,
        }
        if self.error is not None:
            d["error"] = self.error
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "BenchmarkRecord":
        d = json.loads(line)
        return cls(
            dataset_task=d["dataset_task"],
            method=d["method"],
            mase=d.get("mase"),
            wql=d.get("wql"),
            wall_seconds=d.get("wall_seconds", 0.0),
            seed=d.get("seed", 0),
            backend_version=d.get("backend_version", "unknown"),
            error=d.get("error"),
        )


@dataclass(frozen=True)
class EvalTask:
    """A forecast task plus the held-out actuals it is scored against."""

    dataset_task: str
    task: ForecastTask
    actual: np.ndarray
    seasonality: int


def make_tasks(manifest: DatasetManifest, term: str) -> list[EvalTask]:
    """Final-window evaluation split: history is everything before the last H steps."""
    if term not in manifest.horizon_by_term:
        raise ValueError(f"manifest {manifest.name!r} has no horizon for term {term!r}")
    series = load_dataset(manifest)
    horizon = manifest.horizon_by_term[term]
    m = manifest.seasonality or seasonality_for(manifest.frequency)
    if series.num_steps <= horizon + m:
        raise HistoryTooShort(
            f"{manifest.name}: {series.num_steps} steps <= horizon {horizon} + seasonality {m}"
        )
    split = series.num_steps - horizon
    history = MultivariateSeries(
        timestamps=series.timestamps[:split],
        channels=series.channels,
        values=series.values[:split],
        frequency=series.frequency,
    )
    task = ForecastTask(history=history, horizon=horizon)
    name = f"{manifest.name}/{manifest.frequency.code()}/{term}"
    return [EvalTask(dataset_task=name, task=task, actual=series.values[split:], seasonality=m)]


def evaluate_method(eval_task: EvalTask, method: MethodSpec, quantile_levels, seed: int):
    """Run one (task, method) cell; returns (mase, wql, backend_version)."""
    task = eval_task.task
    history = rollout.truncate_history(task.history, method.context_limit)
    transformed, state = transform.fit_transform(history, method.norm)
    spec = method.feature_spec or default_spec_for(history.frequency)
    backend = make_backend(method.backend, season_length=eval_task.seasonality)
    try:
        work = ForecastTask(
            history=transformed,
            horizon=task.horizon,
            quantile_levels=tuple(quantile_levels),
            mode=method.mode,
            context_limit=None,  # truncation already applied
        )
        forecast = rollout.predict(work, backend, spec, seed=seed)
        forecast = transform.inverse(forecast, state)
        score_mase = mase(eval_task.actual, forecast.mean, history.values, eval_task.seasonality)
        score_wql = wql(eval_task.actual, forecast.quantiles, tuple(quantile_levels))
        return score_mase, score_wql, getattr(backend, "version", "unknown")
    finally:
        close = getattr(backend, "close", None)
        if close is not None:
            close()


def run(config: RunConfig) -> list[BenchmarkRecord]:
    """Evaluate the full (dataset x term x method) matrix.

    Per-cell failures are recorded with an error tag and the run continues;
    the run itself fails only if every cell failed. Records are appended to
    <output_dir>/records.jsonl as they complete, one JSON object per line.
    """
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_run_metadata(config, out_dir / "run_meta.json")
    records: list[BenchmarkRecord] = []
    with open(out_dir / "records.jsonl", "w") as sink:
        for manifest in config.datasets:
            for term in config.terms:
                if term not in manifest.horizon_by_term:
                    continue
                for eval_task in make_tasks(manifest, term):
                    for method in config.methods:
                        started = time.perf_counter()
                        try:
                            m, q, version = evaluate_method(
                                eval_task, method, config.quantile_levels, config.seed
                            )
                            record = BenchmarkRecord(
                                dataset_task=eval_task.dataset_task,
                                method=method.label,
                                mase=m,
                                wql=q,
                                wall_seconds=time.perf_counter() - started,
                                seed=config.seed,
                                backend_version=version,
                            )
                        except Exception as exc:  # noqa: BLE001 - cell isolation
                            record = BenchmarkRecord(
                                dataset_task=eval_task.dataset_task,
                                method=method.label,
                                mase=None,
                                wql=None,
                                wall_seconds=time.perf_counter() - started,
                                seed=config.seed,
                                backend_version="unknown",
                                error=f"{type(exc).__name__}: {exc}",
                            )
                        records.append(record)
                        sink.write(record.to_json() + "\n")
                        sink.flush()
    if records and all(r.error is not None for r in records):
        raise RollcastError("all benchmark cells failed; see records for details")
    return records


def write_run_metadata(config: RunConfig, path: Path):
    meta = {
        "methods": [m.to_dict() for m in config.methods],
        "datasets": [m.name for m in config.datasets],
        "terms": list(config.terms),
        "quantile_levels": list(config.quantile_levels),
        "seed": config.seed,
        "metric_pooling": "pooled-channels",
        "generator_prng": "numpy-pcg64",
    }
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class CompareResult:
    """Per-dataset win indicators of candidate vs baseline (strictly lower MASE)."""

    baseline: str
    candidate: str
    rows: tuple[tuple[str, float, float, int], ...]  # (dataset, base, cand, win)
    win_fraction: float


def compare(records, baseline_method: str, candidate_method: str) -> CompareResult:
    cells: dict[str, dict[str, float]] = {}
    for rec in records:
        if getattr(rec, "error", None) is not None:
            continue
        if rec.method in (baseline_method, candidate_method):
            cells.setdefault(rec.dataset_task, {})[rec.method] = rec.mase
    rows = []
    for ds in sorted(cells):
        pair = cells[ds]
        if baseline_method not in pair or candidate_method not in pair:
            missing = baseline_method if baseline_method not in pair else candidate_method
            raise MissingCell(f"method {missing!r} has no record for {ds!r}")
        base, cand = pair[baseline_method], pair[candidate_method]
        rows.append((ds, base, cand, int(cand < base)))
    if not rows:
        raise MissingCell("no shared datasets between the two methods")
    wins = sum(r[3] for r in rows)
    return CompareResult(
        baseline=baseline_method,
        candidate=candidate_method,
        rows=tuple(rows),
        win_fraction=wins / len(rows),
    )


def import_external(path: str | Path) -> list[BenchmarkRecord]:
    """Read externally produced results (dataset_task, method, mase, wql)."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"dataset_task", "method", "mase", "wql"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise SchemaError(
                f"external results need columns {sorted(required)}, got {reader.fieldnames}"
            )
        records = []
        for row in reader:
            records.append(
                BenchmarkRecord(
                    dataset_task=row["dataset_task"],
                    method=row["method"],
                    mase=float(row["mase"]),
                    wql=float(row["wql"]),
                    wall_seconds=0.0,
                    seed=0,
                    backend_version="imported",
                )
            )
    return records


def load_reference_results(name: str) -> list[BenchmarkRecord]:
    """Shipped reference result files ('mv_pair' or 'sota')."""
    filename = f"reference_results_{name}.csv"
    resource = importlib.resources.files("rollcast.fixtures") / filename
    with importlib.resources.as_file(resource) as path:
        return import_external(path)


def read_records(path: str | Path) -> list[BenchmarkRecord]:
    records = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            records.append(BenchmarkRecord.from_json(line))
    return records


def summary_table(summary: AggregateSummary) -> list[list[str]]:
    header = ["method", "mean_mase", "mean_wql", "rank_mase", "rank_wql", "n_datasets"]
    rows = [header]
    for row in summary.rows:
        rows.append(
            [
                row.method,
                f"{row.mean_mase:.4f}",
                f"{row.mean_wql:.4f}",
                f"{row.rank_mase:.4f}",
                f"{row.rank_wql:.4f}",
                str(row.num_datasets),
            ]
        )
    return rows


def compare_table(result: CompareResult) -> list[list[str]]:
    rows = [["dataset_task", result.baseline, result.candidate, "candidate_win"]]
    for ds, base, cand, win in result.rows:
        rows.append([ds, f"{base:.4f}", f"{cand:.4f}", str(win)])
    rows.append(["win_fraction", "", "", f"{result.win_fraction:.4f}"])
    return rows


def pivot_table(records, metric: str = "mase") -> list[list[str]]:
    """Datasets x methods table of one metric, for side-by-side comparison."""
    methods: list[str] = []
    cells: dict[str, dict[str, float]] = {}
    for rec in records:
        if getattr(rec, "error", None) is not None:
            continue
        if rec.method not in methods:
            methods.append(rec.method)
        cells.setdefault(rec.dataset_task, {})[rec.method] = getattr(rec, metric)
    rows = [["dataset_task", *methods]]
    for ds in sorted(cells):
        rows.append([ds] + [
            f"{cells[ds][m]:.4f}" if m in cells[ds] else "" for m in methods
        ])
    return rows


def write_csv(rows: list[list[str]], path: str | Path):
    with open(path, "w", newline="") as f:
        csv.writer(f).writerows(rows)


def write_markdown(rows: list[list[str]], path: str | Path):
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for k, row in enumerate(rows):
        lines.append("| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |")
        if k == 0:
            lines.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
    Path(path).write_text("\n".join(lines) + "\n")
