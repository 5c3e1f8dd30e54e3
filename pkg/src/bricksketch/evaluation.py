"""Error metrics, space-accuracy sweeps, and throughput benchmarks.

AAE, ARE, and MSE average absolute, relative, and squared estimate error
over the distinct items of a stream. Sweeps run a (kind x budget) grid over
one stream and emit one report row per cell; throughput times a single
operation over an in-memory stream, excluding generation and file I/O.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import hashing
from .baselines import make_sketch
from .nn import WeightBundle
from .sketch import RULE_ONLY
from .streams import FrequencyTable

REPORT_CSV_HEADER = "kind,budget_bytes,aae,are,mse,n,N,seed,ms"


@dataclass
class EstimateReport:
    """Per-item truth vs estimate with aggregates and run metadata."""

    kind: str
    budget_bytes: int
    seed: int
    rows: list[tuple[bytes, float, float]] = field(default_factory=list)
    aae: float = 0.0
    are: float = 0.0
    mse: float = 0.0
    n_distinct: int = 0
    stream_length: int = 0
    wall_ms: float = 0.0

    def aggregates(self) -> tuple[float, float, float]:
        return self.aae, self.are, self.mse


def metrics(truth: FrequencyTable, estimates: dict[bytes, float]) -> tuple[float, float, float]:
    """(AAE, ARE, MSE) over the distinct items of the truth table.

    Every truth item must have an estimate; truth counts are >= 1 so the
    relative error denominator is always safe.
    """
    if not truth.counts:
        return 0.0, 0.0, 0.0
    aae = are = mse = 0.0
    for item, f in truth.counts.items():
        if item not in estimates:
            raise ValueError(f"missing estimate for item {item!r}")
        err = abs(estimates[item] - f)
        aae += err
        are += err / f
        mse += err * err
    n = len(truth.counts)
    return aae / n, are / n, mse / n


def metrics_arrays(truth: np.ndarray, est: np.ndarray) -> tuple[float, float, float]:
    """Vectorized metrics over aligned truth/estimate arrays."""
    err = np.abs(est.astype(np.float64) - truth.astype(np.float64))
    return float(err.mean()), float((err / truth).mean()), float((err * err).mean())


def evaluate_sketch(
    sketch,
    kind: str,
    budget_bytes: int,
    items: list[bytes],
    truth: FrequencyTable,
    seed: int,
    keep_rows: bool = True,
) -> EstimateReport:
    """Store the whole stream, query every distinct item, aggregate."""
    start = time.perf_counter()
    sketch.store_many(items)
    distinct = sorted(truth.counts.keys())
    est = sketch.query_many(distinct)
    wall_ms = (time.perf_counter() - start) * 1000.0
    truths = np.array([truth.counts[it] for it in distinct], dtype=np.float64)
    aae, are, mse = metrics_arrays(truths, est)
    report = EstimateReport(
        kind=kind,
        budget_bytes=budget_bytes,
        seed=seed,
        aae=aae,
        are=are,
        mse=mse,
        n_distinct=len(distinct),
        stream_length=len(items),
        wall_ms=wall_ms,
    )
    if keep_rows:
        report.rows = [(it, float(t), float(e)) for it, t, e in zip(distinct, truths, est)]
    return report


def sweep(
    kinds: list[str],
    budgets_bytes: list[int],
    items: list[bytes],
    truth: FrequencyTable,
    seed: int = 42,
    mode: str = RULE_ONLY,
    bundle: WeightBundle | None = None,
    keep_rows: bool = False,
) -> list[EstimateReport]:
    """One report per (kind, budget) cell; the input stream is never
    mutated and per-cell seeds derive deterministically from the global one."""
    if not kinds or not budgets_bytes:
        raise ValueError("sweep needs at least one kind and one budget")
    reports = []
    for ki, kind in enumerate(kinds):
        for bi, budget in enumerate(budgets_bytes):
            cell_seed = hashing.mix64((seed << 16) ^ (ki << 8) ^ bi)
            sketch = make_sketch(kind, budget, seed=cell_seed, mode=mode, bundle=bundle)
            reports.append(
                evaluate_sketch(sketch, kind, budget, items, truth, cell_seed, keep_rows=keep_rows)
            )
    return reports


def throughput(
    kind: str,
    budget_bytes: int,
    items: list[bytes],
    op: str = "store",
    seed: int = 42,
    runs: int = 5,
    mode: str = RULE_ONLY,
    bundle: WeightBundle | None = None,
) -> float:
    """Single-thread operations per second over the full stream: one warm-up
    pass, then the median rate of `runs` timed passes."""
    if op not in ("store", "query"):
        raise ValueError(f"unknown op {op!r}")
    if op == "store":
        make_sketch(kind, budget_bytes, seed=seed, mode=mode, bundle=bundle).store_many(items)
        rates = []
        for _ in range(runs):
            sketch = make_sketch(kind, budget_bytes, seed=seed, mode=mode, bundle=bundle)
            t0 = time.perf_counter()
            sketch.store_many(items)
            rates.append(len(items) / (time.perf_counter() - t0))
        return float(np.median(rates))
    sketch = make_sketch(kind, budget_bytes, seed=seed, mode=mode, bundle=bundle)
    sketch.store_many(items)
    sketch.query_many(items)  # warm-up
    rates = []
    for _ in range(runs):
        t0 = time.perf_counter()
        sketch.query_many(items)
        rates.append(len(items) / (time.perf_counter() - t0))
    return float(np.median(rates))


def write_report_csv(reports: list[EstimateReport], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(REPORT_CSV_HEADER + "\n")
        for r in reports:
            fh.write(
                f"{r.kind},{r.budget_bytes},{r.aae!r},{r.are!r},{r.mse!r},"
                f"{r.n_distinct},{r.stream_length},{r.seed},{r.wall_ms:.3f}\n"
            )


def read_report_csv(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != REPORT_CSV_HEADER:
            raise ValueError(f"{path}: unexpected report header {header!r}")
        names = header.split(",")
        out = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(names):
                continue
            row = dict(zip(names, parts))
            for key in ("aae", "are", "mse", "ms"):
                row[key] = float(row[key])
            for key in ("budget_bytes", "n", "N", "seed"):
                row[key] = int(row[key])
            out.append(row)
        return out


def write_detail_csv(report: EstimateReport, path: str) -> None:
    """Optional per-item detail: item, truth, estimate."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("item,truth,estimate\n")
        for item, t, e in report.rows:
            fh.write(f"{item.decode('utf-8')},{t!r},{e!r}\n")


def report_json(report: EstimateReport) -> dict:
    return {
        "kind": report.kind,
        "budget_bytes": report.budget_bytes,
        "aae": report.aae,
        "are": report.are,
        "mse": report.mse,
        "n": report.n_distinct,
        "N": report.stream_length,
        "seed": report.seed,
        "ms": report.wall_ms,
    }


def write_report_json(reports: list[EstimateReport], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([report_json(r) for r in reports], fh, indent=2)
