"""Confusion-matrix metrics and multi-seed summaries.

Normal is the positive class throughout: sensitivity is recall of normal
reports, specificity is recall of abnormal reports.
"""

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import EmptyInput, InvalidLabel, ShapeError
from .labeling import Label

METRIC_NAMES = ("accuracy", "sensitivity", "specificity", "precision", "f1")


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


@dataclass(frozen=True)
class EvalResult:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0 or self.total < 1:
            raise ShapeError("confusion counts must be non-negative with total >= 1")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> Optional[float]:
        return _ratio(self.tp + self.tn, self.total)

    @property
    def sensitivity(self) -> Optional[float]:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def specificity(self) -> Optional[float]:
        return _ratio(self.tn, self.tn + self.fp)

    @property
    def precision(self) -> Optional[float]:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def f1(self) -> Optional[float]:
        prec, sens = self.precision, self.sensitivity
        if prec is None or sens is None or prec + sens == 0:
            return None
        return 2.0 * prec * sens / (prec + sens)

    def metric(self, name: str) -> Optional[float]:
        if name not in METRIC_NAMES:
            raise KeyError(name)
        return getattr(self, name)


def confusion(predictions: Sequence[Label], gold: Sequence[Label]) -> EvalResult:
    """Accumulate confusion counts with Normal as the positive class."""
    if len(predictions) != len(gold):
        raise ShapeError(f"length mismatch: {len(predictions)} predictions vs {len(gold)} gold")
    if len(gold) == 0:
        raise ShapeError("empty evaluation")
    tp = fp = tn = fn = 0
    for pred, ref in zip(predictions, gold):
        if Label.UNCERTAIN in (pred, ref):
            raise InvalidLabel("Uncertain labels are excluded from evaluation")
        if pred is Label.NORMAL:
            if ref is Label.NORMAL:
                tp += 1
            else:
                fp += 1
        else:
            if ref is Label.ABNORMAL:
                tn += 1
            else:
                fn += 1
    return EvalResult(tp=tp, fp=fp, tn=tn, fn=fn)


@dataclass(frozen=True)
class SeedSummary:
    n_seeds: int
    mean: dict[str, Optional[float]]
    std: dict[str, Optional[float]]


def seed_summary(results: Sequence[EvalResult]) -> SeedSummary:
    """Per-metric mean and sample (n-1) standard deviation over seeds.

    Undefined metrics (zero denominators) are skipped rather than coerced
    to 0, to avoid biasing the means.
    """
    if not results:
        raise EmptyInput("no results to summarize")
    mean: dict[str, Optional[float]] = {}
    std: dict[str, Optional[float]] = {}
    for name in METRIC_NAMES:
        values = [v for r in results if (v := r.metric(name)) is not None]
        if not values:
            mean[name] = std[name] = None
            continue
        m = sum(values) / len(values)
        mean[name] = m
        if len(values) < 2:
            std[name] = 0.0
        else:
            std[name] = math.sqrt(sum((v - m) ** 2 for v in values) / (len(values) - 1))
    return SeedSummary(n_seeds=len(results), mean=mean, std=std)


def write_results_csv(path, rows: Sequence[dict]) -> None:
    """Emit one row per (model, experiment, distribution, evaluation_set, seed, metric)."""
    fieldnames = ["model", "experiment", "distribution", "evaluation_set", "seed", "metric", "value"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def result_rows(
    result: EvalResult,
    *,
    model: str,
    experiment: str,
    distribution: str,
    evaluation_set: str,
    seed,
) -> list[dict]:
    rows = []
    for name in METRIC_NAMES:
        value = result.metric(name)
        rows.append(
            {
                "model": model,
                "experiment": experiment,
                "distribution": distribution,
                "evaluation_set": evaluation_set,
                "seed": seed,
                "metric": name,
                "value": "" if value is None else f"{value:.6f}",
            }
        )
    return rows


def summary_rows(summary: SeedSummary, *, model, experiment, distribution, evaluation_set) -> list[dict]:
    rows = []
    for name in METRIC_NAMES:
        m, s = summary.mean[name], summary.std[name]
        rows.append(
            {
                "model": model,
                "experiment": experiment,
                "distribution": distribution,
                "evaluation_set": evaluation_set,
                "seed": "mean",
                "metric": name,
                "value": "" if m is None else f"{m:.6f}",
            }
        )
        rows.append(
            {
                "model": model,
                "experiment": experiment,
                "distribution": distribution,
                "evaluation_set": evaluation_set,
                "seed": "std",
                "metric": name,
                "value": "" if s is None else f"{s:.6f}",
            }
        )
    return rows
