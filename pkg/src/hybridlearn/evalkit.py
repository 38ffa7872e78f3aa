"""Crash-classification scores and crash-time error distributions."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

RESULTS_HEADER = ("strategy", "n_train", "seed", "ce", "tpr", "ppv", "f1")
CDF_HEADER = ("strategy", "n_train", "error", "cum_pct")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Scores:
    ce: float
    tpr: float | None
    ppv: float | None
    f1: float | None


def confusion(truth, predicted) -> ConfusionCounts:
    tp = fp = tn = fn = 0
    for t, p in zip(truth, predicted, strict=True):
        if t and p:
            tp += 1
        elif p:
            fp += 1
        elif t:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def score(counts: ConfusionCounts) -> Scores:
    """CE in percent; TPR, PPV and F1 as fractions, None where undefined."""
    if counts.n == 0:
        raise ValueError("empty validation set")
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    ce = (fp + fn) / counts.n * 100.0
    tpr = tp / (tp + fn) if tp + fn else None
    ppv = tp / (tp + fp) if tp + fp else None
    f1 = 2 * tp / (2 * tp + fp + fn) if tp + fp + fn else None
    return Scores(ce, tpr, ppv, f1)


def crash_time_errors(truth_times, predicted_times) -> list[int]:
    """Absolute step differences over sequences where both times exist."""
    return [abs(t - p) for t, p in zip(truth_times, predicted_times, strict=True)
            if t is not None and p is not None]


def cdf(errors) -> list[tuple[int, float]]:
    """Empirical CDF as ``(value, cumulative percent)`` at each distinct value."""
    n = len(errors)
    out = []
    seen = 0
    for value, count in sorted(Counter(errors).items()):
        seen += count
        out.append((value, 100.0 * seen / n))
    return out


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def results_row(strategy: str, n_train: int, seed: int, s: Scores) -> list:
    return [strategy, n_train, seed, _fmt(s.ce), _fmt(s.tpr), _fmt(s.ppv), _fmt(s.f1)]


def write_results(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RESULTS_HEADER)
        w.writerows(rows)


def read_results(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cdf_rows(strategy: str, n_train: int, points) -> list:
    return [[strategy, n_train, v, repr(float(pct))] for v, pct in points]


def write_cdf(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CDF_HEADER)
        w.writerows(rows)
