"""Evaluation statistics: rank-based AUROC, Spearman rho, AEE, ECE and the
per-domain single-statistic diagnostic table."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .baselines import (
    BASELINE_NAMES,
    HIGHER_MEANS_INCORRECT,
    LOWER_MEANS_INCORRECT,
    ORIENTATION,
)
from .errors import DegenerateInput, DomainMismatch, EmptyInput, SingleClass
from .features import FEATURE_NAMES, quantile


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(x.size)
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], x.size]
    avg = (starts + ends + 1) / 2.0
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auroc_binary(scores, positive) -> float:
    """P(score of a random positive > score of a random negative), ties count 1/2."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    pos = np.asarray(positive, dtype=bool).reshape(-1)
    if s.size != pos.size:
        raise ValueError("scores and labels differ in length")
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUROC needs both classes")
    r = average_ranks(s)
    u = float(r[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass
class ScoredLabels:
    """Scores with correctness labels (1 = correct) and the score's orientation."""

    scores: np.ndarray
    labels: np.ndarray
    orientation: str = HIGHER_MEANS_INCORRECT

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        self.labels = np.asarray(self.labels).reshape(-1).astype(np.int64)
        if self.scores.size != self.labels.size:
            raise ValueError("scores and labels differ in length")
        if self.orientation not in (HIGHER_MEANS_INCORRECT, LOWER_MEANS_INCORRECT):
            raise ValueError(f"unknown orientation {self.orientation!r}")


def auroc(scored: ScoredLabels) -> float:
    """AUROC for flagging the incorrect class, after orienting the score."""
    s = scored.scores if scored.orientation == HIGHER_MEANS_INCORRECT else -scored.scores
    return auroc_binary(s, scored.labels == 0)


def spearman(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size != y.size:
        raise DegenerateInput("spearman inputs differ in length")
    if x.size < 2:
        raise DegenerateInput("spearman needs at least two points")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInput("spearman undefined for a constant input")
    rx = average_ranks(x)
    ry = average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    rho = float(np.dot(rx, ry) / math.sqrt(float(np.dot(rx, rx)) * float(np.dot(ry, ry))))
    return min(1.0, max(-1.0, rho))


def aee(estimates, truths) -> float:
    """Mean absolute error between estimated and true per-domain accuracies.

    Accepts two mappings keyed by domain (keys must match) or two aligned
    sequences.
    """
    if isinstance(estimates, Mapping) or isinstance(truths, Mapping):
        if not (isinstance(estimates, Mapping) and isinstance(truths, Mapping)):
            raise DomainMismatch("pass two mappings or two sequences")
        if set(estimates) != set(truths):
            raise DomainMismatch(
                f"domains differ: {sorted(set(estimates) ^ set(truths))}"
            )
        keys = sorted(estimates)
        est = np.array([estimates[k] for k in keys], dtype=np.float64)
        tru = np.array([truths[k] for k in keys], dtype=np.float64)
    else:
        est = np.asarray(estimates, dtype=np.float64).reshape(-1)
        tru = np.asarray(truths, dtype=np.float64).reshape(-1)
        if est.size != tru.size:
            raise DomainMismatch("estimate and truth vectors differ in length")
    if est.size == 0:
        raise DomainMismatch("no domains to compare")
    return float(np.mean(np.abs(est - tru)))


def expected_calibration_error(probs, labels, n_bins: int = 10) -> float:
    """Equal-width-bin ECE: sum over bins of (bin share) * |mean prob - mean label|."""
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise EmptyInput("ECE of an empty sample")
    bins = np.minimum((p * n_bins).astype(np.int64), n_bins - 1)
    total = 0.0
    for b in range(n_bins):
        m = bins == b
        if m.any():
            total += m.sum() / p.size * abs(p[m].mean() - y[m].mean())
    return float(total)


# -- per-domain diagnostic table -------------------------------------------------

DIAGNOSTIC_STATISTICS = FEATURE_NAMES + BASELINE_NAMES


@dataclass
class DiagnosticTable:
    statistics: tuple[str, ...]
    domains: tuple[str, ...]
    # (statistic, domain) -> AUROC, or None where the domain has a single class
    cells: dict[tuple[str, str], float | None] = field(default_factory=dict)

    def get(self, statistic, domain):
        return self.cells[(statistic, domain)]

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["statistic", "orientation", *self.domains])
        for stat in self.statistics:
            row = [stat, ORIENTATION[stat]]
            for d in self.domains:
                v = self.cells[(stat, d)]
                row.append("n/a" if v is None else repr(v))
            writer.writerow(row)


def diagnose(table) -> DiagnosticTable:
    """AUROC of every profile statistic and baseline, per domain.

    Every cell reads as "probability a random incorrect answer outranks a
    random correct one" once the metric's orientation is applied.
    """
    labels = table.labels
    if np.any(labels < 0):
        raise EmptyInput("diagnose needs a fully labelled feature cache")
    columns = {name: table.X[:, i] for i, name in enumerate(FEATURE_NAMES)}
    columns.update({name: table.B[:, i] for i, name in enumerate(BASELINE_NAMES)})
    domains = tuple(table.domain_list())
    result = DiagnosticTable(DIAGNOSTIC_STATISTICS, domains)
    for d in domains:
        m = table.domain_ids == d
        for stat in DIAGNOSTIC_STATISTICS:
            scored = ScoredLabels(columns[stat][m], labels[m], ORIENTATION[stat])
            try:
                result.cells[(stat, d)] = auroc(scored)
            except SingleClass:
                result.cells[(stat, d)] = None
    return result


def median_iqr(values: Sequence[float]) -> tuple[float, float]:
    return quantile(values, 0.5), quantile(values, 0.75) - quantile(values, 0.25)
