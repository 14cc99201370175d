"""Domain-level accuracy estimates: the mean predicted correctness probability."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import FeatureTable
from .errors import DegenerateInput, DomainOverlap, EmptyDomain, EmptyHoldout
from .evaluation import aee as _aee
from .evaluation import spearman


@dataclass(frozen=True)
class DomainEstimate:
    domain_id: str
    n_instances: int
    estimated_accuracy: float
    true_accuracy: float | None = None

    @property
    def abs_error(self) -> float | None:
        if self.true_accuracy is None:
            return None
        return abs(self.estimated_accuracy - self.true_accuracy)


@dataclass
class GroupSummary:
    group: tuple[str, ...]
    weighted_group_accuracy: float | None
    estimates: list[DomainEstimate] = field(default_factory=list)
    aee: float | None = None
    spearman: float | None = None


def estimate_domain(probs) -> float:
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise EmptyDomain("cannot estimate accuracy of an empty domain")
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    return math.fsum(p.tolist()) / p.size


def true_accuracy(labels) -> float | None:
    y = np.asarray(labels)
    if y.size == 0 or np.any(y < 0):
        return None
    return float(np.mean(y))


def weighted_group_accuracy(table: FeatureTable, group) -> float | None:
    """Sum of n_D * A(D) over sum of n_D, i.e. the pooled accuracy of the group."""
    num = 0.0
    den = 0
    for d in group:
        y = table.labels[table.domain_ids == d]
        acc = true_accuracy(y)
        if acc is None:
            return None
        num += y.size * acc
        den += y.size
    return num / den if den else None


def estimate_domains(model, table: FeatureTable, domains) -> list[DomainEstimate]:
    domains = list(domains)
    mask = table.domain_mask(domains)
    probs = model.predict_proba(table.X[mask]) if mask.any() else np.empty(0)
    dom_ids = table.domain_ids[mask]
    labels = table.labels[mask]
    out = []
    for d in domains:
        m = dom_ids == d
        if not m.any():
            raise EmptyDomain(f"domain {d!r} has no instances")
        out.append(DomainEstimate(d, int(m.sum()), estimate_domain(probs[m]),
                                  true_accuracy(labels[m])))
    return out


def summarize_estimates(group, wga, estimates) -> GroupSummary:
    summary = GroupSummary(tuple(group), wga, list(estimates))
    if estimates and all(e.true_accuracy is not None for e in estimates):
        est = [e.estimated_accuracy for e in estimates]
        tru = [e.true_accuracy for e in estimates]
        summary.aee = _aee(est, tru)
        try:
            summary.spearman = spearman(est, tru)
        except DegenerateInput:
            summary.spearman = None
    return summary


def evaluate_holdout(model, table: FeatureTable, holdout, group=None) -> GroupSummary:
    """Estimate each held-out domain; AEE and Spearman when labels allow."""
    holdout = sorted(set(holdout))
    if not holdout:
        raise EmptyHoldout("no held-out domains to evaluate")
    if group is None:
        group = model.metadata.get("group", ())
    group = tuple(sorted(group))
    overlap = set(group) & set(holdout)
    if overlap:
        raise DomainOverlap(f"held-out domains also in the training group: {sorted(overlap)}")
    wga = weighted_group_accuracy(table, group) if group else None
    return summarize_estimates(group, wga, estimate_domains(model, table, holdout))


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_estimate_report(estimates, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["domain_id", "n", "estimated_accuracy", "true_accuracy", "abs_error"])
    for e in estimates:
        writer.writerow([e.domain_id, e.n_instances, _fmt(e.estimated_accuracy),
                         _fmt(e.true_accuracy), _fmt(e.abs_error)])
