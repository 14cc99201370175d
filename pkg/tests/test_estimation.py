import io

import numpy as np
import pytest

from entropy_monitor.corpus import FeatureTable
from entropy_monitor.errors import DomainOverlap, EmptyDomain, EmptyHoldout
from entropy_monitor.estimation import (
    estimate_domain,
    evaluate_holdout,
    weighted_group_accuracy,
    write_estimate_report,
)


class ConstantModel:
    def __init__(self, value, group=()):
        self.value = value
        self.metadata = {"group": list(group)}

    def predict_proba(self, X):
        return np.full(len(X), self.value)


class OracleModel:
    """Reads the label smuggled into feature column 0."""

    metadata = {"group": []}

    def predict_proba(self, X):
        return np.asarray(X)[:, 0].astype(float)


def make_table(spec):
    """spec: {domain: list of labels}; feature column 0 carries the label."""
    ids, doms, labels = [], [], []
    for d, ys in spec.items():
        for i, y in enumerate(ys):
            ids.append(f"{d}-{i}")
            doms.append(d)
            labels.append(y)
    X = np.zeros((len(labels), 11))
    X[:, 0] = np.maximum(labels, 0)
    return FeatureTable(ids, doms, labels, X, np.zeros((len(labels), 9)))


class TestEstimateDomain:
    def test_examples(self):
        assert estimate_domain([1, 1, 1]) == 1.0
        assert estimate_domain([0.2, 0.4, 0.9]) == pytest.approx(0.5, abs=1e-15)

    def test_empty(self):
        with pytest.raises(EmptyDomain):
            estimate_domain([])

    def test_range(self):
        with pytest.raises(ValueError):
            estimate_domain([0.5, 1.2])

    def test_calibrated_probabilities_concentrate(self, rng):
        p = rng.uniform(0.2, 0.9, 500)
        y = rng.random(500) < p
        stderr = np.sqrt(y.mean() * (1 - y.mean()) / 500)
        assert abs(estimate_domain(p) - y.mean()) <= 2 * stderr

    def test_large_n_limit(self, rng):
        p = rng.uniform(0, 1, 10_000)
        y = rng.random(10_000) < p
        assert abs(estimate_domain(p) - y.mean()) <= 0.01

    def test_shard_invariance(self, rng):
        p = rng.random(101)
        shards = [p[:30], p[30:77], p[77:]]
        recombined = sum(estimate_domain(s) * s.size for s in shards) / p.size
        assert recombined == pytest.approx(estimate_domain(p), abs=1e-15)
        assert estimate_domain(p[::-1]) == pytest.approx(estimate_domain(p), abs=1e-15)


class TestEvaluateHoldout:
    def test_constant_model(self):
        table = make_table({"A": [1, 1, 0, 0, 0], "B": [1, 1, 1, 0, 0], "T": [1, 0]})
        s = evaluate_holdout(ConstantModel(0.5, ["T"]), table, ["A", "B"])
        assert s.aee == pytest.approx(0.10, abs=1e-15)
        # constant estimates: rank correlation undefined, reported as n/a
        assert s.spearman is None

    def test_constant_truths_give_na_spearman(self):
        table = make_table({"A": [1, 0], "B": [0, 1], "T": [1, 0]})
        s = evaluate_holdout(ConstantModel(0.5, ["T"]), table, ["A", "B"])
        assert s.spearman is None and s.aee == 0.0

    def test_oracle_model(self):
        table = make_table({"A": [1, 0, 0], "B": [1, 1, 0], "C": [1, 1, 1, 0]})
        s = evaluate_holdout(OracleModel(), table, ["A", "B", "C"], group=())
        assert s.aee == 0.0 and s.spearman == 1.0

    def test_overlap_and_empty(self):
        table = make_table({"A": [1, 0], "B": [0, 1]})
        with pytest.raises(DomainOverlap):
            evaluate_holdout(ConstantModel(0.5, ["A"]), table, ["A", "B"])
        with pytest.raises(EmptyHoldout):
            evaluate_holdout(ConstantModel(0.5, ["A"]), table, [])
        with pytest.raises(EmptyDomain):
            evaluate_holdout(ConstantModel(0.5, ["A"]), table, ["Z"])

    def test_unlabelled_holdout(self):
        table = make_table({"A": [-1, -1, -1], "T": [1, 0]})
        s = evaluate_holdout(ConstantModel(0.25, ["T"]), table, ["A"])
        assert s.aee is None
        assert s.estimates[0].true_accuracy is None
        buf = io.StringIO()
        write_estimate_report(s.estimates, buf)
        assert buf.getvalue().splitlines() == [
            "domain_id,n,estimated_accuracy,true_accuracy,abs_error",
            "A,3,0.25,,",
        ]


def test_weighted_group_accuracy():
    table = make_table({"A": [1, 0, 0, 0], "B": [1, 1]})
    # (4 * 0.25 + 2 * 1.0) / 6, the pooled accuracy
    assert weighted_group_accuracy(table, ["A", "B"]) == pytest.approx(0.5)
    assert weighted_group_accuracy(table, ["A"]) == pytest.approx(0.25)
