import io

import numpy as np
import pytest

from entropy_monitor.corpus import extract_features
from entropy_monitor.errors import DegenerateInput, DomainMismatch, EmptyInput, SingleClass
from entropy_monitor.evaluation import (
    DIAGNOSTIC_STATISTICS,
    ScoredLabels,
    aee,
    auroc,
    auroc_binary,
    average_ranks,
    diagnose,
    expected_calibration_error,
    median_iqr,
    spearman,
)
from entropy_monitor.synth import evenly_spaced_spec, generate
from oracles import auroc_pairs


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc(ScoredLabels([3, 4, 1, 2], [0, 0, 1, 1])) == 1.0

    def test_constant_scores(self):
        assert auroc(ScoredLabels([1, 1, 1, 1], [0, 1, 0, 1])) == 0.5

    def test_worked_examples(self):
        # labels here are "incorrect" flags: 1 = incorrect
        incorrect = np.array([0, 0, 1, 1])
        assert auroc_binary([1, 2, 3, 4], incorrect == 1) == 1.0
        assert auroc_binary([1, 3, 2, 4], incorrect == 1) == 0.75

    def test_single_class(self):
        with pytest.raises(SingleClass):
            auroc(ScoredLabels([1, 2], [1, 1]))

    def test_complement_and_monotone_invariance(self, rng):
        for _ in range(100):
            s = rng.normal(size=20)
            y = rng.random(20) < 0.4
            if y.all() or not y.any():
                continue
            a = auroc_binary(s, y)
            assert a + auroc_binary(-s, y) == pytest.approx(1.0, abs=1e-15)
            assert auroc_binary(np.exp(3 * s), y) == a

    def test_pair_count_with_ties(self, rng):
        for _ in range(300):
            n = int(rng.integers(2, 13))
            s = rng.integers(0, 3, n).astype(float)
            y = rng.random(n) < 0.5
            if y.all() or not y.any():
                continue
            assert auroc_binary(s, y) == float(auroc_pairs(s.tolist(), y.tolist()))

    def test_orientation_flip(self):
        s = [0.1, 0.4, 0.35, 0.8]
        labels = [1, 1, 0, 0]
        hi = auroc(ScoredLabels(s, labels, "higher_means_incorrect"))
        lo = auroc(ScoredLabels(s, labels, "lower_means_incorrect"))
        assert hi + lo == pytest.approx(1.0)


class TestSpearman:
    def test_examples(self):
        assert spearman([1, 2, 3], [10, 100, 1000]) == 1.0
        assert spearman([1, 2, 3], [3, 2, 1]) == -1.0
        assert spearman([1, 2, 3, 4, 5], [1, 3, 2, 5, 4]) == pytest.approx(0.8, abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateInput):
            spearman([1], [2])
        with pytest.raises(DegenerateInput):
            spearman([1, 1, 1], [1, 2, 3])

    def test_average_ranks(self):
        np.testing.assert_array_equal(average_ranks([10, 20, 20, 5]), [2, 3.5, 3.5, 1])

    def test_monotone_invariance(self, rng):
        x, y = rng.normal(size=15), rng.normal(size=15)
        assert spearman(x, y) == pytest.approx(spearman(np.exp(x), y ** 3), abs=1e-15)


class TestAee:
    def test_examples(self):
        assert aee([0.3, 0.4], [0.3, 0.4]) == 0.0
        assert aee([0.5, 0.7], [0.6, 0.6]) == pytest.approx(0.10, abs=1e-15)
        assert aee([0.53, 0.5, 0.46], [0.5, 0.5, 0.52]) == pytest.approx(0.03, abs=1e-15)

    def test_mappings(self):
        assert aee({"a": 0.2, "b": 0.4}, {"b": 0.5, "a": 0.2}) == pytest.approx(0.05)
        with pytest.raises(DomainMismatch):
            aee({"a": 0.2}, {"b": 0.2})
        with pytest.raises(DomainMismatch):
            aee([0.1, 0.2], [0.1])

    def test_properties(self, rng):
        x, y = rng.random(6), rng.random(6)
        assert aee(x, y) == aee(y, x)
        assert aee(x, y) <= np.max(np.abs(x - y))


class TestEce:
    def test_perfect(self):
        assert expected_calibration_error([0.0, 0.0, 1.0, 1.0], [0, 0, 1, 1]) == 0.0

    def test_single_bin(self):
        assert expected_calibration_error([0.55, 0.55], [1, 1]) == pytest.approx(0.45)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            expected_calibration_error([], [])


def test_median_iqr():
    assert median_iqr([0.1, 0.2, 0.3]) == (pytest.approx(0.2), pytest.approx(0.1))
    assert median_iqr([0.4]) == (0.4, 0.0)


class TestDiagnose:
    def test_separated_corpus_all_entropy_cells_one(self):
        table = extract_features(generate(evenly_spaced_spec(n_domains=3, n_instances=60,
                                                            acc_range=(0.3, 0.7), separation=12.0)))
        diag = diagnose(table)
        for d in diag.domains:
            for stat in ("h_max", "h_mean", "h_q50", "h_sea", "se_avg"):
                assert diag.get(stat, d) > 0.97
            assert diag.get("h_mean", d) == 1.0

    def test_independent_corpus_near_half(self):
        spec = evenly_spaced_spec(n_domains=2, n_instances=400, acc_range=(0.5, 0.5), separation=1e-9)
        table = extract_features(generate(spec))
        diag = diagnose(table)
        for d in diag.domains:
            assert abs(diag.get("h_mean", d) - 0.5) < 0.1

    def test_single_class_domain_is_na(self):
        spec = evenly_spaced_spec(n_domains=2, n_instances=30, acc_range=(1.0, 0.5))
        diag = diagnose(extract_features(generate(spec)))
        assert diag.get("h_mean", "D00") is None
        assert diag.get("h_mean", "D01") is not None
        buf = io.StringIO()
        diag.write_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "statistic,orientation,D00,D01"
        assert len(lines) == 1 + len(DIAGNOSTIC_STATISTICS)
        assert lines[1].split(",")[2] == "n/a"
