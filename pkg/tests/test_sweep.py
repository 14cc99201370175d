import io
import json

import numpy as np
import pytest

from entropy_monitor.corpus import extract_features
from entropy_monitor.errors import ConfigError, EmptyBucket, KOutOfRange
from entropy_monitor.sweep import (
    DEFAULT_ESTIMATORS,
    EstimatorConfig,
    SweepConfig,
    SweepRow,
    aggregate,
    difficulty_pairs,
    enumerate_groups,
    expected_row_count,
    group_id,
    leave_one_out,
    read_results_csv,
    run_sweep,
    write_aggregate_csv,
    write_loo_csv,
    write_results_csv,
)
from entropy_monitor.synth import DomainSpec, SynthSpec, generate

LOGREG = EstimatorConfig("logreg_l1", False, False)
FOREST_CAL = EstimatorConfig("random_forest", True, True)


def csv_bytes(rows):
    buf = io.StringIO()
    write_results_csv(rows, buf)
    return buf.getvalue()


def fake_row(k, aee, calibrate=False, rho=0.5, status="ok"):
    group = tuple(f"D{i}" for i in range(k))
    return SweepRow(group, EstimatorConfig("logreg_l1", False, calibrate), "full11", status,
                    0.5, aee if status == "ok" else None, rho if status == "ok" else None)


class TestEnumerate:
    def test_counts(self):
        doms = [f"D{i}" for i in range(10)]
        assert len(enumerate_groups(doms, 2)) == 45
        assert sum(len(enumerate_groups(doms, k)) for k in (1, 2, 3, 4)) == 385
        assert enumerate_groups(["c", "a", "b"], 3) == [("a", "b", "c")]

    def test_lexicographic(self):
        assert enumerate_groups(["b", "a", "c"], 2) == [("a", "b"), ("a", "c"), ("b", "c")]

    def test_out_of_range(self):
        with pytest.raises(KOutOfRange):
            enumerate_groups(["a", "b"], 3)
        with pytest.raises(KOutOfRange):
            enumerate_groups(["a", "b"], 0)

    def test_group_id(self):
        assert group_id(("OlympiadBench", "GSM8K")) == "GSM8K+OlympiadBench"


class TestConfig:
    def test_default_estimators(self):
        assert len(DEFAULT_ESTIMATORS) == 12
        assert len({e.config_id for e in DEFAULT_ESTIMATORS}) == 12

    def test_round_trip(self):
        cfg = SweepConfig(k_values=(1, 2), estimators=(LOGREG, FOREST_CAL), seed=3)
        assert SweepConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
        assert EstimatorConfig.parse(FOREST_CAL.config_id) == FOREST_CAL

    def test_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            SweepConfig.from_dict({"k": [1]})
        with pytest.raises(ConfigError):
            SweepConfig.from_dict({"estimators": ["svm|balance=off|calibrate=off"]})

    def test_k_must_leave_a_holdout(self, small_table):
        with pytest.raises(ConfigError):
            run_sweep(small_table, SweepConfig(k_values=(5,), estimators=(LOGREG,)))


class TestRunSweep:
    def test_shape(self, small_table):
        table = small_table.select_domains(["D01", "D02", "D03", "D04"])
        res = run_sweep(table, SweepConfig(k_values=(1,), estimators=(FOREST_CAL,)))
        assert len(res.rows) == 4
        for r in res.rows:
            assert len(r.estimates) == 3
            assert not set(r.group) & {e.domain_id for e in r.estimates}

    def test_rows_and_determinism(self, small_table):
        cfg = SweepConfig(k_values=(1, 2), estimators=(LOGREG, FOREST_CAL))
        a = run_sweep(small_table, cfg)
        b = run_sweep(small_table, cfg)
        assert len(a.rows) == expected_row_count(5, cfg) == 30
        assert csv_bytes(a.rows) == csv_bytes(b.rows)

    def test_parallel_matches_serial(self, small_table):
        cfg = SweepConfig(k_values=(2,), estimators=(LOGREG, FOREST_CAL))
        serial = run_sweep(small_table, cfg)
        parallel = run_sweep(small_table, SweepConfig(k_values=(2,), estimators=(LOGREG, FOREST_CAL), workers=2))
        assert csv_bytes(serial.rows) == csv_bytes(parallel.rows)

    def test_weighted_group_accuracy_recomputed(self, small_table):
        res = run_sweep(small_table, SweepConfig(k_values=(2,), estimators=(LOGREG,)))
        for r in res.rows:
            y = small_table.labels[np.isin(small_table.domain_ids, r.group)]
            assert r.weighted_group_accuracy == pytest.approx(y.mean(), abs=1e-15)

    def test_untrainable_group_is_a_failed_row(self, small_table):
        # an all-correct domain has one class and cannot train
        spec = SynthSpec((DomainSpec("A", 40, 1.0), DomainSpec("B", 40, 0.5), DomainSpec("C", 40, 0.5)),
                         0.4, 1.0, 0.15)
        table = extract_features(generate(spec))
        res = run_sweep(table, SweepConfig(k_values=(1,), estimators=(LOGREG,)))
        status = {r.group: r.status for r in res.rows}
        assert status[("A",)] == "failed" and status[("B",)] == "ok"
        failed = [r for r in res.rows if not r.ok][0]
        assert "SingleClass" in failed.error

    def test_csv_round_trip(self, small_table):
        res = run_sweep(small_table, SweepConfig(k_values=(1,), estimators=(LOGREG,)))
        text = csv_bytes(res.rows)
        back = read_results_csv(io.StringIO(text))
        assert csv_bytes(back) == text


class TestLeaveOneOut:
    def test_three_domains(self, small_table):
        table = small_table.select_domains(["D01", "D02", "D03"])
        res = leave_one_out(table, SweepConfig(k_values=(1,), estimators=(LOGREG,)))
        assert len(res.loo_rows) == 3
        assert [r.estimates[0].domain_id for r in res.loo_rows] == ["D03", "D02", "D01"]
        key = (LOGREG.config_id, "full11")
        assert key in res.loo_spearman
        buf = io.StringIO()
        write_loo_csv(res, buf)
        assert len(buf.getvalue().splitlines()) >= 4

    def test_included_in_sweep(self, small_table):
        res = run_sweep(small_table, SweepConfig(k_values=(1,), estimators=(LOGREG,),
                                                 include_leave_one_out=True))
        assert len(res.loo_rows) == 5


class TestAggregate:
    def test_single_row(self):
        (a,) = aggregate([fake_row(1, 0.07)], "k")
        assert a.median_aee == 0.07 and a.iqr_aee == 0.0

    def test_three_rows(self):
        (a,) = aggregate([fake_row(2, v) for v in (0.1, 0.2, 0.3)], "k")
        assert a.median_aee == pytest.approx(0.2) and a.iqr_aee == pytest.approx(0.1)

    def test_partition_by_calibration(self):
        rows = [fake_row(1, 0.1, c) for c in (True, False, True, True)]
        aggs = aggregate(rows, "calibration")
        assert [a.value for a in aggs] == ["off", "on"]
        assert sum(a.n_rows for a in aggs) == len(rows)

    def test_na_spearman_counted_not_used(self):
        rows = [fake_row(1, 0.1, rho=None), fake_row(1, 0.2, rho=0.8), fake_row(1, 0.3, status="failed")]
        (a,) = aggregate(rows, "k")
        assert a.n_rows == 3 and a.n_failed == 1 and a.n_spearman == 1
        assert a.median_spearman == 0.8
        buf = io.StringIO()
        write_aggregate_csv([a], buf)
        assert buf.getvalue().splitlines()[0].startswith("by,value,n_rows,n_failed")

    def test_empty(self):
        with pytest.raises(EmptyBucket):
            aggregate([], "k")
        with pytest.raises(EmptyBucket):
            aggregate([fake_row(1, 0.1, status="failed")], "k")
        with pytest.raises(ConfigError):
            aggregate([fake_row(1, 0.1)], "colour")

    def test_difficulty_pairs(self):
        rows = [fake_row(1, 0.1), fake_row(1, 0.3, status="failed")]
        assert difficulty_pairs(rows) == [(0.5, 0.1)]


def test_mixed_beats_easy_only():
    """One hard and three easy domains: mixed training groups estimate better."""
    doms = (DomainSpec("E0", 300, 0.85), DomainSpec("E1", 300, 0.85), DomainSpec("E2", 300, 0.85),
            DomainSpec("H0", 300, 0.15))
    spec = SynthSpec(doms, mu_correct=1.0, mu_incorrect=1.1, dispersion=0.6, seed=42)
    table = extract_features(generate(spec))
    res = run_sweep(table, SweepConfig(k_values=(2,), estimators=(LOGREG,)))
    mixed = [r.aee for r in res.rows if "H0" in r.group]
    easy = [r.aee for r in res.rows if "H0" not in r.group]
    assert len(mixed) == 3 and len(easy) == 3
    assert np.median(mixed) < np.median(easy)
