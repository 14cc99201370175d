import json

import pytest

from entropy_monitor.cli import main
from entropy_monitor.corpus import load_feature_caches
from entropy_monitor.synth import evenly_spaced_spec


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Synthetic traces (4 domains x 60) plus their feature cache."""
    d = tmp_path_factory.mktemp("cli")
    spec = evenly_spaced_spec(n_domains=4, n_instances=60, acc_range=(0.3, 0.7))
    (d / "spec.json").write_text(json.dumps(spec.to_dict()))
    assert main(["synth", str(d / "spec.json"), "--out", str(d / "traces.jsonl")]) == 0
    assert main(["extract", str(d / "traces.jsonl"), "--out", str(d / "feats.jsonl")]) == 0
    return d


def test_extract_counts(corpus):
    assert len(load_feature_caches([corpus / "feats.jsonl"])) == 240


def test_extract_lenient_and_strict(corpus, tmp_path, capsys):
    lines = (corpus / "traces.jsonl").read_text().splitlines()
    lines.insert(3, '{"instance_id": "broken"')
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["extract", str(bad), "--out", str(tmp_path / "f.jsonl")]) == 0
    assert f"{bad}:4:" in capsys.readouterr().err
    assert len(load_feature_caches([tmp_path / "f.jsonl"])) == 240
    assert main(["extract", str(bad), "--strict", "--out", str(tmp_path / "g.jsonl")]) == 2


def test_missing_input_is_exit_2(tmp_path):
    assert main(["extract", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "x")]) == 2


def test_diagnose(corpus, tmp_path):
    out = tmp_path / "diag.csv"
    assert main(["diagnose", str(corpus / "feats.jsonl"), "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 1 + 20  # 11 features + 9 baselines


def test_train_twice_byte_identical(corpus, tmp_path):
    args = ["train", str(corpus / "feats.jsonl"), "--group", "D00,D01", "--family", "logreg_l1",
            "--calibrate"]
    assert main(args + ["--out", str(tmp_path / "a.json")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.json")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_train_config_file_and_unknown_keys(corpus, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"version": 1, "family": "random_forest", "balance": True}))
    assert main(["train", str(corpus / "feats.jsonl"), "--group", "D02", "--config", str(cfg),
                 "--out", str(tmp_path / "m.json")]) == 0
    meta = json.loads((tmp_path / "m.json").read_text())
    assert "random_forest" in json.dumps(meta)
    cfg.write_text(json.dumps({"family": "mlp", "learning_rate": 0.1}))
    assert main(["train", str(corpus / "feats.jsonl"), "--group", "D02", "--config", str(cfg),
                 "--out", str(tmp_path / "n.json")]) == 2


def test_train_unknown_domain_is_exit_2(corpus, tmp_path):
    assert main(["train", str(corpus / "feats.jsonl"), "--group", "ZZ", "--family", "mlp",
                 "--out", str(tmp_path / "m.json")]) == 2


def test_estimate(corpus, tmp_path, capsys):
    model = tmp_path / "m.json"
    assert main(["train", str(corpus / "feats.jsonl"), "--group", "D00,D01", "--family", "logreg_l1",
                 "--out", str(model)]) == 0
    report = tmp_path / "est.csv"
    assert main(["estimate", str(model), str(corpus / "feats.jsonl"), "--domains", "D02,D03",
                 "--out", str(report)]) == 0
    assert capsys.readouterr().out.startswith("2 domains, AEE ")
    lines = report.read_text().splitlines()
    assert lines[0] == "domain_id,n,estimated_accuracy,true_accuracy,abs_error"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["D02", "D03"]
    # refuses to score the training domains
    assert main(["estimate", str(model), str(corpus / "feats.jsonl"), "--domains", "D01,D02",
                 "--out", str(tmp_path / "x.csv")]) == 2


def test_sweep_and_report(corpus, tmp_path):
    (tmp_path / "sweep.json").write_text(json.dumps(
        {"k_values": [1], "estimators": ["logreg_l1|balance=off|calibrate=off"]}))
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"version": 1, "corpus": [str(corpus / "feats.jsonl")],
                                    "config": "sweep.json", "output_dir": "out"}))
    assert main(["sweep", str(manifest), "--leave-one-out"]) == 0
    out = tmp_path / "out"
    assert sorted(p.name for p in out.iterdir()) == ["aggregate.csv", "difficulty.csv", "loo.csv",
                                                     "results.csv"]
    assert len((out / "results.csv").read_text().splitlines()) == 1 + 4
    first = (out / "results.csv").read_bytes()
    assert main(["sweep", str(manifest)]) == 0
    assert (out / "results.csv").read_bytes() == first
    agg = tmp_path / "agg.csv"
    assert main(["report", str(out / "results.csv"), "--by", "k", "--out", str(agg),
                 "--pairs", str(tmp_path / "pairs.csv")]) == 0
    assert len(agg.read_text().splitlines()) == 2
    assert (tmp_path / "pairs.csv").exists()


def test_sweep_manifest_errors(tmp_path):
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"corpus": ["missing.jsonl"], "output_dir": "out"}))
    assert main(["sweep", str(manifest)]) == 2
    manifest.write_text(json.dumps({"corpus": [], "extra": 1}))
    assert main(["sweep", str(manifest)]) == 2


def test_synth_rejects_bad_spec(tmp_path):
    spec = evenly_spaced_spec(n_domains=2, n_instances=5).to_dict() | {"colour": "red"}
    (tmp_path / "s.json").write_text(json.dumps(spec))
    assert main(["synth", str(tmp_path / "s.json"), "--out", str(tmp_path / "t.jsonl")]) == 2


def test_synth_seed_override(corpus, tmp_path):
    assert main(["synth", str(corpus / "spec.json"), "--seed", "7", "--out", str(tmp_path / "t.jsonl")]) == 0
    assert (tmp_path / "t.jsonl").read_bytes() != (corpus / "traces.jsonl").read_bytes()
