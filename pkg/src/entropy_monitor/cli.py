"""Command-line entry point: extract, diagnose, train, estimate, sweep, synth, report."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from .classifiers.model import CorrectnessModel, TrainConfig, train_model
from .corpus import extract_features, load_feature_caches
from .errors import (
    TRAINING_ERRORS,
    ConfigError,
    DomainMismatch,
    DomainOverlap,
    EmptyBucket,
    EmptyDomain,
    EmptyHoldout,
    InputError,
)
from .estimation import evaluate_holdout, write_estimate_report
from .evaluation import diagnose
from .features import get_subset
from .sweep import (
    GROUP_BY,
    SweepConfig,
    aggregate,
    default_workers,
    read_results_csv,
    run_sweep,
    write_aggregate_csv,
    write_difficulty_csv,
    write_loo_csv,
    write_results_csv,
)
from .synth import SynthSpec, generate
from .traces import iter_traces, write_traces

log = logging.getLogger("entropy_monitor")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_TRAINING = 3

DEFAULT_SEED = 42
TRAIN_CONFIG_VERSION = 1
MANIFEST_VERSION = 1
REPORT_GROUPINGS = ("k", "classifier", "calibration", "balance")


def _write_text(path, writer_fn):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        return writer_fn(fh)


def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path}: invalid JSON ({exc})") from exc


# -- extract ------------------------------------------------------------------------

def cmd_extract(args) -> int:
    traces = []
    total_rejected = 0
    for path in args.traces:
        rejections = []
        with open(path, "rb") as fh:
            traces.extend(iter_traces(fh, strict=args.strict, rejections=rejections))
        for rej in rejections:
            print(f"{path}:{rej.line_no}: rejected: {rej.error}", file=sys.stderr)
        total_rejected += len(rejections)
    table = extract_features(traces)
    _write_text(args.out, table.write_jsonl)
    print(f"extracted {len(table)} traces, rejected {total_rejected}", file=sys.stderr)
    return EXIT_OK


# -- diagnose -----------------------------------------------------------------------

def cmd_diagnose(args) -> int:
    table = load_feature_caches(args.features)
    result = diagnose(table)
    _write_text(args.out, result.write_csv)
    n_na = sum(v is None for v in result.cells.values())
    print(f"wrote {len(result.statistics)} statistics x {len(result.domains)} domains "
          f"({n_na} n/a cells)", file=sys.stderr)
    return EXIT_OK


# -- train --------------------------------------------------------------------------

_TRAIN_KEYS = {"version", "family", "balance", "calibrate", "feature_subset", "seed", "cv_folds"}


def load_train_config(path, seed_override=None, **flag_overrides) -> TrainConfig:
    d = {} if path is None else _read_json(path, "train config")
    if not isinstance(d, dict):
        raise ConfigError("train config must be a JSON object")
    unknown = set(d) - _TRAIN_KEYS
    if unknown:
        raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
    if d.get("version", TRAIN_CONFIG_VERSION) != TRAIN_CONFIG_VERSION:
        raise ConfigError(f"unsupported train config version {d.get('version')!r}")
    merged = {k: v for k, v in d.items() if k != "version"}
    merged.update({k: v for k, v in flag_overrides.items() if v is not None})
    if "family" not in merged:
        raise ConfigError("train config needs a 'family'")
    seed = seed_override if seed_override is not None else merged.get("seed", DEFAULT_SEED)
    for flag in ("balance", "calibrate"):
        if not isinstance(merged.get(flag, False), bool):
            raise ConfigError(f"'{flag}' must be true or false")
    return TrainConfig(
        family=merged["family"],
        balance=merged.get("balance", False),
        calibrate=merged.get("calibrate", False),
        feature_subset=get_subset(merged.get("feature_subset", "full11")),
        seed=int(seed),
        cv_folds=int(merged.get("cv_folds", 5)),
    )


def _parse_group(text):
    group = tuple(sorted({g.strip() for g in text.split(",") if g.strip()}))
    if not group:
        raise ConfigError("--group needs at least one domain id")
    return group


def cmd_train(args) -> int:
    config = load_train_config(args.config, args.seed, family=args.family,
                               balance=args.balance, calibrate=args.calibrate,
                               feature_subset=args.subset)
    table = load_feature_caches(args.features)
    group = _parse_group(args.group)
    missing = sorted(set(group) - set(table.domain_list()))
    if missing:
        raise ConfigError(f"group domains not in the feature files: {missing}")
    train = table.select_domains(group)
    if not train.is_labeled:
        raise ConfigError("training group contains unlabelled instances")
    model = train_model(train.X, train.labels, config, group)
    _write_text(args.out, lambda fh: fh.write(model.dumps() + "\n"))
    meta = model.metadata
    print(f"trained {config.family} on {'+'.join(group)} (n={meta['n_train']}), "
          f"hyperparameters {json.dumps(meta['hyperparameters'], sort_keys=True)}, "
          f"cv AUROC {meta['cv_mean_auroc']:.4f}", file=sys.stderr)
    return EXIT_OK


# -- estimate -----------------------------------------------------------------------

def cmd_estimate(args) -> int:
    model = CorrectnessModel.load(args.model)
    table = load_feature_caches(args.features)
    holdout = table.domain_list() if not args.domains else _parse_group(args.domains)
    summary = evaluate_holdout(model, table, holdout)
    _write_text(args.out, lambda fh: write_estimate_report(summary.estimates, fh))
    parts = [f"{len(summary.estimates)} domains"]
    if summary.aee is not None:
        parts.append(f"AEE {summary.aee:.4f}")
        parts.append("rho n/a" if summary.spearman is None else f"rho {summary.spearman:.4f}")
    print(", ".join(parts))
    return EXIT_OK


# -- sweep --------------------------------------------------------------------------

_MANIFEST_KEYS = {"version", "corpus", "config", "output_dir", "seed"}


def load_manifest(path):
    """Returns (feature paths, SweepConfig dict or None, output dir or None, seed or None)."""
    d = _read_json(path, "manifest")
    if not isinstance(d, dict):
        raise ConfigError("manifest must be a JSON object")
    unknown = set(d) - _MANIFEST_KEYS
    if unknown:
        raise ConfigError(f"unknown manifest keys: {sorted(unknown)}")
    if d.get("version", MANIFEST_VERSION) != MANIFEST_VERSION:
        raise ConfigError(f"unsupported manifest version {d.get('version')!r}")
    base = Path(path).resolve().parent
    corpus = d.get("corpus")
    if isinstance(corpus, dict):
        expected = {str(k): base / v for k, v in corpus.items()}
    elif isinstance(corpus, list) and corpus:
        expected = {None: [base / p for p in corpus]}
    else:
        raise ConfigError("manifest 'corpus' must be a non-empty list or {domain: path} map")
    paths = []
    for dom, p in expected.items():
        for q in (p if isinstance(p, list) else [p]):
            if not q.is_file():
                raise ConfigError(f"corpus file not found: {q}")
            paths.append((dom, q))
    config = None
    if d.get("config") is not None:
        cfg_path = base / d["config"]
        if not cfg_path.is_file():
            raise ConfigError(f"sweep config not found: {cfg_path}")
        config = _read_json(cfg_path, "sweep config")
    out = None if d.get("output_dir") is None else base / d["output_dir"]
    return paths, config, out, d.get("seed")


def cmd_sweep(args) -> int:
    paths, cfg_dict, manifest_out, manifest_seed = load_manifest(args.manifest)
    table = load_feature_caches([p for _, p in paths])
    present = set(table.domain_list())
    for dom, p in paths:
        if dom is not None and dom not in present:
            raise ConfigError(f"{p}: no instances of domain {dom!r}")
    seed = args.seed if args.seed is not None else manifest_seed
    overrides = {}
    named = sorted({dom for dom, _ in paths if dom is not None})
    if named and not (cfg_dict or {}).get("domains"):
        overrides["domains"] = tuple(named)
    if seed is not None:
        overrides["seed"] = int(seed)
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.leave_one_out:
        overrides["include_leave_one_out"] = True
    config = SweepConfig.from_dict(cfg_dict or {}, **overrides)
    out_dir = Path(args.out) if args.out else manifest_out
    if out_dir is None:
        raise ConfigError("no output directory (use --out or manifest 'output_dir')")
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = run_sweep(table, config)
    elapsed = time.perf_counter() - t0
    _write_text(out_dir / "results.csv", lambda fh: write_results_csv(result.rows, fh))
    ok_rows = [r for r in result.rows if r.ok]

    def write_aggs(fh):
        aggs = []
        if ok_rows:
            for by in REPORT_GROUPINGS:
                aggs.extend(aggregate(result.rows, by))
        write_aggregate_csv(aggs, fh)

    _write_text(out_dir / "aggregate.csv", write_aggs)
    _write_text(out_dir / "difficulty.csv", lambda fh: write_difficulty_csv(result.rows, fh))
    if config.include_leave_one_out:
        _write_text(out_dir / "loo.csv", lambda fh: write_loo_csv(result, fh))
    n_failed = len(result.rows) - len(ok_rows)
    print(f"{len(result.rows)} rows ({n_failed} failed) in {elapsed:.1f}s -> {out_dir}",
          file=sys.stderr)
    return EXIT_OK


# -- synth --------------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = SynthSpec.load(args.spec)
    if args.seed is not None:
        spec = SynthSpec(spec.domains, spec.mu_correct, spec.mu_incorrect, spec.dispersion,
                         spec.t_min, spec.t_max, args.seed, spec.model_id)
    n = _write_text(args.out, lambda fh: write_traces(generate(spec), fh))
    print(f"wrote {n} synthetic traces over {len(spec.domains)} domains", file=sys.stderr)
    return EXIT_OK


# -- report -------------------------------------------------------------------------

def cmd_report(args) -> int:
    with open(args.results, encoding="utf-8", newline="") as fh:
        rows = read_results_csv(fh)
    aggs = aggregate(rows, args.by)
    _write_text(args.out, lambda fh: write_aggregate_csv(aggs, fh))
    if args.pairs:
        _write_text(args.pairs, lambda fh: write_difficulty_csv(rows, fh))
    for a in aggs:
        med = "n/a" if a.median_aee is None else f"{a.median_aee:.4f}"
        iqr = "n/a" if a.iqr_aee is None else f"{a.iqr_aee:.4f}"
        print(f"{args.by}={a.value}: median AEE {med} (IQR {iqr}), n={a.n_rows}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def _bool_flag(parser, name, help_text):
    group = parser.add_mutually_exclusive_group()
    group.add_argument(f"--{name}", dest=name, action="store_true", default=None, help=help_text)
    group.add_argument(f"--no-{name}", dest=name, action="store_false")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="entropy-monitor",
        description="Estimate per-domain LLM accuracy from output-entropy profiles.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("extract", help="trace JSONL -> feature cache")
    sp.add_argument("traces", nargs="+")
    sp.add_argument("--out", required=True)
    sp.add_argument("--strict", action="store_true", help="abort on the first bad line")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("diagnose", help="per-domain AUROC of every statistic")
    sp.add_argument("features", nargs="+")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("train", help="fit a correctness model on a training group")
    sp.add_argument("features", nargs="+")
    sp.add_argument("--group", required=True, help="comma-separated domain ids")
    sp.add_argument("--config", help="train config JSON")
    sp.add_argument("--family", choices=("logreg_l1", "random_forest", "mlp"))
    _bool_flag(sp, "balance", "class balancing")
    _bool_flag(sp, "calibrate", "cross-fitted isotonic calibration")
    sp.add_argument("--subset", help="feature subset name (default full11)")
    sp.add_argument("--seed", type=int, default=None, help=f"default {DEFAULT_SEED}")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("estimate", help="estimate accuracy of held-out domains")
    sp.add_argument("model")
    sp.add_argument("features", nargs="+")
    sp.add_argument("--domains", help="comma-separated subset of domains to estimate")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("sweep", help="all training groups x estimator configs")
    sp.add_argument("manifest")
    sp.add_argument("--out", help="output directory (overrides the manifest)")
    sp.add_argument("--seed", type=int, default=None, help=f"default {DEFAULT_SEED}")
    sp.add_argument("--workers", type=int, default=None,
                    help=f"worker processes (default 1; this machine: {default_workers()})")
    sp.add_argument("--leave-one-out", action="store_true", help="also run leave-one-out")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("synth", help="generate a synthetic labelled trace corpus")
    sp.add_argument("spec")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None, help="override the seed in the SynthSpec file")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("report", help="aggregate a sweep results CSV")
    sp.add_argument("results")
    sp.add_argument("--by", choices=tuple(GROUP_BY), default="k")
    sp.add_argument("--out", required=True)
    sp.add_argument("--pairs", help="also write (weighted_group_accuracy, AEE) pairs here")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TRAINING_ERRORS as exc:
        print(f"error: training infeasible: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (InputError, DomainOverlap, DomainMismatch, EmptyHoldout, EmptyDomain,
            EmptyBucket) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
