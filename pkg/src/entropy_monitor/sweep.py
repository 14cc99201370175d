"""Exhaustive train-group / held-out-domain composition study.

For every training group G (all k-subsets of the domains), every estimator
config and every feature subset: fit on G, estimate accuracy on each
remaining domain, score with AEE and Spearman rho, then aggregate with
median and IQR.
"""

from __future__ import annotations

import csv
import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import comb


from .classifiers.model import TrainConfig, train_model
from .classifiers.scaling import fit_zscaler
from .classifiers.search import FAMILIES, grid_search_cv
from .corpus import FeatureTable
from .errors import (
    TRAINING_ERRORS,
    ConfigError,
    DegenerateInput,
    EmptyBucket,
    EmptyInput,
    KOutOfRange,
)
from .estimation import DomainEstimate, estimate_domains, summarize_estimates, weighted_group_accuracy
from .evaluation import median_iqr, spearman
from .features import get_subset
from .splits import derive_seed

SWEEP_CONFIG_VERSION = 1


@dataclass(frozen=True)
class EstimatorConfig:
    family: str
    balance: bool
    calibrate: bool

    @property
    def config_id(self) -> str:
        return f"{self.family}|balance={'on' if self.balance else 'off'}|calibrate={'on' if self.calibrate else 'off'}"

    @classmethod
    def parse(cls, config_id: str) -> "EstimatorConfig":
        try:
            family, bal, cal = config_id.split("|")
            flags = {"on": True, "off": False}
            return cls(family, flags[bal.split("=")[1]], flags[cal.split("=")[1]])
        except (ValueError, KeyError, IndexError):
            raise ConfigError(f"bad estimator config id {config_id!r}") from None


DEFAULT_ESTIMATORS = tuple(
    EstimatorConfig(f, b, c) for f in FAMILIES for b in (False, True) for c in (False, True)
)


@dataclass(frozen=True)
class SweepConfig:
    domains: tuple[str, ...] | None = None
    k_values: tuple[int, ...] = (1, 2, 3, 4)
    estimators: tuple[EstimatorConfig, ...] = DEFAULT_ESTIMATORS
    feature_subsets: tuple[str, ...] = ("full11",)
    seed: int = 42
    include_leave_one_out: bool = False
    cv_folds: int = 5
    workers: int = 1

    def __post_init__(self):
        if not self.estimators:
            raise ConfigError("at least one estimator config is required")
        if not self.k_values or any(int(k) < 1 for k in self.k_values):
            raise ConfigError("k values must be positive")
        for e in self.estimators:
            if e.family not in FAMILIES:
                raise ConfigError(f"unknown family {e.family!r}")
        for s in self.feature_subsets:
            get_subset(s)
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    _KEYS = ("version", "domains", "k_values", "estimators", "feature_subsets", "seed",
             "include_leave_one_out", "cv_folds", "workers")

    def to_dict(self):
        return {
            "version": SWEEP_CONFIG_VERSION,
            "domains": None if self.domains is None else list(self.domains),
            "k_values": list(self.k_values),
            "estimators": [e.config_id for e in self.estimators],
            "feature_subsets": list(self.feature_subsets),
            "seed": self.seed,
            "include_leave_one_out": self.include_leave_one_out,
            "cv_folds": self.cv_folds,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d, **overrides):
        if not isinstance(d, dict):
            raise ConfigError("sweep config must be a JSON object")
        unknown = set(d) - set(cls._KEYS)
        if unknown:
            raise ConfigError(f"unknown sweep config keys: {sorted(unknown)}")
        if d.get("version", SWEEP_CONFIG_VERSION) != SWEEP_CONFIG_VERSION:
            raise ConfigError(f"unsupported sweep config version {d.get('version')!r}")
        kw = {}
        if d.get("domains") is not None:
            kw["domains"] = tuple(str(x) for x in d["domains"])
        if "k_values" in d:
            kw["k_values"] = tuple(int(k) for k in d["k_values"])
        if "estimators" in d:
            kw["estimators"] = tuple(EstimatorConfig.parse(e) for e in d["estimators"])
        if "feature_subsets" in d:
            kw["feature_subsets"] = tuple(d["feature_subsets"])
        for key in ("seed", "cv_folds", "workers"):
            if key in d:
                kw[key] = int(d[key])
        if "include_leave_one_out" in d:
            kw["include_leave_one_out"] = bool(d["include_leave_one_out"])
        kw.update(overrides)
        return cls(**kw)


def enumerate_groups(domains, k: int) -> list[tuple[str, ...]]:
    """All k-subsets of the sorted domain ids, in lexicographic order."""
    doms = sorted(set(domains))
    if not 1 <= k <= len(doms):
        raise KOutOfRange(f"k={k} outside 1..{len(doms)}")
    return list(itertools.combinations(doms, k))


def group_id(group) -> str:
    return "+".join(sorted(group))


@dataclass
class SweepRow:
    group: tuple[str, ...]
    estimator: EstimatorConfig
    feature_subset: str
    status: str
    weighted_group_accuracy: float | None
    aee: float | None = None
    spearman: float | None = None
    estimates: list[DomainEstimate] = field(default_factory=list)
    hyperparameters: dict | None = None
    n_train: int = 0
    error: str = ""

    @property
    def k(self) -> int:
        return len(self.group)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def key(self):
        return (group_id(self.group), self.estimator.config_id, self.feature_subset)


@dataclass
class SweepResult:
    rows: list[SweepRow]
    config: SweepConfig
    # (estimator id, subset) -> rho over pooled held-out (estimate, truth) pairs
    loo_spearman: dict = field(default_factory=dict)
    loo_rows: list[SweepRow] = field(default_factory=list)


# -- work units --------------------------------------------------------------------
#
# One unit = (group, family, balance, subset).  The grid search depends only on
# these, so the calibrate on/off rows of a unit share it; the calibrated model
# reuses the search's fold models (cross-fitted), the uncalibrated one refits.

_SHARED: dict = {}


def _unit_seed(seed, group, family, balance, subset) -> int:
    return derive_seed(seed, group_id(group), family, bool(balance), subset)


def _run_unit(unit):
    group, family, balance, subset_name, calibrate_flags, holdout, seed, cv_folds = unit
    table: FeatureTable = _SHARED["table"]
    wga = weighted_group_accuracy(table, group)
    useed = _unit_seed(seed, group, family, balance, subset_name)
    rows = []

    def failed(exc):
        return [
            SweepRow(group, EstimatorConfig(family, balance, c), subset_name, "failed", wga,
                     error=f"{type(exc).__name__}: {exc}")
            for c in calibrate_flags
        ]

    train = table.select_domains(group)
    subset = get_subset(subset_name)
    try:
        Xs = train.X[:, list(subset.indices)]
        Z = fit_zscaler(Xs).transform(Xs)
        search = grid_search_cv(family, Z, train.labels, balance, useed, cv_folds)
    except TRAINING_ERRORS as exc:
        return failed(exc)
    for cal in calibrate_flags:
        est_cfg = EstimatorConfig(family, balance, cal)
        cfg = TrainConfig(family, balance, cal, subset, useed, cv_folds)
        try:
            model = train_model(train.X, train.labels, cfg, group, search=search)
        except TRAINING_ERRORS as exc:
            rows.append(SweepRow(group, est_cfg, subset_name, "failed", wga,
                                 error=f"{type(exc).__name__}: {exc}"))
            continue
        summary = summarize_estimates(group, wga, estimate_domains(model, table, holdout))
        rows.append(SweepRow(group, est_cfg, subset_name, "ok", wga, summary.aee,
                             summary.spearman, summary.estimates, dict(search.best_params),
                             int(train.labels.size)))
    return rows


def _init_worker(table):
    _SHARED["table"] = table


def _units_for(groups, config: SweepConfig, domains):
    """Units in deterministic order, with the calibrate flags each must produce."""
    units = []
    for group in groups:
        holdout = tuple(d for d in domains if d not in group)
        for subset in config.feature_subsets:
            seen = {}
            for e in config.estimators:
                seen.setdefault((e.family, e.balance), []).append(e.calibrate)
            for (family, balance), flags in seen.items():
                units.append((tuple(group), family, balance, subset, tuple(flags), holdout,
                              config.seed, config.cv_folds))
    return units


def _execute(units, table, workers):
    if workers <= 1 or len(units) <= 1:
        _init_worker(table)
        try:
            return [_run_unit(u) for u in units]
        finally:
            _SHARED.clear()
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(table,)) as pool:
        # map preserves submission order, so the merge is scheduling independent
        return list(pool.map(_run_unit, units, chunksize=max(1, len(units) // (8 * workers))))


def _order_rows(unit_rows, config: SweepConfig):
    """Flatten unit outputs into (group, subset, estimator-list order)."""
    rank = {e.config_id: i for i, e in enumerate(config.estimators)}
    sub_rank = {s: i for i, s in enumerate(config.feature_subsets)}
    rows = [r for batch in unit_rows for r in batch]
    # units are already in group order; stable sort fixes the within-group order
    pos = {}
    for r in rows:
        pos.setdefault(group_id(r.group), len(pos))
    rows.sort(key=lambda r: (pos[group_id(r.group)], sub_rank[r.feature_subset],
                             rank[r.estimator.config_id]))
    return rows


def _check_corpus(table: FeatureTable, config: SweepConfig):
    if len(table) == 0:
        raise EmptyInput("sweep corpus is empty")
    if not table.is_labeled:
        raise ConfigError("sweep corpus must be fully labelled")
    present = table.domain_list()
    domains = sorted(set(config.domains)) if config.domains is not None else present
    missing = sorted(set(domains) - set(present))
    if missing:
        raise ConfigError(f"domains missing from corpus: {missing}")
    return domains


def run_sweep(table: FeatureTable, config: SweepConfig) -> SweepResult:
    domains = _check_corpus(table, config)
    for k in config.k_values:
        if not 1 <= k < len(domains):
            raise ConfigError(f"k={k} must satisfy 1 <= k < {len(domains)} (need a holdout)")
    table = table.select_domains(domains)
    groups = [g for k in config.k_values for g in enumerate_groups(domains, k)]
    units = _units_for(groups, config, domains)
    rows = _order_rows(_execute(units, table, config.workers), config)
    for r in rows:
        assert not set(r.group) & {e.domain_id for e in r.estimates}
    result = SweepResult(rows, config)
    if config.include_leave_one_out:
        loo = leave_one_out(table, config)
        result.loo_rows = loo.loo_rows
        result.loo_spearman = loo.loo_spearman
    return result


def leave_one_out(table: FeatureTable, config: SweepConfig) -> SweepResult:
    """Train on all domains but one, for each domain; rho over the pooled held-out pairs."""
    domains = _check_corpus(table, config)
    if len(domains) < 2:
        raise ConfigError("leave-one-out needs at least 2 domains")
    table = table.select_domains(domains)
    groups = enumerate_groups(domains, len(domains) - 1)
    units = _units_for(groups, config, domains)
    rows = _order_rows(_execute(units, table, config.workers), config)
    pooled = {}
    for r in rows:
        key = (r.estimator.config_id, r.feature_subset)
        pooled.setdefault(key, [])
        if r.ok:
            pooled[key].extend((e.estimated_accuracy, e.true_accuracy) for e in r.estimates)
    rho = {}
    for key, pairs in pooled.items():
        try:
            rho[key] = spearman([a for a, _ in pairs], [b for _, b in pairs])
        except DegenerateInput:
            rho[key] = None
    return SweepResult(rows, config, rho, rows)


def expected_row_count(n_domains, config: SweepConfig) -> int:
    return (sum(comb(n_domains, k) for k in config.k_values)
            * len(config.estimators) * len(config.feature_subsets))


# -- output -------------------------------------------------------------------------

RESULT_COLUMNS = (
    "group", "k", "estimator", "family", "balance", "calibrate", "feature_subset", "status",
    "n_train", "weighted_group_accuracy", "aee", "spearman", "n_holdout", "hyperparameters",
    "estimates", "error",
)


def _num(v):
    return "" if v is None else repr(float(v))


def row_record(r: SweepRow) -> dict:
    return {
        "group": group_id(r.group),
        "k": r.k,
        "estimator": r.estimator.config_id,
        "family": r.estimator.family,
        "balance": "on" if r.estimator.balance else "off",
        "calibrate": "on" if r.estimator.calibrate else "off",
        "feature_subset": r.feature_subset,
        "status": r.status,
        "n_train": r.n_train,
        "weighted_group_accuracy": _num(r.weighted_group_accuracy),
        "aee": _num(r.aee),
        "spearman": "n/a" if r.ok and r.spearman is None else _num(r.spearman),
        "n_holdout": len(r.estimates),
        "hyperparameters": "" if r.hyperparameters is None else json.dumps(r.hyperparameters, sort_keys=True),
        "estimates": json.dumps(
            {e.domain_id: [e.estimated_accuracy, e.true_accuracy] for e in r.estimates},
            sort_keys=True,
        ) if r.estimates else "",
        "error": r.error,
    }


def write_results_csv(rows, fh):
    writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(row_record(r))


def _opt_float(s):
    return None if s in ("", "n/a") else float(s)


def read_results_csv(fh) -> list[SweepRow]:
    rows = []
    reader = csv.DictReader(fh)
    missing = set(RESULT_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ConfigError(f"results file lacks columns {sorted(missing)}")
    for rec in reader:
        ests = json.loads(rec["estimates"]) if rec["estimates"] else {}
        rows.append(SweepRow(
            tuple(rec["group"].split("+")),
            EstimatorConfig.parse(rec["estimator"]),
            rec["feature_subset"],
            rec["status"],
            _opt_float(rec["weighted_group_accuracy"]),
            _opt_float(rec["aee"]),
            _opt_float(rec["spearman"]),
            [DomainEstimate(d, 0, v[0], v[1]) for d, v in sorted(ests.items())],
            json.loads(rec["hyperparameters"]) if rec["hyperparameters"] else None,
            int(rec["n_train"] or 0),
            rec["error"],
        ))
    return rows


def write_loo_csv(result: SweepResult, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["estimator", "feature_subset", "held_out", "estimated_accuracy",
                     "true_accuracy", "abs_error", "status"])
    for r in result.loo_rows:
        held = r.estimates[0] if r.estimates else None
        writer.writerow([
            r.estimator.config_id, r.feature_subset,
            held.domain_id if held else "", _num(held and held.estimated_accuracy),
            _num(held and held.true_accuracy), _num(r.aee), r.status,
        ])
    for (est, sub), rho in sorted(result.loo_spearman.items()):
        writer.writerow([est, sub, "pooled_spearman", "", "", "n/a" if rho is None else repr(rho), ""])


# -- aggregation --------------------------------------------------------------------

GROUP_BY = {
    "k": lambda r: r.k,
    "classifier": lambda r: r.estimator.family,
    "calibration": lambda r: "on" if r.estimator.calibrate else "off",
    "balance": lambda r: "on" if r.estimator.balance else "off",
    "estimator": lambda r: r.estimator.config_id,
    "feature_subset": lambda r: r.feature_subset,
}


@dataclass(frozen=True)
class AggregateRow:
    by: str
    value: object
    n_rows: int
    n_failed: int
    median_aee: float | None
    iqr_aee: float | None
    n_spearman: int
    median_spearman: float | None
    iqr_spearman: float | None


def aggregate(rows, group_by: str = "k") -> list[AggregateRow]:
    """Median and IQR of AEE and rho per bucket; failed rows and n/a rho are counted, not used."""
    if group_by not in GROUP_BY:
        raise ConfigError(f"unknown grouping {group_by!r}; choose from {sorted(GROUP_BY)}")
    rows = list(rows)
    if not rows:
        raise EmptyBucket("no sweep rows to aggregate")
    key = GROUP_BY[group_by]
    buckets: dict = {}
    for r in rows:
        buckets.setdefault(key(r), []).append(r)
    out = []
    for value in sorted(buckets):
        members = buckets[value]
        aees = [r.aee for r in members if r.ok and r.aee is not None]
        rhos = [r.spearman for r in members if r.ok and r.spearman is not None]
        if not aees:
            raise EmptyBucket(f"bucket {group_by}={value!r} has no successful rows")
        ma, ia = median_iqr(aees)
        mr, ir = median_iqr(rhos) if rhos else (None, None)
        out.append(AggregateRow(group_by, value, len(members),
                                sum(not r.ok for r in members), ma, ia, len(rhos), mr, ir))
    return out


AGGREGATE_COLUMNS = ("by", "value", "n_rows", "n_failed", "median_aee", "iqr_aee",
                     "n_spearman", "median_spearman", "iqr_spearman")


def write_aggregate_csv(agg_rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(AGGREGATE_COLUMNS)
    for a in agg_rows:
        writer.writerow([a.by, a.value, a.n_rows, a.n_failed, _num(a.median_aee), _num(a.iqr_aee),
                         a.n_spearman, _num(a.median_spearman), _num(a.iqr_spearman)])


def difficulty_pairs(rows) -> list[tuple[float, float]]:
    """(weighted group accuracy, AEE) for every successful row, for difficulty plots."""
    return [(r.weighted_group_accuracy, r.aee) for r in rows
            if r.ok and r.aee is not None and r.weighted_group_accuracy is not None]


def write_difficulty_csv(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["group", "k", "estimator", "feature_subset", "weighted_group_accuracy", "aee"])
    for r in rows:
        if r.ok and r.aee is not None and r.weighted_group_accuracy is not None:
            writer.writerow([group_id(r.group), r.k, r.estimator.config_id, r.feature_subset,
                             _num(r.weighted_group_accuracy), _num(r.aee)])


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))
