"""The correctness model: scaler + feature subset + estimator(s) + optional calibrators."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..calibration import IsotonicMap, pava, predict_members
from ..errors import ConfigError, DimensionMismatch
from ..features import FEATURE_NAMES, FEATURE_VERSION, FeatureSubset, get_subset
from ..splits import derive_seed
from .scaling import ZScaler, fit_zscaler
from .search import FAMILIES, SearchResult, estimator_from_dict, fit_family, grid_search_cv

MODEL_FORMAT = "entropy-monitor-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    family: str
    balance: bool = False
    calibrate: bool = False
    feature_subset: FeatureSubset = field(default_factory=lambda: get_subset("full11"))
    seed: int = 42
    cv_folds: int = 5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        object.__setattr__(self, "feature_subset", get_subset(self.feature_subset))

    def to_dict(self):
        return {
            "family": self.family,
            "balance": self.balance,
            "calibrate": self.calibrate,
            "feature_subset": self.feature_subset.to_dict(),
            "seed": self.seed,
            "cv_folds": self.cv_folds,
        }


@dataclass
class CorrectnessModel:
    """``members`` is a list of (estimator, IsotonicMap | None); predictions average them."""

    family: str
    scaler: ZScaler
    feature_subset: FeatureSubset
    members: list
    metadata: dict = field(default_factory=dict)

    @property
    def calibrated(self) -> bool:
        return any(cal is not None for _, cal in self.members)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != len(FEATURE_NAMES):
            raise DimensionMismatch(
                f"expected rows of {len(FEATURE_NAMES)} features, got shape {X.shape}"
            )
        return self.scaler.transform(X[:, list(self.feature_subset.indices)])

    def predict_proba(self, X) -> np.ndarray:
        return predict_members(self.members, self.transform(X))

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "feature_version": FEATURE_VERSION,
            "feature_order": list(FEATURE_NAMES),
            "family": self.family,
            "feature_subset": self.feature_subset.to_dict(),
            "scaler": self.scaler.to_dict(),
            "members": [
                {"estimator": est.to_dict(), "calibrator": None if cal is None else cal.to_dict()}
                for est, cal in self.members
            ],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise ConfigError("not a correctness-model file")
        if d.get("version") != MODEL_VERSION:
            raise ConfigError(f"unsupported model version {d.get('version')!r}")
        if list(d.get("feature_order", [])) != list(FEATURE_NAMES):
            raise ConfigError("model feature order does not match this library")
        family = d["family"]
        members = [
            (
                estimator_from_dict(family, m["estimator"]),
                None if m["calibrator"] is None else IsotonicMap.from_dict(m["calibrator"]),
            )
            for m in d["members"]
        ]
        return cls(
            family,
            ZScaler.from_dict(d["scaler"]),
            FeatureSubset.from_dict(d["feature_subset"]),
            members,
            d.get("metadata", {}),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CorrectnessModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def train_model(X, y, config: TrainConfig, group=(), search: SearchResult | None = None):
    """Scale, grid-search, then either refit on all rows or keep the calibrated fold models.

    A precomputed ``search`` for the same (data, family, balance, subset, seed)
    may be passed in so calibrated and uncalibrated variants share it.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[1] != len(FEATURE_NAMES):
        raise DimensionMismatch(f"expected {len(FEATURE_NAMES)} feature columns, got {X.shape}")
    subset = config.feature_subset
    scaler = fit_zscaler(X[:, list(subset.indices)])
    Z = scaler.transform(X[:, list(subset.indices)])
    if search is None:
        search = grid_search_cv(config.family, Z, y, config.balance, config.seed, config.cv_folds)
    if config.calibrate:
        # cross-fitted: each fold model gets a map fitted on its own held-out fold
        members = [
            (model, pava(oof, y[search.fold_ids == k]))
            for k, (model, oof) in enumerate(zip(search.fold_models, search.oof_scores))
        ]
    else:
        est = fit_family(config.family, Z, y, search.best_params, config.balance,
                         derive_seed(config.seed, "final"))
        members = [(est, None)]
    metadata = {
        "group": list(group),
        "config": config.to_dict(),
        "hyperparameters": search.best_params,
        "cv_mean_auroc": search.best_score,
        "n_train": int(y.size),
    }
    return CorrectnessModel(config.family, scaler, subset, members, metadata)
