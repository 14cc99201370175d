"""Hyperparameter grids and stratified k-fold grid search."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..evaluation import auroc_binary
from ..splits import check_two_classes, cv_fold_ids, fold_seed
from . import forest, logreg, mlp

FAMILIES = ("logreg_l1", "random_forest", "mlp")

GRIDS = {
    "logreg_l1": [{"C": c} for c in (0.5, 2.0, 10.0)],
    "random_forest": [
        {"max_depth": d, "min_samples_split": s} for d in (3, 5, 10) for s in (2, 5, 10)
    ],
    "mlp": [
        {"hidden_layer_sizes": list(h)}
        for h in ((5,), (8,), (10,), (15,), (20,), (8, 4), (10, 5), (15, 8))
    ],
}

_MODULES = {"logreg_l1": logreg, "random_forest": forest, "mlp": mlp}
_MODEL_TYPES = {
    "logreg_l1": logreg.LogisticModel,
    "random_forest": forest.ForestModel,
    "mlp": mlp.MLPModel,
}


def check_family(family: str) -> str:
    if family not in FAMILIES:
        raise ValueError(f"unknown classifier family {family!r}; expected one of {FAMILIES}")
    return family


def fit_family(family, Z, y, params, balance, seed):
    return _MODULES[check_family(family)].fit(Z, y, params, balance, seed)


def estimator_from_dict(family, d):
    return _MODEL_TYPES[check_family(family)].from_dict(d)


@dataclass
class SearchResult:
    best_params: dict
    table: list[dict]
    fold_ids: np.ndarray
    # fold models of the winning grid point with their out-of-fold outputs
    fold_models: list = field(default_factory=list)
    oof_scores: list = field(default_factory=list)

    @property
    def best_score(self) -> float:
        return max(row["mean_auroc"] for row in self.table)


def grid_search_cv(family, Z, y, balance=False, seed=0, folds=5, grid=None) -> SearchResult:
    """Mean out-of-fold AUROC per grid point; the first best point in grid order wins."""
    check_family(family)
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    check_two_classes(y)
    grid = GRIDS[family] if grid is None else list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    fold_ids = cv_fold_ids(y, folds, seed)
    table = []
    best = None
    for params in grid:
        models, oof, scores = [], [], []
        for k in range(folds):
            tr = fold_ids != k
            model = fit_family(family, Z[tr], y[tr], params, balance, fold_seed(seed, k))
            p = model.predict_proba(Z[~tr])
            scores.append(auroc_binary(p, y[~tr] == 1))
            models.append(model)
            oof.append(p)
        mean = float(np.mean(scores))
        table.append({"params": dict(params), "fold_auroc": scores, "mean_auroc": mean})
        if best is None or mean > best[0]:
            best = (mean, dict(params), models, oof)
    return SearchResult(best[1], table, fold_ids, best[2], best[3])
