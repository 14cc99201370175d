from .forest import ForestModel, train_random_forest
from .logreg import LogisticModel, train_logreg_l1
from .mlp import MLPModel, train_mlp
from .model import CorrectnessModel, TrainConfig, train_model
from .scaling import ZScaler, apply_zscaler, fit_zscaler
from .search import FAMILIES, GRIDS, SearchResult, grid_search_cv

__all__ = [
    "FAMILIES",
    "GRIDS",
    "CorrectnessModel",
    "ForestModel",
    "LogisticModel",
    "MLPModel",
    "SearchResult",
    "TrainConfig",
    "ZScaler",
    "apply_zscaler",
    "fit_zscaler",
    "grid_search_cv",
    "train_logreg_l1",
    "train_mlp",
    "train_model",
    "train_random_forest",
]
