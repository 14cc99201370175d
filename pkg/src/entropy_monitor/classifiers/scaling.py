from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, TooFewRows


@dataclass(frozen=True)
class ZScaler:
    """Per-feature mean/std from the training group; zero-variance columns get std 1."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.mean.size:
            raise DimensionMismatch(f"expected {self.mean.size} columns, got shape {X.shape}")
        return (X - self.mean) / self.std

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def fit_zscaler(X) -> ZScaler:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewRows("z-scaling needs at least 2 rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # exact-zero test alone misses round-off in the std of a constant column
    flat = np.ptp(X, axis=0) == 0.0
    std = np.where(flat | (std == 0.0), 1.0, std)
    mean = np.where(flat, X[0], mean)
    return ZScaler(mean, std)


def apply_zscaler(scaler: ZScaler, X) -> np.ndarray:
    return scaler.transform(X)
