"""Entropy-profile features: eleven summary statistics of an entropy trajectory."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import ConfigError, EmptyInput, EmptyTrajectory, QOutOfRange

FEATURE_NAMES = (
    "h_max",
    "h_mean",
    "h_std",
    "h_q10",
    "h_q25",
    "h_q50",
    "h_q75",
    "h_q90",
    "h_skew",
    "h_kurt",
    "h_sea",
)
# bump whenever FEATURE_NAMES or any statistic definition changes
FEATURE_VERSION = 1
QUANTILE_LEVELS = (0.10, 0.25, 0.50, 0.75, 0.90)


@dataclass(frozen=True)
class EntropyProfile:
    h_max: float
    h_mean: float
    h_std: float
    h_q10: float
    h_q25: float
    h_q50: float
    h_q75: float
    h_q90: float
    h_skew: float
    h_kurt: float
    h_sea: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "EntropyProfile":
        values = [float(v) for v in values]
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values, got {len(values)}")
        return cls(*values)


assert tuple(f.name for f in fields(EntropyProfile)) == FEATURE_NAMES


@dataclass(frozen=True)
class FeatureSubset:
    name: str
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if not idx:
            raise ConfigError(f"feature subset {self.name!r} is empty")
        if idx[0] < 0 or idx[-1] >= len(FEATURE_NAMES):
            raise ConfigError(f"feature subset {self.name!r} has out-of-range indices")
        object.__setattr__(self, "indices", idx)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(FEATURE_NAMES[i] for i in self.indices)

    def to_dict(self):
        return {"name": self.name, "indices": list(self.indices)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], tuple(d["indices"]))


FEATURE_SUBSETS = {
    "full11": FeatureSubset("full11", tuple(range(11))),
    "max_only": FeatureSubset("max_only", (0,)),
    "sea_only": FeatureSubset("sea_only", (10,)),
    "top2": FeatureSubset("top2", (0, 10)),
    "baselines3": FeatureSubset("baselines3", (0, 1, 10)),
}


def get_subset(name_or_subset) -> FeatureSubset:
    if isinstance(name_or_subset, FeatureSubset):
        return name_or_subset
    try:
        return FEATURE_SUBSETS[name_or_subset]
    except KeyError:
        raise ConfigError(
            f"unknown feature subset {name_or_subset!r}; choose from {sorted(FEATURE_SUBSETS)}"
        ) from None


def _interpolate_sorted(xs: np.ndarray, q: float) -> float:
    pos = (xs.size - 1) * q
    lo = math.floor(pos)
    hi = min(lo + 1, xs.size - 1)
    frac = pos - lo
    if frac == 0.0:
        return float(xs[lo])
    return float(xs[lo] + (xs[hi] - xs[lo]) * frac)


def quantile(values, q: float) -> float:
    """Linear interpolation between order statistics at rank position (n-1)*q."""
    xs = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if xs.size == 0:
        raise EmptyInput("quantile of an empty sequence")
    if not 0.0 <= q <= 1.0:
        raise QOutOfRange(f"q={q} outside [0, 1]")
    return _interpolate_sorted(xs, q)


def summarize(trajectory) -> EntropyProfile:
    x = np.asarray(trajectory, dtype=np.float64).reshape(-1)
    n = x.size
    if n == 0:
        raise EmptyTrajectory("cannot summarise an empty trajectory")
    xs = np.sort(x)
    total = math.fsum(x)
    mean = total / n
    d = x - mean
    scale = float(np.max(np.abs(d)))
    # a constant trajectory has no shape; mean round-off must not leak into skew/kurt
    flat = xs[0] == xs[-1] or scale == 0.0
    skew = 0.0
    kurt = 0.0
    std = 0.0
    if flat:
        mean = float(xs[0])
    else:
        # moments of d / max|d|: same ratios, no under/overflow on tiny or huge spreads
        u = d / scale
        m2 = float(np.mean(u * u))
        std = scale * math.sqrt(m2)
        if n >= 3:
            skew = float(np.mean(u**3)) / m2**1.5
        if n >= 4:
            kurt = float(np.mean(u**4)) / (m2 * m2) - 3.0
    qs = [_interpolate_sorted(xs, q) for q in QUANTILE_LEVELS]
    return EntropyProfile(
        float(xs[-1]), mean, std, *qs, skew, kurt, total
    )
