"""Isotonic calibration by pool-adjacent-violators, applied cross-fitted."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput
from .splits import check_two_classes, cv_fold_ids, fold_seed


@dataclass(frozen=True)
class IsotonicMap:
    """Monotone map; linear between breakpoints, clamped to the end values outside."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if b.ndim != 1 or b.shape != v.shape or b.size == 0:
            raise ValueError("breakpoints and values must be equal-length non-empty vectors")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(v) < 0):
            raise ValueError("values must be non-decreasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    def __call__(self, scores) -> np.ndarray:
        s = np.asarray(scores, dtype=np.float64)
        return np.interp(s, self.breakpoints, self.values)

    def to_dict(self):
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["breakpoints"]), np.asarray(d["values"]))


def pava(scores, targets, weights=None) -> IsotonicMap:
    """Weighted least-squares non-decreasing fit of targets against scores.

    Rows with equal scores are merged first (weights summed, targets averaged),
    so each breakpoint is a distinct score.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if s.size == 0:
        raise EmptyInput("pava needs at least one point")
    if t.shape != s.shape:
        raise ValueError("scores and targets differ in length")
    w = np.ones_like(s) if weights is None else np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape != s.shape or np.any(w <= 0):
        raise ValueError("weights must be positive and match scores")

    order = np.argsort(s, kind="mergesort")
    s, t, w = s[order], t[order], w[order]
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    xs = s[starts]
    ws = np.add.reduceat(w, starts)
    ys = np.add.reduceat(w * t, starts) / ws

    # block stack: mean, weight, number of distinct scores pooled
    means, wts, sizes = [], [], []
    for y_i, w_i in zip(ys, ws):
        m, wt, sz = float(y_i), float(w_i), 1
        while means and means[-1] >= m:
            pm, pw, ps = means.pop(), wts.pop(), sizes.pop()
            m = (pm * pw + m * wt) / (pw + wt)
            wt += pw
            sz += ps
        means.append(m)
        wts.append(wt)
        sizes.append(sz)
    fitted = np.repeat(np.array(means), sizes)
    # pooled means of {0,1} targets lie in [0,1] up to round-off
    if np.all((t == 0) | (t == 1)):
        fitted = np.clip(fitted, 0.0, 1.0)
    return IsotonicMap(xs, np.maximum.accumulate(fitted))


def calibrate(fit_fn, Z, y, folds=5, seed=0):
    """Cross-fitted isotonic calibration.

    ``fit_fn(Z, y, seed)`` returns an object with ``predict_proba``.  For each
    fold the base model is trained on the other folds and a map is fitted on
    its out-of-fold outputs.  Returns ``[(base_model, IsotonicMap), ...]``;
    the calibrated prediction is the mean over members.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    check_two_classes(y)
    fold_ids = cv_fold_ids(y, folds, seed)
    members = []
    for k in range(folds):
        tr = fold_ids != k
        model = fit_fn(Z[tr], y[tr], fold_seed(seed, k))
        members.append((model, pava(model.predict_proba(Z[~tr]), y[~tr])))
    return members


def predict_members(members, Z) -> np.ndarray:
    out = np.zeros(np.asarray(Z).shape[0])
    for model, cal in members:
        p = model.predict_proba(Z)
        out += cal(p) if cal is not None else p
    return out / len(members)
