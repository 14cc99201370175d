"""Random forest of Gini decision trees, built by numba kernels.

Each tree sees a bootstrap sample of size n, represented as per-row counts
(rows with count 0 are out of bag).  Every split considers floor(sqrt(d))
candidate features drawn from a per-tree SplitMix64 stream; features that are
constant inside the node are skipped without counting toward that budget.
Equal-quality splits go to the lowest feature index, then the lowest
threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..splits import check_two_classes
from ._rand import randbelow

N_ESTIMATORS = 100


@njit(cache=True)
def _build_tree(X, y, w, order, max_depth, min_samples_split, max_features, seed,
                feat, thr, left, right, value):
    n, d = X.shape
    # per-feature in-bag rows in ascending feature order
    # the hot loops below are written branch-free: in-bag membership and
    # split sides are close to random, so branches would mostly mispredict
    inbag = np.empty(n, dtype=np.int64)
    w1s = np.empty(n)
    w0s = np.empty(n)
    m = 0
    for i in range(n):
        inbag[i] = 1 if w[i] > 0.0 else 0
        m += inbag[i]
        w1s[i] = w[i] * y[i]
        w0s[i] = w[i] - w1s[i]
    S = np.empty((d, m + 1), dtype=np.int64)
    for f in range(d):
        k = 0
        for r in range(n):
            i = order[f, r]
            S[f, k] = i
            k += inbag[i]
    buf = np.empty(m + 1, dtype=np.int64)
    goes_left = np.zeros(n, dtype=np.int64)
    fidx = np.empty(d, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed

    st_node = np.empty(2 * m + 1, dtype=np.int64)
    st_start = np.empty(2 * m + 1, dtype=np.int64)
    st_end = np.empty(2 * m + 1, dtype=np.int64)
    st_depth = np.empty(2 * m + 1, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        s = st_start[top]
        e = st_end[top]
        depth = st_depth[top]

        w0 = 0.0
        w1 = 0.0
        for k in range(s, e):
            i = S[0, k]
            w1 += w1s[i]
            w0 += w0s[i]
        W = w0 + w1
        value[node] = w1 / W
        feat[node] = -1
        thr[node] = 0.0
        left[node] = -1
        right[node] = -1
        if depth >= max_depth or (e - s) < min_samples_split or w0 == 0.0 or w1 == 0.0:
            continue

        best_score = -1.0
        best_f = -1
        best_t = 0.0
        for f in range(d):
            fidx[f] = f
        visited = 0
        for q in range(d):
            j = q + randbelow(state, d - q)
            tmp = fidx[q]
            fidx[q] = fidx[j]
            fidx[j] = tmp
            f = fidx[q]
            if X[S[f, s], f] == X[S[f, e - 1], f]:
                continue
            visited += 1
            l0 = 0.0
            l1 = 0.0
            for k in range(s, e - 1):
                i = S[f, k]
                l1 += w1s[i]
                l0 += w0s[i]
                xv = X[i, f]
                xn = X[S[f, k + 1], f]
                if xn <= xv:
                    continue
                wl = l0 + l1
                r0 = w0 - l0
                r1 = w1 - l1
                wr = r0 + r1
                # maximising this is minimising the weighted child Gini impurity
                score = (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr
                t = xv + (xn - xv) / 2.0
                if t >= xn:
                    t = xv
                if (score > best_score
                        or (score == best_score
                            and (f < best_f or (f == best_f and t < best_t)))):
                    best_score = score
                    best_f = f
                    best_t = t
            if visited >= max_features:
                break
        if best_f < 0:
            continue

        for k in range(s, e):
            i = S[0, k]
            goes_left[i] = 1 if X[i, best_f] <= best_t else 0
        n_left = 0
        for g in range(d):
            a = 0
            b = 0
            for k in range(s, e):
                i = S[g, k]
                gl = goes_left[i]
                S[g, s + a] = i
                buf[b] = i
                a += gl
                b += 1 - gl
            for k in range(b):
                S[g, s + a + k] = buf[k]
            n_left = a

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feat[node] = best_f
        thr[node] = best_t
        left[node] = lc
        right[node] = rc
        st_node[top] = rc
        st_start[top] = s + n_left
        st_end[top] = e
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lc
        st_start[top] = s
        st_end[top] = s + n_left
        st_depth[top] = depth + 1
        top += 1
    return n_nodes


@njit(cache=True)
def _bootstrap_weights(draws, y, balance, w):
    """Per-row bootstrap counts, optionally reweighted by in-sample class frequency."""
    n = y.size
    w[:] = 0.0
    for r in range(draws.size):
        w[draws[r]] += 1.0
    if balance:
        n1 = 0.0
        for i in range(n):
            n1 += w[i] * y[i]
        n0 = n - n1
        c1 = n / (2.0 * n1) if n1 > 0 else 0.0
        c0 = n / (2.0 * n0) if n0 > 0 else 0.0
        for i in range(n):
            w[i] *= c1 if y[i] == 1 else c0


@njit(cache=True)
def _build_forest(X, y, draws, balance, order, max_depth, min_samples_split, max_features, seeds):
    n_trees, n = draws.shape
    cap = 2 * n + 1
    feat = np.empty(n_trees * cap, dtype=np.int64)
    thr = np.empty(n_trees * cap)
    left = np.empty(n_trees * cap, dtype=np.int64)
    right = np.empty(n_trees * cap, dtype=np.int64)
    value = np.empty(n_trees * cap)
    offsets = np.zeros(n_trees + 1, dtype=np.int64)
    w = np.empty(n)
    pos = 0
    for t in range(n_trees):
        _bootstrap_weights(draws[t], y, balance, w)
        k = _build_tree(X, y, w, order, max_depth, min_samples_split,
                        max_features, seeds[t],
                        feat[pos:], thr[pos:], left[pos:], right[pos:], value[pos:])
        pos += k
        offsets[t + 1] = pos
    return feat[:pos].copy(), thr[:pos].copy(), left[:pos].copy(), right[:pos].copy(), \
        value[:pos].copy(), offsets


@njit(cache=True)
def _predict(X, feat, thr, left, right, value, offsets):
    n = X.shape[0]
    n_trees = offsets.size - 1
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feat[base + node] >= 0:
                if X[i, feat[base + node]] <= thr[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            acc += value[base + node]
        out[i] = acc / n_trees
    return out


@dataclass
class ForestModel:
    """Flat node arrays; child indices are local to each tree, ``offsets`` delimit trees."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray

    family = "random_forest"

    @property
    def n_trees(self) -> int:
        return self.offsets.size - 1

    def predict_proba(self, Z) -> np.ndarray:
        Z = np.ascontiguousarray(Z, dtype=np.float64)
        return _predict(Z, self.feature, self.threshold, self.left, self.right,
                        self.value, self.offsets)

    def _tree_to_dict(self, t, node=0):
        i = self.offsets[t] + node
        if self.feature[i] < 0:
            return {"value": float(self.value[i])}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "value": float(self.value[i]),
            "left": self._tree_to_dict(t, int(self.left[i])),
            "right": self._tree_to_dict(t, int(self.right[i])),
        }

    def to_dict(self):
        return {"trees": [self._tree_to_dict(t) for t in range(self.n_trees)]}

    @classmethod
    def from_dict(cls, d):
        feat, thr, left, right, value, offsets = [], [], [], [], [], [0]
        for tree in d["trees"]:
            base = len(feat)
            # preorder flattening; children are patched after they are placed
            stack = [(tree, None, None)]
            while stack:
                rec, parent, side = stack.pop()
                idx = len(feat) - base
                if parent is not None:
                    (left if side == "left" else right)[base + parent] = idx
                feat.append(int(rec.get("feature", -1)) if "left" in rec else -1)
                thr.append(float(rec.get("threshold", 0.0)))
                value.append(float(rec["value"]))
                left.append(-1)
                right.append(-1)
                if "left" in rec:
                    stack.append((rec["right"], idx, "right"))
                    stack.append((rec["left"], idx, "left"))
            offsets.append(len(feat))
        return cls(
            np.array(feat, dtype=np.int64),
            np.array(thr, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=np.float64),
            np.array(offsets, dtype=np.int64),
        )


def max_features_for(d: int) -> int:
    return max(1, math.isqrt(d))


def train_random_forest(X, y, max_depth, min_samples_split, balance=False, seed=0,
                        n_estimators=N_ESTIMATORS) -> ForestModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    check_two_classes(y)
    n, d = X.shape
    rng = np.random.default_rng(seed)
    # bootstrap rows per tree; "balanced_subsample" reweighting happens per tree in the kernel
    draws = rng.integers(0, n, size=(n_estimators, n))
    seeds = rng.integers(0, 2**63 - 1, size=n_estimators, dtype=np.int64).astype(np.uint64)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    parts = _build_forest(X, y, draws, bool(balance), order, int(max_depth),
                          int(min_samples_split), max_features_for(d), seeds)
    return ForestModel(*parts)


def fit(X, y, params, balance, seed):
    return train_random_forest(
        X, y, params["max_depth"], params["min_samples_split"], balance, seed
    )
