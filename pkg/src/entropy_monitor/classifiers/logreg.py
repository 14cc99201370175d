"""L1-penalised logistic regression.

Minimises ``C * sum_i w_i * logloss_i + ||beta||_1`` with an unpenalised
intercept, using proximal Newton steps: each outer iteration builds the exact
Hessian of the smooth part, solves the L1-regularised quadratic model by
cyclic coordinate descent and backtracks on the true objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import NonConvergence
from ..splits import balanced_class_weights, check_two_classes

TOL = 1e-6
MAX_ITER = 10_000


@njit(cache=True)
def _softplus(z):
    if z > 0.0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


@njit(cache=True)
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def _objective(X, y, w, C, beta, b):
    n, d = X.shape
    loss = 0.0
    for i in range(n):
        eta = b
        for j in range(d):
            eta += X[i, j] * beta[j]
        loss += w[i] * (_softplus(eta) - y[i] * eta)
    pen = 0.0
    for j in range(d):
        pen += abs(beta[j])
    return C * loss + pen


@njit(cache=True)
def _violation(g, beta):
    # minimum-norm subgradient of the full objective; g[0] is the intercept
    v = abs(g[0])
    for j in range(beta.size):
        gj = g[j + 1]
        if beta[j] > 0.0:
            r = abs(gj + 1.0)
        elif beta[j] < 0.0:
            r = abs(gj - 1.0)
        else:
            r = max(0.0, abs(gj) - 1.0)
        if r > v:
            v = r
    return v


@njit(cache=True)
def _fit(X, y, w, C, tol, max_iter):
    n, d = X.shape
    m = d + 1
    beta = np.zeros(d)
    b = 0.0
    eta = np.zeros(n)
    p = np.empty(n)
    g = np.empty(m)
    H = np.empty((m, m))
    delta = np.empty(m)
    Hd = np.empty(m)
    new_beta = np.empty(d)
    deta = np.empty(n)
    viol = np.inf
    last_step = np.inf
    converged = False
    it = 0
    for it in range(max_iter):
        for i in range(n):
            p[i] = _sigmoid(eta[i])
        g[:] = 0.0
        H[:, :] = 0.0
        for i in range(n):
            r = C * w[i] * (p[i] - y[i])
            h = C * w[i] * p[i] * (1.0 - p[i])
            g[0] += r
            H[0, 0] += h
            for j in range(d):
                xij = X[i, j]
                g[j + 1] += r * xij
                H[0, j + 1] += h * xij
                for k in range(j, d):
                    H[j + 1, k + 1] += h * xij * X[i, k]
        for j in range(m):
            for k in range(j):
                H[j, k] = H[k, j]
        viol = _violation(g, beta)
        scale = 1.0 + abs(b)
        for j in range(d):
            scale = max(scale, 1.0 + abs(beta[j]))
        if viol <= tol and last_step <= 1e-10 * scale:
            converged = True
            break

        # coordinate descent on the quadratic model, in terms of delta
        delta[:] = 0.0
        Hd[:] = 0.0
        for sweep in range(1000):
            max_change = 0.0
            for k in range(m):
                a = H[k, k] + 1e-12
                c = g[k] + Hd[k] - H[k, k] * delta[k]
                if k == 0:
                    new = -c / a
                else:
                    z = beta[k - 1] - c / a
                    thr = 1.0 / a
                    if z > thr:
                        u = z - thr
                    elif z < -thr:
                        u = z + thr
                    else:
                        u = 0.0
                    new = u - beta[k - 1]
                change = new - delta[k]
                if change != 0.0:
                    for q in range(m):
                        Hd[q] += H[q, k] * change
                    delta[k] = new
                    if abs(change) > max_change:
                        max_change = abs(change)
            if max_change <= 1e-13 * scale:
                break

        # predicted decrease of the composite model
        l1_old = 0.0
        l1_new = 0.0
        pred = 0.0
        for k in range(m):
            pred += g[k] * delta[k]
        for j in range(d):
            l1_old += abs(beta[j])
            l1_new += abs(beta[j] + delta[j + 1])
        pred += l1_new - l1_old
        for i in range(n):
            s = delta[0]
            for j in range(d):
                s += X[i, j] * delta[j + 1]
            deta[i] = s

        # backtracking; the loss difference is formed per sample to stay
        # accurate when the step is tiny relative to the objective
        t = 1.0
        accepted = False
        while t > 1e-14:
            dl = 0.0
            for i in range(n):
                step = t * deta[i]
                dl += w[i] * (math.log1p(p[i] * math.expm1(step)) - y[i] * step)
            l1_t = 0.0
            for j in range(d):
                new_beta[j] = beta[j] + t * delta[j + 1]
                l1_t += abs(new_beta[j])
            change = C * dl + l1_t - l1_old
            if change <= 0.01 * t * pred or (pred >= 0.0 and change <= 0.0):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        last_step = 0.0
        for k in range(m):
            last_step = max(last_step, abs(t * delta[k]))
        b += t * delta[0]
        for j in range(d):
            beta[j] = new_beta[j]
        for i in range(n):
            eta[i] += t * deta[i]
    if not converged:
        # final check after the last accepted step
        for i in range(n):
            p[i] = _sigmoid(eta[i])
        g[:] = 0.0
        for i in range(n):
            r = C * w[i] * (p[i] - y[i])
            g[0] += r
            for j in range(d):
                g[j + 1] += r * X[i, j]
        viol = _violation(g, beta)
        converged = viol <= tol
    return beta, b, viol, converged, it


@dataclass
class LogisticModel:
    coef: np.ndarray
    intercept: float

    family = "logreg_l1"

    def decision_function(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) @ self.coef + self.intercept

    def predict_proba(self, Z) -> np.ndarray:
        eta = self.decision_function(Z)
        # stable sigmoid that is exact 0/1 only in the true limits
        out = np.empty_like(eta)
        pos = eta >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
        e = np.exp(eta[~pos])
        out[~pos] = e / (1.0 + e)
        return out

    def to_dict(self):
        return {"coef": self.coef.tolist(), "intercept": float(self.intercept)}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["coef"], dtype=np.float64), float(d["intercept"]))


def objective(X, y, C, beta, intercept, sample_weight=None) -> float:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones(y.size) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    return float(_objective(X, y, w, float(C), np.asarray(beta, dtype=np.float64), float(intercept)))


def train_logreg_l1(
    X, y, C, class_weight=None, seed=None, tol=TOL, max_iter=MAX_ITER
) -> LogisticModel:
    """Fit the L1 logistic model.

    ``class_weight`` is ``None``, ``"balanced"`` (n / (2 n_c)) or a pair
    ``(w_incorrect, w_correct)``.  The solver is deterministic; ``seed`` is
    accepted for interface symmetry with the other families.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    check_two_classes(y)
    if class_weight is None:
        w = np.ones(y.size)
    elif isinstance(class_weight, str):
        if class_weight != "balanced":
            raise ValueError(f"unknown class_weight {class_weight!r}")
        w = balanced_class_weights(y)
    else:
        w0, w1 = (float(v) for v in class_weight)
        w = np.where(y == 1, w1, w0)
    beta, b, viol, converged, _ = _fit(X, y.astype(np.float64), w, float(C), tol, max_iter)
    if not converged:
        raise NonConvergence(max_iter, viol)
    return LogisticModel(beta, float(b))


def fit(X, y, params, balance, seed):
    return train_logreg_l1(X, y, params["C"], "balanced" if balance else None, seed)
