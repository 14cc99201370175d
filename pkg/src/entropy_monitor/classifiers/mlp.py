"""Fully connected ReLU network with a sigmoid output, trained by Adam.

Parameters live in one flat vector: for each layer the row-major weight
matrix (fan_in x fan_out) followed by the bias vector.  The loss per
mini-batch is mean log-loss + alpha/2 * ||W||^2 / batch_size (biases are not
penalised).  Early stopping monitors log-loss on a stratified 10% validation
split and restores the best parameters seen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import TooFewRows
from ..splits import check_two_classes
from ._rand import randbelow

ALPHA = 1e-3
LEARNING_RATE = 1e-3
BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8
MAX_EPOCHS = 200
PATIENCE = 10
TOL = 1e-4
VALIDATION_FRACTION = 0.1
MAX_BATCH = 200
MIN_ROWS = 10


def layer_sizes(n_features, hidden) -> np.ndarray:
    return np.array([n_features, *hidden, 1], dtype=np.int64)


def param_offsets(sizes) -> np.ndarray:
    """offsets[2l] = start of W_l, offsets[2l+1] = start of b_l, last = total."""
    out = [0]
    for l in range(len(sizes) - 1):
        out.append(out[-1] + sizes[l] * sizes[l + 1])
        out.append(out[-1] + sizes[l + 1])
    return np.array(out, dtype=np.int64)


_FM = {"reassoc", "contract"}


@njit(cache=True, fastmath=_FM)
def _forward(params, sizes, offs, act, nb):
    """Activations are stored unit-major: act[unit, sample], input units first."""
    L = sizes.size - 1
    a_off = 0
    for l in range(L):
        fi = sizes[l]
        fo = sizes[l + 1]
        w0 = offs[2 * l]
        b0 = offs[2 * l + 1]
        o_off = a_off + fi
        for k in range(fo):
            out = act[o_off + k]
            bk = params[b0 + k]
            for s in range(nb):
                out[s] = bk
            for j in range(fi):
                w = params[w0 + j * fo + k]
                inp = act[a_off + j]
                for s in range(nb):
                    out[s] += w * inp[s]
            if l < L - 1:
                for s in range(nb):
                    if out[s] < 0.0:
                        out[s] = 0.0
        a_off = o_off
    return a_off


@njit(cache=True, fastmath=_FM)
def _batch_loss_grad(params, sizes, offs, X, y, rows, nb, alpha, grad, act, delta, want_grad):
    """Mean log-loss over ``rows[:nb]`` plus the L2 term; fills ``grad`` if asked."""
    d = sizes[0]
    for s in range(nb):
        i = rows[s]
        for j in range(d):
            act[j, s] = X[i, j]
    out = _forward(params, sizes, offs, act, nb)
    z = act[out]
    dz = delta[out]
    inv = 1.0 / nb
    loss = 0.0
    for s in range(nb):
        zs = z[s]
        yv = y[rows[s]]
        # one exp serves both the loss and the sigmoid
        e = math.exp(-abs(zs))
        loss += max(zs, 0.0) - yv * zs + math.log1p(e)
        p = 1.0 / (1.0 + e) if zs >= 0.0 else e / (1.0 + e)
        dz[s] = (p - yv) * inv
    loss *= inv
    L = sizes.size - 1
    pen = 0.0
    for l in range(L):
        for q in range(offs[2 * l], offs[2 * l + 1]):
            pen += params[q] * params[q]
    loss += 0.5 * alpha * pen * inv
    if not want_grad:
        return loss
    grad[:] = 0.0
    o_off = out
    for l in range(L - 1, -1, -1):
        fi = sizes[l]
        fo = sizes[l + 1]
        w0 = offs[2 * l]
        b0 = offs[2 * l + 1]
        i_off = o_off - fi
        for k in range(fo):
            dk = delta[o_off + k]
            gb = 0.0
            for s in range(nb):
                gb += dk[s]
            grad[b0 + k] = gb
            for j in range(fi):
                inp = act[i_off + j]
                gw = 0.0
                for s in range(nb):
                    gw += inp[s] * dk[s]
                grad[w0 + j * fo + k] = gw + alpha * params[w0 + j * fo + k] * inv
        if l > 0:
            for j in range(fi):
                dj = delta[i_off + j]
                aj = act[i_off + j]
                for s in range(nb):
                    dj[s] = 0.0
                for k in range(fo):
                    w = params[w0 + j * fo + k]
                    dk = delta[o_off + k]
                    for s in range(nb):
                        dj[s] += w * dk[s]
                # ReLU: act > 0 exactly where the pre-activation was positive
                for s in range(nb):
                    if aj[s] <= 0.0:
                        dj[s] = 0.0
        o_off = i_off
    return loss


@njit(cache=True)
def _mean_logloss(params, sizes, offs, X, y, rows, act, delta, grad, max_batch):
    total = 0.0
    start = 0
    while start < rows.size:
        nb = min(max_batch, rows.size - start)
        bl = _batch_loss_grad(params, sizes, offs, X, y, rows[start:], nb, 0.0, grad, act,
                              delta, False)
        total += bl * nb
        start += nb
    return total / rows.size


@njit(cache=True)
def _train(params, sizes, offs, X, y, train_rows, val_rows, alpha, lr, beta1, beta2, eps,
           batch_size, max_epochs, patience, tol, seed):
    n_params = params.size
    units = 0
    for l in range(sizes.size):
        units += sizes[l]
    width = max(batch_size, min(val_rows.size, MAX_BATCH))
    act = np.zeros((units, width))
    delta = np.zeros((units, width))
    grad = np.zeros(n_params)
    m = np.zeros(n_params)
    v = np.zeros(n_params)
    best = params.copy()
    best_loss = np.inf
    no_improve = 0
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    order = train_rows.copy()
    n_train = order.size
    losses = np.empty(max_epochs)
    val_losses = np.empty(max_epochs)
    step = 0
    epochs = 0
    for epoch in range(max_epochs):
        for q in range(n_train - 1, 0, -1):
            j = randbelow(state, q + 1)
            tmp = order[q]
            order[q] = order[j]
            order[j] = tmp
        epoch_loss = 0.0
        start = 0
        while start < n_train:
            nb = min(batch_size, n_train - start)
            bl = _batch_loss_grad(params, sizes, offs, X, y, order[start:], nb, alpha,
                                  grad, act, delta, True)
            epoch_loss += bl * nb
            step += 1
            c1 = 1.0 - beta1 ** step
            c2 = 1.0 - beta2 ** step
            lr_t = lr * math.sqrt(c2) / c1
            for q in range(n_params):
                m[q] = beta1 * m[q] + (1.0 - beta1) * grad[q]
                v[q] = beta2 * v[q] + (1.0 - beta2) * grad[q] * grad[q]
                params[q] -= lr_t * m[q] / (math.sqrt(v[q]) + eps)
            start += nb
        losses[epoch] = epoch_loss / n_train
        vl = _mean_logloss(params, sizes, offs, X, y, val_rows, act, delta, grad, width)
        val_losses[epoch] = vl
        epochs = epoch + 1
        if vl > best_loss - tol:
            no_improve += 1
        else:
            no_improve = 0
        if vl < best_loss:
            best_loss = vl
            best[:] = params
        if no_improve >= patience:
            break
    params[:] = best
    return losses[:epochs].copy(), val_losses[:epochs].copy()


def init_params(sizes, rng) -> np.ndarray:
    """Glorot-uniform weights and biases; the sigmoid output layer uses gain 2 instead of 6."""
    offs = param_offsets(sizes)
    params = np.empty(offs[-1])
    L = len(sizes) - 1
    for l in range(L):
        fi, fo = int(sizes[l]), int(sizes[l + 1])
        factor = 2.0 if l == L - 1 else 6.0
        bound = math.sqrt(factor / (fi + fo))
        params[offs[2 * l]:offs[2 * l + 1]] = rng.uniform(-bound, bound, fi * fo)
        params[offs[2 * l + 1]:offs[2 * l + 2]] = rng.uniform(-bound, bound, fo)
    return params


def loss_and_grad(params, sizes, X, y, alpha=ALPHA):
    """Full-batch penalised loss and its analytic gradient (used for gradient checks)."""
    params = np.ascontiguousarray(params, dtype=np.float64)
    sizes = np.asarray(sizes, dtype=np.int64)
    offs = param_offsets(sizes)
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    units = int(sizes.sum())
    grad = np.zeros(params.size)
    rows = np.arange(n, dtype=np.int64)
    loss = _batch_loss_grad(params, sizes, offs, X, y, rows, n, alpha, grad,
                            np.zeros((units, n)), np.zeros((units, n)), True)
    return float(loss), grad


def random_oversample(X, y, rng):
    """Duplicate randomly drawn minority rows until both classes have equal counts."""
    n0, n1 = check_two_classes(y)
    if n0 == n1:
        return X, y
    minority = 1 if n1 < n0 else 0
    pool = np.flatnonzero(y == minority)
    extra = pool[rng.integers(0, pool.size, abs(n0 - n1))]
    idx = np.concatenate([np.arange(y.size), extra])
    return X[idx], y[idx]


def stratified_holdout(y, fraction, rng):
    train, val = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        k = max(1, int(round(fraction * idx.size))) if idx.size >= 2 else 0
        val.append(idx[:k])
        train.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


@dataclass
class MLPModel:
    hidden: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss_curve: np.ndarray | None = None
    validation_curve: np.ndarray | None = None

    family = "mlp"

    def predict_proba(self, Z) -> np.ndarray:
        a = np.asarray(Z, dtype=np.float64)
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ W + b, 0.0)
        z = (a @ self.weights[-1] + self.biases[-1])[:, 0]
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        e = np.exp(z[~pos])
        out[~pos] = e / (1.0 + e)
        return out

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p for W, b in zip(self.weights, self.biases) for p in (W.ravel(), b)])

    @classmethod
    def from_flat(cls, hidden, n_features, params, **kw):
        sizes = layer_sizes(n_features, hidden)
        offs = param_offsets(sizes)
        weights, biases = [], []
        for l in range(len(sizes) - 1):
            fi, fo = int(sizes[l]), int(sizes[l + 1])
            weights.append(params[offs[2 * l]:offs[2 * l + 1]].reshape(fi, fo).copy())
            biases.append(params[offs[2 * l + 1]:offs[2 * l + 2]].copy())
        return cls(tuple(int(h) for h in hidden), weights, biases, **kw)

    def to_dict(self):
        return {
            "hidden_layer_sizes": list(self.hidden),
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            tuple(d["hidden_layer_sizes"]),
            [np.asarray(W, dtype=np.float64) for W in d["weights"]],
            [np.asarray(b, dtype=np.float64) for b in d["biases"]],
        )


def train_mlp(X, y, hidden_sizes, seed=0, balance=False, alpha=ALPHA,
              max_epochs=MAX_EPOCHS, patience=PATIENCE) -> MLPModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    check_two_classes(y)
    if y.size < MIN_ROWS:
        raise TooFewRows(f"MLP training needs >= {MIN_ROWS} rows, got {y.size}")
    rng = np.random.default_rng(seed)
    if balance:
        X, y = random_oversample(X, y, rng)
    train_rows, val_rows = stratified_holdout(y, VALIDATION_FRACTION, rng)
    sizes = layer_sizes(X.shape[1], hidden_sizes)
    params = init_params(sizes, rng)
    loop_seed = np.uint64(int(rng.integers(0, 2**63 - 1)))
    batch = min(MAX_BATCH, train_rows.size)
    losses, val_losses = _train(
        params, sizes, param_offsets(sizes), X, y.astype(np.float64), train_rows, val_rows,
        alpha, LEARNING_RATE, BETA1, BETA2, EPSILON, batch, max_epochs, patience, TOL, loop_seed,
    )
    return MLPModel.from_flat(hidden_sizes, X.shape[1], params, loss_curve=losses,
                              validation_curve=val_losses)


def fit(X, y, params, balance, seed):
    return train_mlp(X, y, tuple(params["hidden_layer_sizes"]), seed, balance)
