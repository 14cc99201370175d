"""Seed derivation and stratified fold assignment."""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .errors import SingleClass, TooFewRows


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any JSON-serialisable parts.

    Independent of process, platform and PYTHONHASHSEED, so work items can be
    scheduled in any order and still reproduce.
    """
    blob = json.dumps(parts, sort_keys=True, separators=(",", ":"), default=str)
    digest = hashlib.blake2b(blob.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") & (2**63 - 1)


def check_two_classes(y) -> tuple[int, int]:
    y = np.asarray(y)
    n1 = int(np.sum(y == 1))
    n0 = int(y.size - n1)
    if n0 == 0 or n1 == 0:
        raise SingleClass(f"training labels contain a single class (n0={n0}, n1={n1})")
    return n0, n1


def stratified_folds(y, n_folds: int, seed: int) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin across folds."""
    y = np.asarray(y)
    n0, n1 = check_two_classes(y)
    if min(n0, n1) < n_folds:
        raise TooFewRows(
            f"{n_folds}-fold stratification needs >= {n_folds} rows per class (n0={n0}, n1={n1})"
        )
    rng = np.random.default_rng(seed)
    folds = np.empty(y.size, dtype=np.int64)
    offset = 0
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        # continue dealing where the previous class stopped so fold sizes stay balanced
        folds[idx] = (np.arange(idx.size) + offset) % n_folds
        offset = (offset + idx.size) % n_folds
    return folds


def balanced_class_weights(y) -> np.ndarray:
    """Per-row weight n / (2 * n_class)."""
    y = np.asarray(y)
    n0, n1 = check_two_classes(y)
    n = y.size
    return np.where(y == 1, n / (2.0 * n1), n / (2.0 * n0))


def cv_fold_ids(y, n_folds: int, seed: int) -> np.ndarray:
    """Fold ids shared by grid search and cross-fitted calibration for one seed."""
    return stratified_folds(y, n_folds, derive_seed(seed, "cv-folds"))


def fold_seed(seed: int, k: int) -> int:
    return derive_seed(seed, "fold", k)
