"""Fixed-size sample encoding, feature scaling, minority oversampling and splitting.

Samples are stored as a batch: ``X`` of shape (n_samples, pc, 5) with feature
order (x, y, z, rcs, doppler), ``y`` of shape (n_samples, pc) holding class
codes, and ``frame_start`` with each sample's window start time.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_samples
from .config import ConfigError
from .returns import ClassLabel, N_CLASSES, Returns

log = logging.getLogger(__name__)

DEFAULT_SCALES = (120.0, 120.0, 120.0, 40.0, 25.0)
FEATURES = ("x", "y", "z", "rcs", "doppler")
DOPPLER = 4


def encode_indices(doppler, pc: int, rng) -> np.ndarray:
    """Row indices of one encoded frame, moving returns first.

    Shuffled nonzero-doppler rows are followed by shuffled zero-doppler rows
    and the concatenation is cycled until ``pc`` rows are taken.
    """
    if pc <= 0:
        raise ConfigError("point count must be positive")
    doppler = np.asarray(doppler)
    moving = np.flatnonzero(doppler != 0)
    static = np.flatnonzero(doppler == 0)
    order = np.concatenate([rng.permutation(moving), rng.permutation(static)])
    if len(order) == 0:
        return order
    return np.resize(order, pc)  # cyclic repetition


@dataclass
class Sample:
    points: np.ndarray       # (pc, 5)
    labels: np.ndarray       # (pc,)
    frame_start: float
    tf: float


def encode_frame(points: Returns, tf: float, pc: int, seed) -> Sample | None:
    """Encode the returns of one timeframe; ``None`` for an empty frame."""
    idx = encode_indices(points.doppler, pc, np.random.default_rng(seed))
    if len(idx) == 0:
        return None
    start = float(np.min(points.t))
    return Sample(points.features()[idx].astype(np.float32), points.label[idx].copy(), start, tf)


def frame_index(t, tf: float) -> np.ndarray:
    # snap to a microsecond grid so window edges do not drift with float error
    return np.floor(np.round(np.asarray(t, float) * 1e6) / np.round(tf * 1e6)).astype(np.int64)


class FrameEncoder(TransformerMixin, BaseEstimator):
    """Cut a return stream into ``tf``-second windows and encode each to ``pc`` points.

    Windows are ``[k * tf, (k + 1) * tf)``. Empty windows are skipped. Each
    window draws from its own generator seeded by ``(random_state, k)``, so
    results do not depend on processing order.
    """

    def __init__(self, tf: float = 0.2, pc: int = 256, random_state: int = 0):
        self.tf = tf
        self.pc = pc
        self.random_state = random_state

    def fit(self, returns=None, y=None):
        if self.tf <= 0:
            raise ConfigError("timeframe must be positive")
        if self.pc <= 0:
            raise ConfigError("point count must be positive")
        self.n_features_in_ = len(FEATURES)
        return self

    def transform(self, returns: Returns):
        """Return ``(X, y, frame_start)`` for all non-empty windows."""
        self.fit()
        if len(returns) == 0:
            return (np.zeros((0, self.pc, 5), np.float32), np.zeros((0, self.pc), np.uint8),
                    np.zeros(0))
        k = frame_index(returns.t, self.tf)
        order = np.argsort(k, kind="stable")
        k_sorted = k[order]
        frames, first = np.unique(k_sorted, return_index=True)
        bounds = np.append(first, len(order))
        feats = returns.features()
        X = np.empty((len(frames), self.pc, 5), np.float32)
        y = np.empty((len(frames), self.pc), np.uint8)
        for i, frame in enumerate(frames):
            rows = order[bounds[i]:bounds[i + 1]]
            gen = np.random.default_rng([int(self.random_state), int(frame)])
            idx = rows[encode_indices(returns.doppler[rows], self.pc, gen)]
            X[i] = feats[idx]
            y[i] = returns.label[idx]
        return X, y, frames * self.tf


class FeatureScaler(TransformerMixin, BaseEstimator):
    """Divide each feature by a fixed positive constant; zero stays zero."""

    def __init__(self, scales=DEFAULT_SCALES):
        self.scales = scales

    def fit(self, X=None, y=None):
        s = np.asarray(self.scales, dtype=np.float64)
        if s.shape != (5,) or np.any(s <= 0):
            raise ConfigError("scales must be five positive constants")
        self.scales_ = s
        return self

    def transform(self, X):
        self.fit()
        X = check_samples(X, dtype=None)
        return (X / self.scales_.astype(X.dtype)).astype(X.dtype)

    def inverse_transform(self, X):
        self.fit()
        X = check_samples(X, dtype=None)
        return (X * self.scales_.astype(X.dtype)).astype(X.dtype)


def normalize(X, scales=DEFAULT_SCALES):
    return FeatureScaler(scales).transform(X)


def class_share(y, cls) -> float:
    y = np.asarray(y)
    return float(np.mean(y == int(cls))) if y.size else 0.0


def oversample_minority(X, y, cls=ClassLabel.AIRPLANE, target_fraction: float = 0.02, frame_start=None):
    """Duplicate samples holding ``cls`` until its point share reaches ``target_fraction``.

    Samples are duplicated round-robin in their original order, one at a
    time, so the final share lands just above the target. Duplicates are
    appended; existing samples are never modified.
    """
    X = np.asarray(X)
    y = np.asarray(y)
    carriers = np.flatnonzero((y == int(cls)).any(axis=1))
    if len(carriers) == 0:
        warnings.warn(f"class {int(cls)} absent; oversampling skipped", RuntimeWarning, stacklevel=2)
        return (X, y) if frame_start is None else (X, y, frame_start)
    per_sample = (y[carriers] == int(cls)).sum(axis=1)
    hits = int((y == int(cls)).sum())
    total = y.size
    pc = y.shape[1]
    ceiling = per_sample.sum() / (len(carriers) * pc)  # share reached in the limit of infinite copies
    if hits / total < target_fraction and ceiling <= target_fraction:
        raise ValueError(f"class {int(cls)} share cannot exceed {ceiling:.4f} by duplicating whole samples; "
                         f"target {target_fraction} unreachable")
    extra = []
    i = 0
    while hits / total < target_fraction:
        j = i % len(carriers)
        extra.append(carriers[j])
        hits += int(per_sample[j])
        total += pc
        i += 1
    idx = np.concatenate([np.arange(len(X)), np.asarray(extra, dtype=np.int64)])
    if frame_start is None:
        return X[idx], y[idx]
    return X[idx], y[idx], np.asarray(frame_start)[idx]


@dataclass
class DatasetSplit:
    train_idx: np.ndarray
    val_idx: np.ndarray

    def histograms(self, y):
        y = np.asarray(y)
        return {name: np.bincount(y[idx].reshape(-1), minlength=N_CLASSES + 1)[1:]
                for name, idx in (("train", self.train_idx), ("val", self.val_idx))}


def split_train_val(y, ratio: float = 0.75, seed: int = 0,
                    minority=ClassLabel.AIRPLANE) -> DatasetSplit:
    """Stratified (by "contains ``minority``") train/validation split of sample indices."""
    y = np.asarray(y)
    n = len(y)
    if n < 4:
        raise ConfigError("need at least 4 samples to split")
    if not 0.0 < ratio < 1.0:
        raise ConfigError("split ratio must be in (0, 1)")
    gen = np.random.default_rng([int(seed), 0x5A17])
    flag = (y == int(minority)).any(axis=1)
    n_train = int(round(ratio * n))
    if flag.sum() < 2:
        warnings.warn("fewer than 2 minority samples; falling back to a random split",
                      RuntimeWarning, stacklevel=2)
        perm = gen.permutation(n)
        return DatasetSplit(np.sort(perm[:n_train]), np.sort(perm[n_train:]))
    pos = gen.permutation(np.flatnonzero(flag))
    neg = gen.permutation(np.flatnonzero(~flag))
    k_pos = min(max(int(round(ratio * len(pos))), 1), len(pos) - 1)
    k_neg = n_train - k_pos
    train = np.concatenate([pos[:k_pos], neg[:k_neg]])
    val = np.concatenate([pos[k_pos:], neg[k_neg:]])
    return DatasetSplit(np.sort(train), np.sort(val))
