"""Bagged Gini decision trees over per-point features.

Trees are grown level by level on pre-binned features: each level builds one
class histogram per (node, feature, bin) with ``np.bincount`` and scores every
candidate split at once. When a feature has no more distinct values than
``max_bins`` the bin edges are exact midpoints, so the search is exhaustive.
Chosen thresholds are moved to the midpoint between the node's neighbouring
values, which makes a tree built this way identical to the brute-force
:func:`reference_tree` whenever binning is exact.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_labels, check_point_features
from ..returns import CLASS_CODES, N_CLASSES

log = logging.getLogger(__name__)


@dataclass
class Tree:
    feature: np.ndarray     # -1 at leaves
    threshold: np.ndarray   # go left when x <= threshold
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray      # (n_nodes, n_classes) training class counts

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def canonical(self, node: int = 0):
        """Nested tuple form, independent of node numbering."""
        if self.feature[node] < 0:
            return tuple(int(c) for c in self.counts[node])
        return (int(self.feature[node]), float(self.threshold[node]),
                self.canonical(int(self.left[node])), self.canonical(int(self.right[node])))

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, n = rows[inner], node[inner]
            go_left = X[r, f[inner]] <= self.threshold[n]
            node[inner] = np.where(go_left, self.left[n], self.right[n])

    def predict(self, X) -> np.ndarray:
        """Zero-based majority class of the reached leaf (ties to the lower class)."""
        return self.counts[self.apply(X)].argmax(axis=1)


def gini_score(left, right):
    """Weighted Gini impurity ``n_L * G_L + n_R * G_R`` of candidate splits.

    ``left`` and ``right`` are class-count arrays with classes on the last axis.
    """
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    nl = left.sum(axis=-1)
    nr = right.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        gl = np.where(nl > 0, nl - (left ** 2).sum(axis=-1) / nl, 0.0)
        gr = np.where(nr > 0, nr - (right ** 2).sum(axis=-1) / nr, 0.0)
    return gl + gr


def bin_edges(X, max_bins: int = 64) -> list:
    """Per-feature split candidates: exact midpoints, or quantile edges if too many values."""
    edges = []
    for f in range(X.shape[1]):
        u = np.unique(X[:, f])
        if len(u) <= max_bins:
            e = (u[:-1] + u[1:]) / 2.0
        else:
            q = np.quantile(X[:, f], np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
            e = np.unique(q)
        edges.append(e)
    return edges


def apply_bins(X, edges) -> np.ndarray:
    # bin j holds values in (e[j-1], e[j]]: x <= e[j] exactly when bin <= j
    return np.stack([np.searchsorted(e, X[:, f], side="left") for f, e in enumerate(edges)],
                    axis=1).astype(np.int32)


def grow_tree(X, Xb, y, n_bins, n_classes, max_depth=12, min_leaf=1, max_features=None, rng=None) -> Tree:
    """Grow one tree on binned features ``Xb`` (raw ``X`` refines thresholds)."""
    n, n_feat = Xb.shape
    mf = n_feat if max_features is None else min(int(max_features), n_feat)
    B, K = int(n_bins), int(n_classes)
    feature, threshold, left, right, counts = [-1], [0.0], [-1], [-1], [np.bincount(y, minlength=K)]
    pos = np.zeros(n, dtype=np.int64)           # index into the frontier, -1 once settled
    frontier = np.array([0])
    for depth in range(max_depth + 1):
        m = len(frontier)
        active = np.flatnonzero(pos >= 0)
        if m == 0 or len(active) == 0:
            break
        pa, ya = pos[active], y[active]
        T = np.bincount(pa * K + ya, minlength=m * K).reshape(m, K)
        nT = T.sum(axis=1)
        parent = gini_score(T, np.zeros_like(T))
        can = (nT >= 2 * min_leaf) & (parent > 1e-12) & (depth < max_depth)
        if not can.any():
            break
        H = np.empty((m, n_feat, B, K), dtype=np.int64)
        for f in range(n_feat):
            H[:, f] = np.bincount((pa * B + Xb[active, f]) * K + ya, minlength=m * B * K).reshape(m, B, K)
        L = np.cumsum(H, axis=2)
        R = T[:, None, None, :] - L
        score = gini_score(L, R)
        nl = L.sum(axis=-1)
        ok = (nl >= min_leaf) & (nT[:, None, None] - nl >= min_leaf)
        if mf < n_feat:
            keys = rng.random((m, n_feat))
            chosen = np.zeros((m, n_feat), bool)
            np.put_along_axis(chosen, np.argsort(keys, axis=1)[:, :mf], True, axis=1)
            ok &= chosen[:, :, None]
        score = np.where(ok, score, np.inf).reshape(m, -1)
        best = score.argmin(axis=1)
        best_score = score[np.arange(m), best]
        split = can & np.isfinite(best_score) & (best_score < parent - 1e-12)
        if not split.any():
            break
        bf, bb = best // B, best % B

        # samples of splitting nodes, and which side they fall on
        node_split = split[pa]
        s_rows = active[node_split]
        s_pos = pa[node_split]
        s_f = bf[s_pos]
        go_left = Xb[s_rows, s_f] <= bb[s_pos]
        vals = X[s_rows, s_f]
        lo = np.full(m, -np.inf)
        hi = np.full(m, np.inf)
        np.maximum.at(lo, s_pos[go_left], vals[go_left])
        np.minimum.at(hi, s_pos[~go_left], vals[~go_left])

        new_pos = np.full(m, -1, dtype=np.int64)
        next_frontier = []
        for j in np.flatnonzero(split):
            nid = frontier[j]
            feature[nid] = int(bf[j])
            threshold[nid] = float((lo[j] + hi[j]) / 2.0)
            left_counts = L[j, bf[j], bb[j]]
            for child_counts in (left_counts, T[j] - left_counts):
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                counts.append(child_counts)
            left[nid], right[nid] = len(feature) - 2, len(feature) - 1
            new_pos[j] = len(next_frontier)
            next_frontier += [left[nid], right[nid]]
        settled = ~node_split
        pos[active[settled]] = -1
        pos[s_rows] = new_pos[s_pos] + (~go_left)
        frontier = np.array(next_frontier)
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(counts, dtype=np.int64))


def reference_tree(X, y, n_classes: int, max_depth=12, min_leaf=1) -> Tree:
    """Exhaustive recursive search, for cross-checking :func:`grow_tree`.

    Every feature and every midpoint between consecutive distinct node values
    is tried; the lowest score wins with ties going to the lower feature and
    then the lower threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    nodes = []

    def build(idx, depth):
        nid = len(nodes)
        cnt = np.bincount(y[idx], minlength=n_classes)
        nodes.append([-1, 0.0, -1, -1, cnt])
        parent = float(gini_score(cnt, np.zeros_like(cnt)))
        if depth >= max_depth or len(idx) < 2 * min_leaf or parent <= 1e-12:
            return nid
        best = (parent - 1e-12, None, None)
        for f in range(X.shape[1]):
            u = np.unique(X[idx, f])
            for thr in (u[:-1] + u[1:]) / 2.0:
                mask = X[idx, f] <= thr
                if mask.sum() < min_leaf or (~mask).sum() < min_leaf:
                    continue
                lc = np.bincount(y[idx[mask]], minlength=n_classes)
                s = float(gini_score(lc, cnt - lc))
                if s < best[0]:
                    best = (s, f, thr)
        if best[1] is None:
            return nid
        _, f, thr = best
        mask = X[idx, f] <= thr
        nodes[nid][0], nodes[nid][1] = f, thr
        nodes[nid][2] = build(idx[mask], depth + 1)
        nodes[nid][3] = build(idx[~mask], depth + 1)
        return nid

    build(np.arange(len(y)), 0)
    f, t, lft, rgt, c = zip(*nodes)
    return Tree(np.array(f), np.array(t, float), np.array(lft), np.array(rgt), np.array(c, dtype=np.int64))


class RandomForest(ClassifierMixin, BaseEstimator):
    """Majority-vote ensemble of bootstrapped Gini trees over per-point features.

    Labels are 1-based class codes. ``max_points`` caps the number of
    training rows (a seeded subsample) to bound memory and time.
    """

    def __init__(self, n_trees: int = 100, max_depth: int = 12, min_leaf: int = 1, max_features=2,
                 bootstrap: bool = True, max_bins: int = 64, max_points: int | None = 200_000,
                 random_state: int = 0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.max_bins = max_bins
        self.max_points = max_points
        self.random_state = random_state

    def fit(self, X, y):
        X = check_point_features(X)
        y = check_labels(y, shape=(len(X),))
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.max_depth < 0 or self.min_leaf < 1:
            raise ValueError("max_depth must be >= 0 and min_leaf >= 1")
        self.classes_ = CLASS_CODES.copy()
        self.n_features_in_ = X.shape[1]
        if self.max_points is not None and len(X) > self.max_points:
            keep = np.sort(np.random.default_rng([int(self.random_state), 7]).choice(
                len(X), self.max_points, replace=False))
            X, y = X[keep], y[keep]
        t = (y - 1).astype(np.int64)
        present = np.unique(t)
        if len(present) < 2:
            warnings.warn("training labels hold a single class; fitting a constant model",
                          RuntimeWarning, stacklevel=2)
            cnt = np.bincount(t, minlength=N_CLASSES)[None]
            self.trees_ = [Tree(np.array([-1]), np.zeros(1), np.array([-1]), np.array([-1]), cnt)]
            return self
        self.edges_ = bin_edges(X, self.max_bins)
        Xb = apply_bins(X, self.edges_)
        n_bins = max(len(e) for e in self.edges_) + 1
        self.trees_ = []
        for i in range(self.n_trees):
            gen = np.random.default_rng([int(self.random_state), i])
            idx = gen.integers(0, len(X), len(X)) if self.bootstrap else np.arange(len(X))
            self.trees_.append(grow_tree(X[idx], Xb[idx], t[idx], n_bins, N_CLASSES, self.max_depth,
                                         self.min_leaf, self.max_features, gen))
        return self

    def votes(self, X) -> np.ndarray:
        check_is_fitted(self, "trees_")
        X = check_point_features(X)
        v = np.zeros((len(X), N_CLASSES), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees_:
            np.add.at(v, (rows, tree.predict(X)), 1)
        return v

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.votes(X).argmax(axis=1)]

    def score(self, X, y, sample_weight=None):
        return float(np.mean(self.predict(X) == check_labels(y)))


def majority_vote(predictions) -> np.ndarray:
    """Column-wise mode of per-tree 1-based predictions (ties to the lower class)."""
    p = np.asarray(predictions)
    if p.ndim == 1:
        p = p[:, None]
    v = np.zeros((p.shape[1], N_CLASSES), dtype=np.int64)
    for row in p:
        np.add.at(v, (np.arange(p.shape[1]), row - 1), 1)
    return CLASS_CODES[v.argmax(axis=1)]
