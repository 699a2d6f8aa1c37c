"""Metrics, the random-forest baseline and side-by-side comparison."""
from __future__ import annotations

import numpy as np

from .forest import RandomForest, Tree, gini_score, grow_tree, majority_vote, reference_tree
from .metrics import (REPORT_COLUMNS, ConfusionMatrix, MetricsReport, confusion, format_table, metrics,
                      reports_to_csv)

__all__ = [
    "REPORT_COLUMNS", "ConfusionMatrix", "MetricsReport", "RandomForest", "Tree", "compare", "confusion",
    "format_table", "gini_score", "grow_tree", "majority_vote", "metrics", "reference_tree",
    "reports_to_csv",
]


def compare(model, forest, X_val, y_val, scaler=None, names=("pointnet", "forest")):
    """Evaluate both estimators on exactly the same validation points.

    ``X_val`` holds raw (unscaled) samples of shape (n, pc, 5). The network
    sees them as samples, through ``scaler`` if given; the forest sees each
    point's raw 5 features. Both estimators must carry the same
    ``split_hash_`` when they carry one at all.
    """
    X_val = np.asarray(X_val)
    y_val = np.asarray(y_val)
    if X_val.ndim != 3 or y_val.shape != X_val.shape[:2]:
        raise ValueError("validation samples and labels do not line up")
    h_model, h_forest = getattr(model, "split_hash_", None), getattr(forest, "split_hash_", None)
    if h_model is not None and h_forest is not None and h_model != h_forest:
        raise ValueError("model and forest were trained on different splits")
    Xn = scaler.transform(X_val) if scaler is not None else X_val
    out = {}
    for name, est, feats in ((names[0], model, Xn), (names[1], forest, X_val)):
        if hasattr(est, "trees_"):
            pred = est.predict(feats.reshape(-1, feats.shape[-1])).reshape(y_val.shape)
        else:
            pred = est.predict(feats)
        out[name] = metrics(confusion(pred, y_val))
    return out
