"""Confusion matrices and per-class precision / recall / F1 reports."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..returns import CLASS_CODES, CLASS_NAMES, N_CLASSES


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"confusion counts must be square, got {c.shape}")
        if not np.issubdtype(c.dtype, np.integer) or (c < 0).any():
            raise ValueError("confusion counts must be non-negative integers")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def trace(self) -> int:
        return int(np.trace(self.counts))

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def to_csv(self, header_comment: str | None = None) -> str:
        codes = CLASS_CODES[:self.n_classes]
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred"] + [CLASS_NAMES[int(c)] for c in codes])
        for c, row in zip(codes, self.counts):
            w.writerow([CLASS_NAMES[int(c)]] + [int(v) for v in row])
        return buf.getvalue()


def confusion(preds, labels, n_classes: int = N_CLASSES) -> ConfusionMatrix:
    """Tally 1-based class codes into a ``n_classes`` square matrix."""
    p = np.asarray(preds).reshape(-1)
    t = np.asarray(labels).reshape(-1)
    if p.shape != t.shape:
        raise ValueError(f"{p.size} predictions for {t.size} labels")
    for name, a in (("prediction", p), ("label", t)):
        if a.size and (not np.issubdtype(a.dtype, np.integer) or a.min() < 1 or a.max() > n_classes):
            raise ValueError(f"{name} codes must be integers in 1..{n_classes}")
    idx = (t.astype(np.int64) - 1) * n_classes + (p.astype(np.int64) - 1)
    return ConfusionMatrix(np.bincount(idx, minlength=n_classes * n_classes).reshape(n_classes, n_classes))


@dataclass(frozen=True)
class MetricsReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    accuracy: np.ndarray
    support: np.ndarray
    precision_undefined: np.ndarray   # class never predicted; precision reported as 0
    recall_undefined: np.ndarray      # class absent from labels; recall reported as 0
    macro_precision: float
    macro_recall: float
    macro_f1: float
    overall_accuracy: float

    def rows(self, method: str):
        """One dict per class plus a ``combined`` row."""
        out = []
        for i in range(len(self.precision)):
            out.append({"method": method, "class": CLASS_NAMES[int(CLASS_CODES[i])],
                        "precision": self.precision[i], "recall": self.recall[i], "f1": self.f1[i],
                        "accuracy": self.accuracy[i], "support": int(self.support[i]),
                        "undefined": _flag(self.precision_undefined[i], self.recall_undefined[i])})
        out.append({"method": method, "class": "combined", "precision": self.macro_precision,
                    "recall": self.macro_recall, "f1": self.macro_f1, "accuracy": self.overall_accuracy,
                    "support": int(self.support.sum()), "undefined": ""})
        return out


def _flag(p, r):
    return "+".join(n for n, f in (("precision", p), ("recall", r)) if f)


def _ratio(num, den):
    den_ok = den > 0
    return np.where(den_ok, num / np.where(den_ok, den, 1), 0.0), ~den_ok


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class and combined statistics.

    Per-class accuracy uses the recall convention (correct / true members of
    the class); the combined accuracy is trace / total and the combined
    precision, recall and F1 are unweighted means over classes.
    """
    c = cm.counts.astype(np.float64)
    if cm.total <= 0:
        raise ValueError("confusion matrix is empty")
    tp = np.diag(c)
    precision, p_undef = _ratio(tp, c.sum(axis=0))
    recall, r_undef = _ratio(tp, c.sum(axis=1))
    f1, _ = _ratio(2 * precision * recall, precision + recall)
    return MetricsReport(
        precision=precision, recall=recall, f1=f1, accuracy=recall.copy(),
        support=cm.counts.sum(axis=1), precision_undefined=p_undef, recall_undefined=r_undef,
        macro_precision=float(precision.mean()), macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()), overall_accuracy=cm.trace / cm.total,
    )


REPORT_COLUMNS = ("method", "class", "precision", "recall", "f1", "accuracy", "support", "undefined")


def reports_to_csv(reports: dict, header_comment: str | None = None) -> str:
    """Serialise ``{method: MetricsReport}`` with one row per (method, class)."""
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.DictWriter(buf, REPORT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for method, rep in reports.items():
        for row in rep.rows(method):
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def format_table(reports: dict) -> str:
    """Plain-text side-by-side table for terminals."""
    lines = [f"{'method':<10} {'class':<15} {'prec':>6} {'rec':>6} {'f1':>6} {'acc':>6} {'support':>9}"]
    for method, rep in reports.items():
        for row in rep.rows(method):
            mark = "*" if row["undefined"] else " "
            lines.append(f"{method:<10} {row['class']:<15} {row['precision']:6.3f}{mark}{row['recall']:6.3f} "
                         f"{row['f1']:6.3f} {row['accuracy']:6.3f} {row['support']:9d}")
    return "\n".join(lines)
