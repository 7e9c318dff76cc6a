"""Confusion-matrix based multiclass metrics.

Conventions for degenerate denominators:
  * precision (recall) of a class never predicted (never present) is 0;
  * MCC with a zero denominator is 0;
  * kappa with expected agreement 1 is 1 when observed agreement is 1, else 0.
"""
import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrix, LabelOutOfRange, LengthMismatch


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    counts: np.ndarray
    class_names: tuple = None

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise LengthMismatch(f"confusion matrix must be square, got {c.shape}")
        if np.any(c < 0):
            raise LabelOutOfRange("counts must be non-negative")
        object.__setattr__(self, "counts", c)
        names = self.class_names
        if names is None:
            names = tuple(str(i) for i in range(c.shape[0]))
        object.__setattr__(self, "class_names", tuple(names))

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def k(self):
        return self.counts.shape[0]


def confusion_matrix(y_true, y_pred, k, class_names=None):
    y_true = np.asarray(y_true, dtype=np.int64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.int64).ravel()
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"{y_true.size} true labels vs {y_pred.size} predictions")
    for arr in (y_true, y_pred):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise LabelOutOfRange(f"labels must lie in 0..{k - 1}")
    counts = np.bincount(y_true * k + y_pred, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts, class_names)


def _safe_ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


@dataclass(frozen=True, eq=False)
class ClassificationReport:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    cohen_kappa: float
    mcc: float
    observed_agreement: float
    expected_agreement: float
    confusion: ConfusionMatrix = None

    def to_dict(self):
        names = list(self.confusion.class_names) if self.confusion is not None else None
        return {
            "accuracy": self.accuracy,
            "per_class": {
                "class_names": names,
                "precision": self.precision.tolist(),
                "recall": self.recall.tolist(),
                "f1": self.f1.tolist(),
                "support": self.support.tolist(),
            },
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall,
                      "f1": self.macro_f1},
            "weighted": {"precision": self.weighted_precision,
                         "recall": self.weighted_recall, "f1": self.weighted_f1},
            "cohen_kappa": self.cohen_kappa,
            "mcc": self.mcc,
            "confusion_matrix": (self.confusion.counts.tolist()
                                 if self.confusion is not None else None),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc):
        cm = None
        if doc.get("confusion_matrix") is not None:
            cm = ConfusionMatrix(np.array(doc["confusion_matrix"]),
                                 doc["per_class"].get("class_names"))
            return report(cm)
        pc = doc["per_class"]
        return cls(
            accuracy=doc["accuracy"], precision=np.array(pc["precision"]),
            recall=np.array(pc["recall"]), f1=np.array(pc["f1"]),
            support=np.array(pc["support"]),
            macro_precision=doc["macro"]["precision"], macro_recall=doc["macro"]["recall"],
            macro_f1=doc["macro"]["f1"], weighted_precision=doc["weighted"]["precision"],
            weighted_recall=doc["weighted"]["recall"], weighted_f1=doc["weighted"]["f1"],
            cohen_kappa=doc["cohen_kappa"], mcc=doc["mcc"],
            observed_agreement=doc["accuracy"], expected_agreement=float("nan"),
        )


def report(cm):
    c = cm.counts.astype(np.float64)
    n = c.sum()
    if n < 1:
        raise EmptyMatrix("confusion matrix has no entries")
    tp = np.diag(c)
    rows = c.sum(axis=1)
    cols = c.sum(axis=0)
    trace = tp.sum()

    precision = _safe_ratio(tp, cols)
    recall = _safe_ratio(tp, rows)
    f1 = _safe_ratio(2.0 * precision * recall, precision + recall)

    p_o = trace / n
    p_e = float(np.dot(rows, cols) / (n * n))
    if p_e == 1.0:
        kappa = 1.0 if p_o == 1.0 else 0.0
    else:
        kappa = (p_o - p_e) / (1.0 - p_e)

    cov_ytyp = n * trace - np.dot(rows, cols)
    den = (n * n - np.dot(cols, cols)) * (n * n - np.dot(rows, rows))
    mcc = float(cov_ytyp / np.sqrt(den)) if den > 0 else 0.0

    return ClassificationReport(
        accuracy=float(p_o),
        precision=precision, recall=recall, f1=f1, support=rows.astype(np.int64),
        macro_precision=float(precision.mean()), macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_precision=float(np.dot(rows, precision) / n),
        weighted_recall=float(np.dot(rows, recall) / n),
        weighted_f1=float(np.dot(rows, f1) / n),
        cohen_kappa=float(kappa), mcc=mcc,
        observed_agreement=float(p_o), expected_agreement=p_e,
        confusion=cm,
    )


def evaluate(y_true, y_pred, k, class_names=None):
    return report(confusion_matrix(y_true, y_pred, k, class_names))
