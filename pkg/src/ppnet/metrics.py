"""Confusion matrix, per-class precision/recall/F1 and report formatting."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ppnet.errors import EmptyDataset


def precision(tp, fp) -> float:
    return tp / (tp + fp) if tp + fp else 0.0


def recall(tp, fn) -> float:
    return tp / (tp + fn) if tp + fn else 0.0


def f1_score(p, r) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def confusion_matrix(y_true, y_pred, num_classes: int) -> np.ndarray:
    """Rows are true classes, columns predictions."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


@dataclass
class MetricsReport:
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_f1: float
    weighted_f1: float
    accuracy: float
    class_names: list[str] | None = None

    @classmethod
    def from_confusion(cls, cm, class_names=None) -> "MetricsReport":
        cm = np.asarray(cm, dtype=np.int64)
        tp = np.diag(cm)
        fp = cm.sum(axis=0) - tp
        fn = cm.sum(axis=1) - tp
        support = cm.sum(axis=1)
        if support.sum() == 0:
            raise EmptyDataset("no predictions to score")
        p = np.array([precision(a, b) for a, b in zip(tp, fp)])
        r = np.array([recall(a, b) for a, b in zip(tp, fn)])
        f = np.array([f1_score(a, b) for a, b in zip(p, r)])
        return cls(
            confusion=cm,
            precision=p,
            recall=r,
            f1=f,
            support=support,
            macro_f1=float(f.mean()),
            weighted_f1=float((f * support).sum() / support.sum()),
            accuracy=float(tp.sum() / support.sum()),
            class_names=list(class_names) if class_names is not None else None,
        )

    @classmethod
    def from_predictions(cls, y_true, y_pred, num_classes: int, class_names=None) -> "MetricsReport":
        if len(y_true) == 0:
            raise EmptyDataset("no predictions to score")
        return cls.from_confusion(confusion_matrix(y_true, y_pred, num_classes), class_names)

    def to_text(self) -> str:
        """Plain table with the Precision / Recall / F1_score / Support columns."""
        lines = [f"{'':>8}{'Precision':>11}{'Recall':>9}{'F1_score':>10}{'Support':>9}"]
        for i in range(len(self.f1)):
            label = str(i)
            if self.class_names:
                label = f"{i} {self.class_names[i]}"
            lines.append(
                f"{label:>8}{self.precision[i]:>11.2f}{self.recall[i]:>9.2f}{self.f1[i]:>10.2f}{int(self.support[i]):>9d}"
            )
        total = int(self.support.sum())
        lines.append("")
        lines.append(f"{'macro':>8}{self.precision.mean():>11.2f}{self.recall.mean():>9.2f}{self.macro_f1:>10.4f}{total:>9d}")
        w = self.support / total
        lines.append(
            f"{'weighted':>8}{(self.precision * w).sum():>11.2f}{(self.recall * w).sum():>9.2f}{self.weighted_f1:>10.4f}{total:>9d}"
        )
        lines.append(f"{'accuracy':>8}{'':>20}{self.accuracy:>10.4f}{total:>9d}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "class_names": self.class_names,
            "per_class": [
                {
                    "class": i,
                    "precision": float(self.precision[i]),
                    "recall": float(self.recall[i]),
                    "f1": float(self.f1[i]),
                    "support": int(self.support[i]),
                }
                for i in range(len(self.f1))
            ],
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
