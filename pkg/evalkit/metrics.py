"""Confusion matrices and AC / SE / SP / F1 / MCC, as percentages.

Abnormal (label 1) is the positive class.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

from sklearn.metrics import confusion_matrix

from pipeline.configurations import ABNORMAL, NORMAL
from pipeline.errors import ParameterError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    tn: int
    fp: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.tn, self.fp) < 0:
            raise ParameterError(f"confusion counts must be non-negative: {self}")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.tn + self.fp

    def swapped(self) -> "ConfusionMatrix":
        """Same outcomes with normal as the positive class."""
        return ConfusionMatrix(tp=self.tn, fn=self.fp, tn=self.tp, fp=self.fn)

    @classmethod
    def from_labels(cls, y_true: Sequence[int], y_pred: Sequence[int]) -> "ConfusionMatrix":
        (tn, fp), (fn, tp) = confusion_matrix(y_true, y_pred, labels=[NORMAL, ABNORMAL])
        return cls(tp=int(tp), fn=int(fn), tn=int(tn), fp=int(fp))

    def to_dict(self) -> Dict[str, int]:
        return {"tp": self.tp, "fn": self.fn, "tn": self.tn, "fp": self.fp}


@dataclass(frozen=True)
class MetricsReport:
    ac: float
    se: float
    sp: float
    f1: float
    mcc: float
    # metrics whose denominator was zero (reported as 0)
    undefined: Tuple[str, ...] = field(default_factory=tuple)

    def as_row(self) -> Dict[str, float]:
        return {"AC": self.ac, "SE": self.se, "SP": self.sp, "F1": self.f1, "MCC": self.mcc}

    def rounded(self, digits: int = 2) -> Tuple[float, ...]:
        return tuple(round(v, digits) for v in self.as_row().values())


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total == 0:
        raise ParameterError("metrics of an empty confusion matrix")

    undefined = []

    def pct(num: float, den: float, name: str) -> float:
        if den == 0:
            undefined.append(name)
            return 0.0
        return 100.0 * num / den

    tp, fn, tn, fp = cm.tp, cm.fn, cm.tn, cm.fp
    ac = pct(tp + tn, cm.total, "AC")
    se = pct(tp, tp + fn, "SE")
    sp = pct(tn, tn + fp, "SP")
    f1 = pct(2 * tp, 2 * tp + fp + fn, "F1")
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = pct(tp * tn - fp * fn, math.sqrt(den), "MCC")
    return MetricsReport(ac=ac, se=se, sp=sp, f1=f1, mcc=mcc, undefined=tuple(undefined))


def accuracy(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    return metrics(ConfusionMatrix.from_labels(y_true, y_pred)).ac
