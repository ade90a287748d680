"""Classical classifiers on flattened spectra, and the binning / attention ablations.

Every baseline is a scikit-learn `Pipeline` of a `StandardScaler` (fitted on
the training fold only) and a deterministic classifier.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.linear_model import LogisticRegression, SGDClassifier
from sklearn.model_selection import LeaveOneOut, cross_val_predict
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.tree import DecisionTreeClassifier

from evalkit.evalkit_config import ABLATION_COLUMNS, VARIANT_COLUMNS
from evalkit.metrics import ConfusionMatrix, MetricsReport, metrics
from ml.training import TrainConfig, loocv
from pipeline.configurations import (
    BASELINE_KINDS,
    LDA_SHRINKAGE,
    LR_LAMBDA,
    LR_TOL,
    SVM_ITERATIONS,
    SVM_LAMBDA,
    TREE_MAX_DEPTH,
    TREE_MIN_LEAF,
)
from pipeline.errors import DimensionError, ParameterError, ProtocolError
from pipeline.pose_ingest import PoseSequence
from pipeline.spectral import BinSchedule, SpectralFeatures, extract_dataset, unbinned

logger = logging.getLogger(__name__)

METHOD_NAMES = {
    "logistic_regression": "LR",
    "lda": "LDA",
    "decision_tree": "Tree",
    "linear_svm": "SVM",
    "faigcn": "FAIGCN",
}


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: int


def flatten(features: SpectralFeatures, binned: bool = True) -> FeatureVector:
    """Row-major (bin, joint, channel) flattening."""
    if binned != features.schedule.binned:
        raise ParameterError(
            f"{features.subject_id}: features were extracted {'with' if features.schedule.binned else 'without'} binning"
        )
    return FeatureVector(values=features.values.reshape(-1).copy(), label=features.label)


def feature_matrix(dataset: Sequence[SpectralFeatures]) -> Tuple[np.ndarray, np.ndarray]:
    vectors = [flatten(f, f.schedule.binned) for f in dataset]
    lengths = {len(v.values) for v in vectors}
    if len(lengths) != 1:
        raise DimensionError("feature_matrix", tuple(sorted(lengths)))
    return np.stack([v.values for v in vectors]), np.array([v.label for v in vectors], dtype=np.int64)


class ShrinkageLDA(ClassifierMixin, BaseEstimator):
    """Two-class LDA with covariance (1 - g) S + g diag(S).

    S is the pooled within-class covariance. Zero diagonal entries of the
    shrinkage target are replaced by 1. The covariance is never formed:
    S has rank <= n, so Sigma^-1 is applied via the Woodbury identity with a
    pseudo-inverse of the small n x n core.
    """

    def __init__(self, shrinkage: float = LDA_SHRINKAGE):
        self.shrinkage = shrinkage

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise ProtocolError("LDA needs both classes")
        g = self.shrinkage
        if not 0.0 < g <= 1.0:
            raise ParameterError(f"shrinkage must be in (0, 1], got {g}")

        means = np.stack([X[y == c].mean(axis=0) for c in self.classes_])
        centred = X - means[np.searchsorted(self.classes_, y)]
        n = X.shape[0]
        target = (centred ** 2).sum(axis=0) / n
        target[target == 0.0] = 1.0

        # Sigma = A + U U^T with A = g * diag(target), U = sqrt((1 - g) / n) * centred^T
        a_inv = 1.0 / (g * target)
        u = np.sqrt((1.0 - g) / n) * centred.T
        core = np.eye(n) + u.T @ (a_inv[:, None] * u)
        diff = means[1] - means[0]
        v = a_inv * diff
        w = v - a_inv * (u @ (np.linalg.pinv(core) @ (u.T @ v)))

        priors = np.array([(y == c).mean() for c in self.classes_])
        self.coef_ = w
        self.intercept_ = -0.5 * (means[0] + means[1]) @ w + np.log(priors[1] / priors[0])
        return self

    def decision_function(self, X):
        return np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]


def make_baseline(kind: str, n_train: int) -> Pipeline:
    if kind == "logistic_regression":
        # sklearn's C weights the summed log-loss: C = 1 / (lambda * n)
        clf = LogisticRegression(C=1.0 / (LR_LAMBDA * n_train), tol=LR_TOL, max_iter=10_000)
    elif kind == "lda":
        clf = ShrinkageLDA(shrinkage=LDA_SHRINKAGE)
    elif kind == "decision_tree":
        clf = DecisionTreeClassifier(
            criterion="gini", max_depth=TREE_MAX_DEPTH, min_samples_leaf=TREE_MIN_LEAF, random_state=0
        )
    elif kind == "linear_svm":
        clf = SGDClassifier(
            loss="hinge", penalty="l2", alpha=SVM_LAMBDA, max_iter=SVM_ITERATIONS,
            tol=None, shuffle=False, random_state=0,
        )
    else:
        raise ParameterError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")
    return Pipeline([("scale", StandardScaler()), ("clf", clf)])


def fit(kind: str, X: np.ndarray, y: np.ndarray) -> Pipeline:
    if len(np.unique(y)) < 2:
        raise ProtocolError(f"{kind} needs both classes in the training set")
    return make_baseline(kind, len(y)).fit(X, y)


def predict(model: Pipeline, vector: FeatureVector) -> int:
    return int(model.predict(vector.values.reshape(1, -1))[0])


def baseline_loocv(kind: str, dataset: Sequence[SpectralFeatures], workers: int = 1) -> Tuple[ConfusionMatrix, MetricsReport]:
    X, y = feature_matrix(dataset)
    if len(np.unique(y)) < 2:
        raise ProtocolError(f"{kind} needs both classes")
    # LOOCV training sets hold n - 1 subjects
    model = make_baseline(kind, len(y) - 1)
    y_pred = cross_val_predict(model, X, y, cv=LeaveOneOut(), n_jobs=workers if workers > 1 else None)
    cm = ConfusionMatrix.from_labels(y, y_pred)
    return cm, metrics(cm)


def ablation_table(
    sequences: Sequence[PoseSequence],
    schedule: BinSchedule,
    config: TrainConfig,
    workers: int = 1,
    kinds: Sequence[str] = tuple(BASELINE_KINDS),
    include_faigcn: bool = True,
) -> pd.DataFrame:
    """LOOCV metrics of each method with and without frequency binning."""
    variants = {
        "binned": extract_dataset(sequences, schedule),
        "unbinned": extract_dataset(sequences, unbinned(schedule)),
    }
    rows: List[Dict] = []
    for kind in kinds:
        for binning, dataset in variants.items():
            _, m = baseline_loocv(kind, dataset, workers)
            logger.info(f"  [ABLATION] {METHOD_NAMES[kind]:6s} {binning:8s} AC {m.ac:.2f}")
            rows.append({"method": METHOD_NAMES[kind], "binning": binning, **m.as_row()})
    if include_faigcn:
        for binning, dataset in variants.items():
            m = loocv(dataset, config, workers).metrics
            logger.info(f"  [ABLATION] FAIGCN {binning:8s} AC {m.ac:.2f}")
            rows.append({"method": "FAIGCN", "binning": binning, **m.as_row()})
    return pd.DataFrame(rows, columns=ABLATION_COLUMNS)


def variant_table(
    sequences: Sequence[PoseSequence],
    schedule: BinSchedule,
    config: TrainConfig,
    workers: int = 1,
) -> pd.DataFrame:
    """FAIGCN with / without attention and with / without binning."""
    datasets = {
        True: extract_dataset(sequences, schedule),
        False: extract_dataset(sequences, unbinned(schedule)),
    }
    names = {
        (True, True): "FAIGCN",
        (False, True): "w/o A.",
        (True, False): "w/o B.",
        (False, False): "w/o A.+B.",
    }
    rows = []
    for (attention, binning), name in names.items():
        cfg = config.model_copy(update={"model": config.model.model_copy(update={"use_attention": attention})})
        m = loocv(datasets[binning], cfg, workers).metrics
        logger.info(f"  [ABLATION] {name:10s} AC {m.ac:.2f}")
        rows.append({"variant": name, "attention": attention, "binning": binning, **m.as_row()})
    return pd.DataFrame(rows, columns=VARIANT_COLUMNS)
