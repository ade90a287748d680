"""Training loop, prediction and the leave-one-out harness for the FAIGCN model."""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator
from sklearn.model_selection import LeaveOneOut

from evalkit.evalkit_config import FOLD_COLUMNS, SEED_SWEEP_COLUMNS
from evalkit.metrics import ConfusionMatrix, MetricsReport, metrics
from ml.faigcn import AttentionMap, Faigcn, FaigcnConfig, features_tensor, forward, init_params
from ml.numerics import (
    RngStream,
    adam_step,
    backward,
    configure_torch,
    cross_entropy,
    derive_seed,
    load_checkpoint,
    lr_at,
    make_optimizer,
    save_checkpoint,
)
from pipeline.configurations import (
    ABNORMAL,
    DEFAULT_PRESET,
    DEFAULT_SEED,
    LABELS,
    LR_DECAY_FACTOR,
    LR_DECAY_PERIOD,
    MAX_EPOCHS,
    PRESETS,
    TORCH_THREADS,
)
from pipeline.errors import DimensionError, ProtocolError
from pipeline.spectral import SpectralFeatures

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: str = DEFAULT_PRESET
    batch_size: int = Field(default=PRESETS[DEFAULT_PRESET]["batch_size"], ge=1)
    base_lr: float = Field(default=PRESETS[DEFAULT_PRESET]["base_lr"], gt=0)
    max_epochs: int = Field(default=MAX_EPOCHS, ge=1)
    decay_factor: float = Field(default=LR_DECAY_FACTOR, gt=0, le=1)
    decay_period: int = Field(default=LR_DECAY_PERIOD, ge=1)
    seed: int = DEFAULT_SEED
    early_stop_loss: Optional[float] = Field(default=None, ge=0)
    model: FaigcnConfig = Field(default_factory=FaigcnConfig)

    @field_validator("preset")
    @classmethod
    def _known_preset(cls, v: str) -> str:
        if v not in PRESETS:
            raise ValueError(f"unknown preset {v!r}; expected one of {sorted(PRESETS)}")
        return v

    @classmethod
    def from_preset(cls, preset: str = DEFAULT_PRESET, **overrides: Any) -> "TrainConfig":
        if preset not in PRESETS:
            raise ProtocolError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        values = {"preset": preset, **PRESETS[preset]}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def with_seed(self, seed: int) -> "TrainConfig":
        return self.model_copy(update={"seed": int(seed)})


@dataclass
class TrainResult:
    model: Faigcn
    losses: List[float]


def _labels(dataset: Sequence[SpectralFeatures]) -> np.ndarray:
    missing = [f.subject_id for f in dataset if f.label is None]
    if missing:
        raise ProtocolError(f"unlabelled subject(s): {', '.join(missing)}")
    return np.array([f.label for f in dataset], dtype=np.int64)


def _check_two_classes(labels: np.ndarray, what: str) -> None:
    if len(np.unique(labels)) < 2:
        raise ProtocolError(f"{what} needs both classes, got only {LABELS[int(labels[0])]!r}")


def train(train_set: Sequence[SpectralFeatures], config: TrainConfig) -> TrainResult:
    """Mini-batch Adam on softmax cross-entropy with a step-decayed learning rate."""
    if len(train_set) < 2:
        raise ProtocolError(f"training needs at least 2 samples, got {len(train_set)}")
    labels = _labels(train_set)
    _check_two_classes(labels, "training")

    rng = RngStream(config.seed)
    x = features_tensor(train_set)
    y = torch.from_numpy(labels)
    model = init_params(config.model, x.shape[1], rng)
    optimizer = make_optimizer(model.parameters(), config.base_lr)

    n = len(train_set)
    losses: List[float] = []
    model.train()
    for epoch in range(config.max_epochs):
        lr = lr_at(epoch, config.base_lr, config.decay_factor, config.decay_period)
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            idx = torch.from_numpy(order[start:start + config.batch_size])
            logits, _ = model(x[idx], rng)
            loss = cross_entropy(logits, y[idx])
            optimizer.zero_grad()
            backward(loss)
            adam_step(optimizer, lr)
            batch_losses.append(loss.item())
        epoch_loss = float(np.mean(batch_losses))
        losses.append(epoch_loss)
        if epoch % 100 == 0 or epoch == config.max_epochs - 1:
            logger.debug(f"  [TRAIN] epoch {epoch:3d} lr {lr:.1e} loss {epoch_loss:.6f}")
        if not math.isfinite(epoch_loss):
            raise ProtocolError(f"training diverged at epoch {epoch}")
        if config.early_stop_loss is not None and epoch_loss <= config.early_stop_loss:
            logger.debug(f"  [TRAIN] early stop at epoch {epoch} (loss {epoch_loss:.6f})")
            break
    model.eval()
    return TrainResult(model=model, losses=losses)


def decide(logits: torch.Tensor) -> Tuple[int, float]:
    """(argmax label, p(abnormal)) from a pair of (normal, abnormal) logits."""
    probs = torch.softmax(logits.detach(), dim=-1)
    return int(torch.argmax(logits).item()), float(probs[ABNORMAL].item())


def predict(model: Faigcn, features: SpectralFeatures) -> Tuple[int, float]:
    with torch.no_grad():
        logits, _ = forward(features, model, training=False)
    return decide(logits)


def attention_of(model: Faigcn, features: SpectralFeatures) -> AttentionMap:
    with torch.no_grad():
        _, amap = forward(features, model, training=False)
    return amap


def save_model(path, result: TrainResult, config: TrainConfig) -> None:
    save_checkpoint(path, config.model_dump(), result.model.num_bins, result.model.state_dict())


def load_model(path) -> Tuple[Faigcn, TrainConfig]:
    payload = load_checkpoint(path)
    config = TrainConfig(**payload["config"])
    model = Faigcn(config.model, payload["num_bins"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, config


@dataclass(frozen=True)
class FoldResult:
    fold: int
    held_out_id: str
    predicted: int
    true: int
    probability: float
    final_loss: float
    attention: Optional[AttentionMap] = None


@dataclass
class LoocvReport:
    folds: List[FoldResult]
    confusion: ConfusionMatrix
    metrics: MetricsReport
    seed: int

    @property
    def accuracy(self) -> float:
        return self.metrics.ac

    def fold_table(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "fold": r.fold,
                    "subject_id": r.held_out_id,
                    "true_label": LABELS[r.true],
                    "predicted_label": LABELS[r.predicted],
                    "probability": r.probability,
                    "final_loss": r.final_loss,
                }
                for r in self.folds
            ],
            columns=FOLD_COLUMNS,
        )

    def summary(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"seed": self.seed, "folds": len(self.folds)}
        out.update(self.confusion.to_dict())
        out.update(self.metrics.as_row())
        return out

    def attention_maps(self) -> Dict[str, AttentionMap]:
        return {r.held_out_id: r.attention for r in self.folds if r.attention is not None}


def _run_fold(
    fold: int,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    dataset: Sequence[SpectralFeatures],
    config: TrainConfig,
) -> FoldResult:
    configure_torch(TORCH_THREADS)
    held_out = dataset[int(test_idx[0])]
    train_set = [dataset[int(i)] for i in train_idx]
    assert held_out.subject_id not in {f.subject_id for f in train_set}, "held-out subject leaked into training"

    result = train(train_set, config.with_seed(derive_seed(config.seed, fold)))
    label, prob = predict(result.model, held_out)
    return FoldResult(
        fold=fold,
        held_out_id=held_out.subject_id,
        predicted=label,
        true=int(held_out.label),
        probability=prob,
        final_loss=result.losses[-1],
        attention=attention_of(result.model, held_out),
    )


def report_from_folds(folds: Sequence[FoldResult], seed: int) -> LoocvReport:
    folds = sorted(folds, key=lambda r: r.fold)
    cm = ConfusionMatrix.from_labels([r.true for r in folds], [r.predicted for r in folds])
    return LoocvReport(folds=list(folds), confusion=cm, metrics=metrics(cm), seed=seed)


def loocv(dataset: Sequence[SpectralFeatures], config: TrainConfig, workers: int = 1) -> LoocvReport:
    """Hold out each subject once, train on the rest, predict it."""
    if len(dataset) < 3:
        raise ProtocolError(f"leave-one-out needs at least 3 subjects, got {len(dataset)}")
    labels = _labels(dataset)
    _check_two_classes(labels, "leave-one-out")
    ids = [f.subject_id for f in dataset]
    if len(set(ids)) != len(ids):
        raise ProtocolError("subject ids must be unique")
    if len({f.num_bins for f in dataset}) != 1:
        raise DimensionError("loocv", tuple(sorted({f.num_bins for f in dataset})))

    splits = list(LeaveOneOut().split(np.zeros(len(dataset)), labels))
    logger.info(f"  [LOOCV] {len(splits)} folds, seed {config.seed}, {workers} worker(s)")
    if workers > 1:
        folds = Parallel(n_jobs=workers)(
            delayed(_run_fold)(k, tr, te, dataset, config) for k, (tr, te) in enumerate(splits)
        )
    else:
        folds = [_run_fold(k, tr, te, dataset, config) for k, (tr, te) in enumerate(splits)]

    report = report_from_folds(folds, config.seed)
    m = report.metrics
    logger.info(
        f"  [LOOCV] AC {m.ac:.2f}  SE {m.se:.2f}  SP {m.sp:.2f}  F1 {m.f1:.2f}  MCC {m.mcc:.2f}"
    )
    return report


@dataclass
class SeedSweep:
    reports: Dict[int, LoocvReport] = field(default_factory=dict)

    @property
    def accuracies(self) -> Dict[int, float]:
        return {seed: r.accuracy for seed, r in self.reports.items()}

    def summary(self) -> Dict[str, float]:
        acc = np.array(list(self.accuracies.values()))
        return {"runs": len(acc), "mean": float(acc.mean()), "min": float(acc.min()), "max": float(acc.max())}

    def table(self) -> pd.DataFrame:
        return pd.DataFrame([{"seed": s, "accuracy": a} for s, a in self.accuracies.items()], columns=SEED_SWEEP_COLUMNS)


def seed_sweep(
    dataset: Sequence[SpectralFeatures],
    config: TrainConfig,
    seeds: Sequence[int],
    workers: int = 1,
) -> SeedSweep:
    """LOOCV once per seed; mean/min/max instead of a best run."""
    if not seeds:
        raise ProtocolError("seed sweep needs at least one seed")
    sweep = SeedSweep()
    for seed in seeds:
        sweep.reports[int(seed)] = loocv(dataset, config.with_seed(seed), workers)
    s = sweep.summary()
    logger.info(f"  [LOOCV] {s['runs']} seeds: mean {s['mean']:.2f}, min {s['min']:.2f}, max {s['max']:.2f}")
    return sweep
