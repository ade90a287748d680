"""Gaussian pose noise and the accuracy-vs-noise sweep."""
import logging
import warnings
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from evalkit.evalkit_config import DEFAULT_NOISE_LEVELS, DEFAULT_NOISE_SEEDS, SWEEP_CELL_COLUMNS, SWEEP_COLUMNS
from ml.numerics import RngStream, derive_seed
from ml.training import TrainConfig, loocv
from pipeline.errors import ParameterError
from pipeline.pose_ingest import PoseSequence, missing_mask, preprocess
from pipeline.spectral import BinSchedule, extract_dataset

logger = logging.getLogger(__name__)


class NoiseSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    levels: List[float] = Field(default_factory=lambda: list(DEFAULT_NOISE_LEVELS))
    seeds: List[int] = Field(default_factory=lambda: list(DEFAULT_NOISE_SEEDS))

    @field_validator("levels")
    @classmethod
    def _ascending(cls, v: List[float]) -> List[float]:
        if not v or any(level <= 0 for level in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("noise levels must be positive and strictly ascending")
        return v

    @field_validator("seeds")
    @classmethod
    def _some_seeds(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("at least one seed is required")
        return v


def add_noise(seq: PoseSequence, level: float, rng: RngStream) -> PoseSequence:
    """Add N(0, (level * std)^2) to every joint coordinate, std taken per joint and axis."""
    if level < 0:
        raise ParameterError(f"noise level must be >= 0, got {level}")
    if level == 0:
        return seq
    kp = seq.keypoints.copy()
    missing = missing_mask(kp)  # (frames, 18)
    present_xy = np.where(missing[..., None], np.nan, kp[..., :2])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        std = np.nan_to_num(np.nanstd(present_xy, axis=0))  # (18, 2), over detected frames only
    noise = rng.normal(kp[..., :2].shape, level * std)
    # missed detections stay at exactly (0, 0) so gap filling still sees them
    noise[missing] = 0.0
    kp[..., :2] += noise
    return replace(seq, keypoints=kp)


@dataclass
class SweepResult:
    cells: pd.DataFrame    # level, seed, accuracy
    summary: pd.DataFrame  # one row per level, level 0 first


def summarize_cells(cells: pd.DataFrame) -> pd.DataFrame:
    rows = []
    for level, group in cells.groupby("level", sort=True):
        acc = group["accuracy"].to_numpy()
        rows.append({
            "level": level,
            "runs": len(acc),
            "mean": float(acc.mean()),
            "q1": float(np.percentile(acc, 25)),
            "q3": float(np.percentile(acc, 75)),
            "min": float(acc.min()),
            "max": float(acc.max()),
        })
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def robustness_sweep(
    sequences: Sequence[PoseSequence],
    noise: NoiseSpec,
    config: TrainConfig,
    schedule: BinSchedule,
    workers: int = 1,
) -> SweepResult:
    """LOOCV accuracy for every (level, seed), plus a clean level-0 control per seed.

    `sequences` are raw (pre-normalisation) poses; noise is added before
    preprocessing, like a noisy pose estimator would.
    """
    clean = extract_dataset([preprocess(s) for s in sequences], schedule)
    cells: List[Dict] = []
    for seed in noise.seeds:
        acc = loocv(clean, config.with_seed(seed), workers).accuracy
        cells.append({"level": 0.0, "seed": seed, "accuracy": acc})
        logger.info(f"  [ROBUST] level 0.00 seed {seed}: AC {acc:.2f}")

    for li, level in enumerate(noise.levels):
        for seed in noise.seeds:
            rng = RngStream(derive_seed(seed, li + 1))
            noisy = [preprocess(add_noise(s, level, rng)) for s in sequences]
            acc = loocv(extract_dataset(noisy, schedule), config.with_seed(seed), workers).accuracy
            cells.append({"level": level, "seed": seed, "accuracy": acc})
            logger.info(f"  [ROBUST] level {level:.2f} seed {seed}: AC {acc:.2f}")

    table = pd.DataFrame(cells, columns=SWEEP_CELL_COLUMNS)
    return SweepResult(cells=table, summary=summarize_cells(table))
