"""
Report Writers
Turn LOOCV runs, sweeps and attention maps into CSV files.
"""
import logging
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from evalkit.evalkit_config import (
    ATTENTION_BIN_PREFIX,
    ATTENTION_COLUMNS,
    ATTENTION_SUMMARY_COLUMNS,
    PEAK_SHARE_COLUMN,
    REPORT_VERSION,
)
from evalkit.robustness import SweepResult
from ml.faigcn import AttentionMap
from ml.training import LoocvReport, SeedSweep
from pipeline.errors import DataError
from pipeline.pose_ingest import JOINT_NAMES
from pipeline.storage import DataStorage

logger = logging.getLogger(__name__)


class ReportWriter:
    """Writes every evaluation artifact through one `DataStorage`."""

    def __init__(self, storage: Optional[DataStorage] = None):
        self.storage = storage or DataStorage()

    def loocv(self, path: Path, report: LoocvReport) -> None:
        summary = {"format_version": REPORT_VERSION, **report.summary()}
        self.storage.write_report(path, report.fold_table(), summary)
        logger.info(f"  [REPORT] LOOCV report -> {path}")

    def seed_sweep(self, path: Path, sweep: SeedSweep) -> None:
        self.storage.write_report(path, sweep.table(), {"format_version": REPORT_VERSION, **sweep.summary()})

    def table(self, path: Path, table: pd.DataFrame) -> None:
        self.storage.write_report(path, table, {"format_version": REPORT_VERSION})
        logger.info(f"  [REPORT] {len(table)} rows -> {path}")

    def sweep(self, directory: Path, result: SweepResult) -> None:
        """One file with every (level, seed) cell and one with the per-level summary."""
        directory = Path(directory)
        self.storage.write_report(directory / "robustness_cells.csv", result.cells, {"format_version": REPORT_VERSION})
        self.storage.write_report(directory / "robustness_summary.csv", result.summary, {"format_version": REPORT_VERSION})
        logger.info(f"  [REPORT] robustness sweep -> {directory}")

    def attention(self, path: Path, maps: Mapping[str, AttentionMap]) -> None:
        self.storage.write_report(path, attention_frame(maps))

    def attention_summary(self, path: Path, maps: Sequence[AttentionMap]) -> None:
        self.storage.write_report(path, aggregate_attention(maps))


def attention_frame(maps: Mapping[str, AttentionMap]) -> pd.DataFrame:
    """18 rows per subject: joint name, peak_share (`AttentionMap.per_joint`), then one column per bin."""
    frames = []
    for subject_id, amap in maps.items():
        bins = [f"{ATTENTION_BIN_PREFIX}{b}" for b in range(amap.num_bins)]
        df = pd.DataFrame(amap.alpha.T, columns=bins)
        df.insert(0, PEAK_SHARE_COLUMN, amap.per_joint)
        df.insert(0, "joint", JOINT_NAMES)
        df.insert(0, "subject_id", subject_id)
        frames.append(df)
    return pd.concat(frames, ignore_index=True)


def export_attention(path: Path, amap: AttentionMap, subject_id: str, storage: Optional[DataStorage] = None) -> None:
    ReportWriter(storage).attention(path, {subject_id: amap})


def read_attention(path: Path, storage: Optional[DataStorage] = None) -> Dict[str, AttentionMap]:
    table, _ = (storage or DataStorage()).read_report(path)
    missing = [c for c in ATTENTION_COLUMNS if c not in table.columns]
    if missing:
        raise DataError(f"{Path(path).name}: not an attention export (missing {missing})")
    bins = [c for c in table.columns if c.startswith(ATTENTION_BIN_PREFIX)]
    maps: Dict[str, AttentionMap] = {}
    for subject_id, group in table.groupby("subject_id", sort=False):
        if list(group["joint"]) != JOINT_NAMES:
            raise DataError(f"{Path(path).name}: subject {subject_id!r} does not list the 18 joints in order")
        alpha = group[bins].to_numpy(dtype=np.float64).T
        maps[str(subject_id)] = AttentionMap(np.ascontiguousarray(alpha))
    return maps


def aggregate_attention(maps: Sequence[AttentionMap]) -> pd.DataFrame:
    """Per-joint mean and quartiles of the per-joint attention across folds."""
    if not maps:
        raise DataError("no attention maps to aggregate")
    values = np.stack([m.per_joint for m in maps])  # (folds, 18)
    return pd.DataFrame(
        {
            "joint": JOINT_NAMES,
            "mean": values.mean(axis=0),
            "q1": np.percentile(values, 25, axis=0),
            "q3": np.percentile(values, 75, axis=0),
        },
        columns=ATTENTION_SUMMARY_COLUMNS,
    )
