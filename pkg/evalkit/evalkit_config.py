"""
Evaluation Report Configuration
Column orders, number formats and noise defaults for every report evalkit writes.
"""

from pipeline.configurations import (
    NOISE_LEVELS,
    NOISE_SEEDS,
    REPORT_FORMAT_VERSION,
)

# Metric columns, in the order every table prints them
METRIC_COLUMNS = ["AC", "SE", "SP", "F1", "MCC"]

# LOOCV report: one row per held-out subject
FOLD_COLUMNS = ["fold", "subject_id", "true_label", "predicted_label", "probability", "final_loss"]

# Robustness sweep: one row per noise level (level 0 is the clean control)
SWEEP_COLUMNS = ["level", "runs", "mean", "q1", "q3", "min", "max"]
SWEEP_CELL_COLUMNS = ["level", "seed", "accuracy"]

# Ablation / variant tables
ABLATION_COLUMNS = ["method", "binning"] + METRIC_COLUMNS
VARIANT_COLUMNS = ["variant", "attention", "binning"] + METRIC_COLUMNS

# Attention export
# per-joint peak attention over bins, renormalised over joints (not a mean over bins)
PEAK_SHARE_COLUMN = "peak_share"
ATTENTION_COLUMNS = ["subject_id", "joint", PEAK_SHARE_COLUMN]
ATTENTION_BIN_PREFIX = "bin_"
ATTENTION_SUMMARY_COLUMNS = ["joint", "mean", "q1", "q3"]

# Seed sweep
SEED_SWEEP_COLUMNS = ["seed", "accuracy"]

# Noise ladder (fractions of each joint coordinate's std) and seeds
DEFAULT_NOISE_LEVELS = list(NOISE_LEVELS)
DEFAULT_NOISE_SEEDS = list(NOISE_SEEDS)

REPORT_VERSION = REPORT_FORMAT_VERSION
