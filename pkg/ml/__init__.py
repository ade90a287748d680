"""
ML Module for the frequency-attention GCN

Tensor helpers, the FAIGCN model, its training / LOOCV harness and the
classical baselines it is compared against.
"""

from ml.numerics import RngStream, configure_torch, derive_seed, lr_at
from ml.faigcn import AttentionMap, Faigcn, FaigcnConfig, init_params
from ml.training import LoocvReport, TrainConfig, load_model, loocv, predict, save_model, seed_sweep, train
from ml.baselines import ShrinkageLDA, ablation_table, baseline_loocv, variant_table

__all__ = [
    'RngStream',
    'configure_torch',
    'derive_seed',
    'lr_at',
    'AttentionMap',
    'Faigcn',
    'FaigcnConfig',
    'init_params',
    'TrainConfig',
    'LoocvReport',
    'train',
    'predict',
    'loocv',
    'seed_sweep',
    'save_model',
    'load_model',
    'ShrinkageLDA',
    'baseline_loocv',
    'ablation_table',
    'variant_table',
]
