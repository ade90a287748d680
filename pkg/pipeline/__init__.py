"""
Pose pipeline: keypoint ingest, spectral features, the pose-frequency graph,
storage and synthetic data.

`pipeline.synthgen` and `pipeline.cli` pull in the model package and are
imported explicitly by their callers.
"""

__version__ = "0.1.0"

from pipeline.errors import FreqGcnError
from pipeline.graph import PoseFrequencyGraph, adjacency_for, build_graph, normalize_adjacency, partition
from pipeline.pose_ingest import PoseSequence, load_keypoint_dir, parse_keypoint_frame, preprocess
from pipeline.spectral import BinSchedule, SpectralFeatures, build_schedule, extract_features, fft_bluestein
from pipeline.storage import DataStorage

__all__ = [
    '__version__',
    'FreqGcnError',
    'PoseSequence',
    'parse_keypoint_frame',
    'load_keypoint_dir',
    'preprocess',
    'BinSchedule',
    'SpectralFeatures',
    'build_schedule',
    'extract_features',
    'fft_bluestein',
    'PoseFrequencyGraph',
    'build_graph',
    'partition',
    'normalize_adjacency',
    'adjacency_for',
    'DataStorage',
]
