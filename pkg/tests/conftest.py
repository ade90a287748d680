"""Shared fixtures: a synthetic dataset, a coarse bin schedule and skeleton frames."""
import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from pipeline.pose_ingest import PoseSequence, preprocess
from pipeline.spectral import build_schedule, extract_dataset
from pipeline.synthgen import CANONICAL_SKELETON, generate, preset_spec


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the full-length experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-length training runs (enable with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def skeleton_frames(num_frames: int, confidence: float = 0.9) -> np.ndarray:
    """Static upright skeleton, (frames, 18, 3)."""
    xy = np.broadcast_to(CANONICAL_SKELETON, (num_frames, 18, 2))
    conf = np.full((num_frames, 18, 1), confidence)
    return np.concatenate([xy, conf], axis=2).copy()


@pytest.fixture
def static_sequence():
    return PoseSequence(skeleton_frames(50), fps=25.0, subject_id="static", label=0)


@pytest.fixture(scope="session")
def raw_dataset():
    """12 raw synthetic subjects (8 normal, 4 abnormal), 40 s at 25 fps."""
    return generate(preset_spec("mini-like", seed=3))


@pytest.fixture(scope="session")
def coarse_schedule():
    # c = 2 gives 8 bins up to 6 Hz, small enough for quick training runs
    return build_schedule(c=2.0)


@pytest.fixture(scope="session")
def dataset(raw_dataset, coarse_schedule):
    return extract_dataset([preprocess(s) for s in raw_dataset], coarse_schedule)
