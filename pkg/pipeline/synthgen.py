"""Synthetic movement datasets.

Each subject is a static COCO-18 skeleton whose limbs oscillate with a few
sinusoids. Normal subjects move their wrists, knees and ankles at 1-4 Hz;
abnormal subjects lack that band (by default they only drift slowly).
"""
import logging
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ml.numerics import RngStream
from pipeline.configurations import ABNORMAL, DEFAULT_SEED, MAX_FPS, MIN_FPS, NORMAL, NUM_JOINTS
from pipeline.errors import ParameterError
from pipeline.pose_ingest import PoseSequence

logger = logging.getLogger(__name__)

LIMB_GROUPS: Dict[str, List[int]] = {
    "elbows": [3, 6],
    "wrists": [4, 7],
    "knees": [9, 12],
    "ankles": [10, 13],
}

# Upright body in image coordinates (pixels, y down), centred near (320, 240)
CANONICAL_SKELETON = np.array([
    [320.0, 120.0],  # nose
    [320.0, 160.0],  # neck
    [280.0, 160.0], [260.0, 210.0], [250.0, 255.0],  # right shoulder, elbow, wrist
    [360.0, 160.0], [380.0, 210.0], [390.0, 255.0],  # left shoulder, elbow, wrist
    [295.0, 260.0], [290.0, 320.0], [288.0, 380.0],  # right hip, knee, ankle
    [345.0, 260.0], [350.0, 320.0], [352.0, 380.0],  # left hip, knee, ankle
    [310.0, 110.0], [330.0, 110.0],                  # right eye, left eye
    [300.0, 115.0], [340.0, 115.0],                  # right ear, left ear
])

CONFIDENCE = 0.9
AMPLITUDE_SPREAD = 0.2
OFFSET_SPREAD_PX = 20.0


class Component(BaseModel):
    model_config = ConfigDict(extra="forbid")

    frequency_hz: float = Field(gt=0)
    amplitude_px: float = Field(ge=0)


Profile = Dict[str, List[Component]]


def _profile(spec: Dict[str, List[tuple]]) -> Profile:
    return {group: [Component(frequency_hz=f, amplitude_px=a) for f, a in comps] for group, comps in spec.items()}


NORMAL_PROFILE = _profile({
    "wrists": [(1.5, 12.0), (3.0, 6.0)],
    "knees": [(2.0, 10.0)],
    "ankles": [(1.0, 8.0), (2.5, 10.0)],
})
ABNORMAL_PROFILE = _profile({
    "wrists": [(0.4, 6.0)],
    "knees": [(0.4, 5.0)],
    "ankles": [(0.4, 5.0)],
})
HF_NOISE_PROFILE = _profile({
    "elbows": [(8.5, 6.0)],
    "wrists": [(9.0, 8.0), (10.0, 6.0)],
    "knees": [(8.0, 6.0)],
    "ankles": [(9.5, 8.0)],
})


class SynthSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_normal: int = Field(default=8, ge=1)
    n_abnormal: int = Field(default=4, ge=1)
    fps: float = Field(default=25.0, ge=MIN_FPS, le=MAX_FPS)
    duration: float = Field(default=40.0, gt=0)
    normal_profile: Profile = Field(default_factory=lambda: dict(NORMAL_PROFILE))
    abnormal_profile: Profile = Field(default_factory=lambda: dict(ABNORMAL_PROFILE))
    hf_noise_profile: Optional[Profile] = None
    jitter_std: float = Field(default=1.0, ge=0)
    seed: int = DEFAULT_SEED
    id_prefix: str = "subject"

    @model_validator(mode="after")
    def _check(self) -> "SynthSpec":
        if self.duration * self.fps < 2:
            raise ValueError("duration * fps must give at least 2 frames")
        profiles = [self.normal_profile, self.abnormal_profile, self.hf_noise_profile or {}]
        for profile in profiles:
            for group, comps in profile.items():
                if group not in LIMB_GROUPS:
                    raise ValueError(f"unknown limb group {group!r}; expected one of {sorted(LIMB_GROUPS)}")
                for comp in comps:
                    if comp.frequency_hz >= self.fps / 2:
                        raise ValueError(f"{comp.frequency_hz} Hz is not below Nyquist for {self.fps} fps")
        return self

    @property
    def num_frames(self) -> int:
        return int(round(self.duration * self.fps))


PRESETS: Dict[str, Dict] = {
    "mini-like": {"n_normal": 8, "n_abnormal": 4, "fps": 25.0, "duration": 40.0},
    "rvi-like": {"n_normal": 32, "n_abnormal": 6, "fps": 25.0, "duration": 40.0},
}


def preset_spec(name: str, seed: int = DEFAULT_SEED, hf_noise: bool = False, **overrides) -> SynthSpec:
    if name not in PRESETS:
        raise ParameterError(f"unknown synth preset {name!r}; expected one of {sorted(PRESETS)}")
    values = {**PRESETS[name], "seed": seed, **overrides}
    if hf_noise:
        values["hf_noise_profile"] = dict(HF_NOISE_PROFILE)
    return SynthSpec(**values)


def _add_profile(xy: np.ndarray, t: np.ndarray, profile: Profile, rng: RngStream) -> None:
    for group in sorted(profile):
        for joint in LIMB_GROUPS[group]:
            for comp in profile[group]:
                amp = comp.amplitude_px * (1.0 + rng.generator.uniform(-AMPLITUDE_SPREAD, AMPLITUDE_SPREAD))
                phase = rng.generator.uniform(0.0, 2 * np.pi)
                angle = rng.generator.uniform(0.0, 2 * np.pi)
                wave = amp * np.sin(2 * np.pi * comp.frequency_hz * t + phase)
                xy[:, joint, 0] += wave * np.cos(angle)
                xy[:, joint, 1] += wave * np.sin(angle)


def generate_subject(spec: SynthSpec, index: int, label: int, rng: RngStream) -> PoseSequence:
    t = np.arange(spec.num_frames) / spec.fps
    offset = rng.generator.uniform(-OFFSET_SPREAD_PX, OFFSET_SPREAD_PX, size=2)
    xy = np.broadcast_to(CANONICAL_SKELETON + offset, (len(t), NUM_JOINTS, 2)).copy()

    _add_profile(xy, t, spec.normal_profile if label == NORMAL else spec.abnormal_profile, rng)
    if spec.hf_noise_profile:
        _add_profile(xy, t, spec.hf_noise_profile, rng)
    if spec.jitter_std > 0:
        xy += rng.normal(xy.shape, spec.jitter_std)

    keypoints = np.concatenate([xy, np.full((len(t), NUM_JOINTS, 1), CONFIDENCE)], axis=2)
    return PoseSequence(
        keypoints=keypoints,
        fps=spec.fps,
        subject_id=f"{spec.id_prefix}_{index:03d}",
        label=label,
    )


def generate(spec: SynthSpec, rng: Optional[RngStream] = None) -> List[PoseSequence]:
    """Normal subjects first, then abnormal; each draws from its own sub-stream."""
    rng = rng or RngStream(spec.seed)
    labels = [NORMAL] * spec.n_normal + [ABNORMAL] * spec.n_abnormal
    sequences = [generate_subject(spec, i, label, rng.spawn(i)) for i, label in enumerate(labels)]
    logger.info(
        f"  [SYNTH] {len(sequences)} subjects ({spec.n_normal} normal / {spec.n_abnormal} abnormal), "
        f"{spec.num_frames} frames at {spec.fps:g} fps, seed {rng.seed}"
    )
    return sequences
