"""Pose-estimator keypoints -> clean, body-centred pose sequences.

Conventions:
- Keypoints follow the COCO-18 layout OpenPose emits (`JOINT_NAMES` order).
- A keypoint at exactly (0, 0) is a missed detection.
- Arrays are `(frames, 18, 3)` with columns x, y, confidence. Pixels, not
  normalised; scale is never changed by any step here.
"""
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from pipeline.configurations import (
    CONF_THRESHOLD,
    DEGENERATE_TOL,
    LABELS,
    LEFT_HIP,
    MAX_FPS,
    MIN_FPS,
    NECK,
    NUM_JOINTS,
    RIGHT_HIP,
    SEQUENCE_FORMAT_VERSION,
)
from pipeline.errors import (
    DataError,
    DegenerateFrameError,
    ParameterError,
    PoseFormatError,
    PoseParseError,
    PreprocessError,
)

logger = logging.getLogger(__name__)

JOINT_NAMES = [
    "Nose", "Neck",
    "Right Shoulder", "Right Elbow", "Right Wrist",
    "Left Shoulder", "Left Elbow", "Left Wrist",
    "Right Hip", "Right Knee", "Right Ankle",
    "Left Hip", "Left Knee", "Left Ankle",
    "Right Eye", "Left Eye", "Right Ear", "Left Ear",
]


class Keypoint(NamedTuple):
    x: float
    y: float
    confidence: float

    @property
    def missing(self) -> bool:
        return self.x == 0.0 and self.y == 0.0


@dataclass(frozen=True)
class PoseFrame:
    """One frame of 18 keypoints, indexed by joint id."""
    data: np.ndarray  # (18, 3)

    def __post_init__(self):
        if self.data.shape != (NUM_JOINTS, 3):
            raise PoseFormatError(f"a frame needs {NUM_JOINTS} keypoints, got shape {self.data.shape}")
        if np.any((self.data[:, 2] < 0.0) | (self.data[:, 2] > 1.0)):
            raise PoseFormatError("keypoint confidence outside [0, 1]")

    @property
    def keypoints(self) -> List[Keypoint]:
        return [Keypoint(float(x), float(y), float(c)) for x, y, c in self.data]

    @classmethod
    def empty(cls) -> "PoseFrame":
        return cls(np.zeros((NUM_JOINTS, 3)))


@dataclass(frozen=True)
class PoseSequence:
    """A subject's movement recording.

    `missing_joints` lists joints that were never detected; their trajectory
    is all zeros and every later stage leaves it that way.
    """
    keypoints: np.ndarray  # (frames, 18, 3)
    fps: float
    subject_id: str
    label: Optional[int] = None
    missing_joints: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        kp = self.keypoints
        if kp.ndim != 3 or kp.shape[1:] != (NUM_JOINTS, 3):
            raise PoseFormatError(f"sequence keypoints must be (frames, {NUM_JOINTS}, 3), got {kp.shape}")
        if kp.shape[0] == 0:
            raise PoseFormatError(f"sequence {self.subject_id!r} has no frames")
        if not (MIN_FPS <= self.fps <= MAX_FPS):
            raise ParameterError(f"fps {self.fps} outside [{MIN_FPS}, {MAX_FPS}]")
        if self.label is not None and self.label not in (0, 1):
            raise ParameterError(f"label must be 0 (normal) or 1 (abnormal), got {self.label}")

    @property
    def num_frames(self) -> int:
        return int(self.keypoints.shape[0])

    @property
    def frames(self) -> List[PoseFrame]:
        return [PoseFrame(f) for f in self.keypoints]

    @property
    def label_name(self) -> Optional[str]:
        return None if self.label is None else LABELS[self.label]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": SEQUENCE_FORMAT_VERSION,
            "subject_id": self.subject_id,
            "fps": self.fps,
            "label": self.label_name,
            "frame_count": self.num_frames,
            "missing_joints": list(self.missing_joints),
            "frames": self.keypoints.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PoseSequence":
        version = data.get("format_version")
        if version != SEQUENCE_FORMAT_VERSION:
            raise DataError(f"unsupported sequence format version {version!r}")
        label = data.get("label")
        if label is not None and label not in LABELS:
            raise DataError(f"subject {data.get('subject_id')!r}: unknown label {label!r}")
        keypoints = np.asarray(data["frames"], dtype=np.float64)
        if keypoints.shape[0] != data["frame_count"]:
            raise DataError(
                f"subject {data.get('subject_id')!r}: header says {data['frame_count']} frames, "
                f"found {keypoints.shape[0]}"
            )
        return cls(
            keypoints=keypoints,
            fps=float(data["fps"]),
            subject_id=str(data["subject_id"]),
            label=None if label is None else LABELS.index(label),
            missing_joints=tuple(int(j) for j in data.get("missing_joints", [])),
        )


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def _first_person(payload: Any) -> Optional[List[float]]:
    """Pick the flat keypoint list of the first detected person."""
    if isinstance(payload, dict):
        people = payload.get("people", [])
        if not people:
            return None
        first = people[0]
        if isinstance(first, dict):
            return first.get("pose_keypoints_2d", first.get("pose_keypoints", []))
        return first
    if isinstance(payload, list):
        if not payload:
            return None
        if all(isinstance(v, (int, float)) for v in payload):
            return payload
        # list of persons, each a flat list
        return payload[0]
    raise PoseFormatError(f"unexpected keypoint payload of type {type(payload).__name__}")


def parse_keypoint_frame(text: str) -> PoseFrame:
    """Parse one OpenPose-style keypoint file (JSON).

    Accepts the OpenPose dict (`{"people": [{"pose_keypoints_2d": [...]}]}`),
    a bare flat array of 54 numbers, or a list of such arrays (one per
    person). Only the first person is used; no person -> all-missing frame.
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PoseParseError(f"malformed keypoint file: {exc.msg}", _byte_offset(text, exc.pos)) from exc

    flat = _first_person(payload)
    if flat is None:
        return PoseFrame.empty()
    if len(flat) % 3 != 0:
        raise PoseFormatError(f"keypoint count {len(flat)} is not a multiple of 3")
    if len(flat) != NUM_JOINTS * 3:
        raise PoseFormatError(f"expected {NUM_JOINTS} keypoints, got {len(flat) // 3}")
    try:
        data = np.asarray(flat, dtype=np.float64).reshape(NUM_JOINTS, 3)
    except (TypeError, ValueError) as exc:
        raise PoseFormatError(f"non-numeric keypoint value: {exc}") from exc
    return PoseFrame(data)


def serialize_keypoint_frame(frame: PoseFrame) -> str:
    """Inverse of `parse_keypoint_frame` (OpenPose dict form, single person)."""
    return json.dumps({"version": 1.3, "people": [{"pose_keypoints_2d": frame.data.ravel().tolist()}]})


def load_keypoint_dir(
    directory: Path,
    fps: float,
    subject_id: Optional[str] = None,
    label: Optional[int] = None,
) -> PoseSequence:
    """Read `<directory>/*.json`, one keypoint file per frame, in lexicographic order."""
    directory = Path(directory)
    files = sorted(directory.glob("*.json"))
    if not files:
        raise DataError(f"no keypoint files in {directory}")
    frames = []
    for path in files:
        try:
            frames.append(parse_keypoint_frame(path.read_text(encoding="utf-8")).data)
        except (PoseParseError, PoseFormatError) as exc:
            raise DataError(f"{path.name}: {exc}") from exc
    sid = subject_id or directory.name
    logger.info(f"  [INGEST] {sid}: read {len(frames)} frames from {directory}")
    return PoseSequence(np.stack(frames), fps=fps, subject_id=sid, label=label)


def missing_mask(keypoints: np.ndarray, conf_threshold: float = CONF_THRESHOLD) -> np.ndarray:
    """(frames, 18) bool mask of missed detections."""
    mask = (keypoints[..., 0] == 0.0) & (keypoints[..., 1] == 0.0)
    if conf_threshold > 0.0:
        mask |= keypoints[..., 2] <= conf_threshold
    return mask


def interpolate_missing(
    seq: PoseSequence, conf_threshold: float = CONF_THRESHOLD
) -> Tuple[PoseSequence, List[int]]:
    """Fill missed detections per joint by linear interpolation in time.

    Gaps at the start/end hold the nearest detected value. Joints never
    detected are zeroed and returned in the flag list.
    """
    if not (0.0 <= conf_threshold < 1.0):
        raise ParameterError(f"conf_threshold must be in [0, 1), got {conf_threshold}")

    kp = seq.keypoints.copy()
    missing = missing_mask(kp, conf_threshold)
    t = np.arange(kp.shape[0], dtype=np.float64)
    flagged: List[int] = []

    for j in range(NUM_JOINTS):
        gaps = missing[:, j]
        if not gaps.any():
            continue
        present = ~gaps
        if not present.any():
            kp[:, j, :] = 0.0
            flagged.append(j)
            continue
        for ch in range(3):
            kp[gaps, j, ch] = np.interp(t[gaps], t[present], kp[present, j, ch])

    if flagged:
        names = ", ".join(JOINT_NAMES[j] for j in flagged)
        logger.warning(f"  [INGEST] {seq.subject_id}: never detected -> zeroed: {names}")
    filled = int(missing.sum()) - len(flagged) * kp.shape[0]
    logger.debug(f"  [INGEST] {seq.subject_id}: interpolated {filled} keypoints")

    merged = tuple(sorted(set(seq.missing_joints) | set(flagged)))
    return replace(seq, keypoints=kp, missing_joints=merged), flagged


def normalize_global(seq: PoseSequence) -> PoseSequence:
    """Centre each frame on the neck/hips centroid and turn the neck to +y.

    Per frame: subtract the centroid of {neck, right hip, left hip}, then
    rotate about the origin so the origin->neck vector points along +y.
    Confidences are untouched; joints in `missing_joints` stay at zero.
    """
    kp = seq.keypoints
    anchors = [NECK, RIGHT_HIP, LEFT_HIP]
    anchor_missing = missing_mask(kp[:, anchors, :], 0.0)
    if anchor_missing.any():
        bad = np.nonzero(anchor_missing.any(axis=1))[0].tolist()
        raise PreprocessError(
            f"{seq.subject_id}: neck/hips missing in {len(bad)} frame(s) starting at {bad[0]}; "
            "run interpolate_missing first"
        )

    xy = kp[..., :2]
    origin = xy[:, anchors, :].mean(axis=1, keepdims=True)
    centred = xy - origin

    neck = centred[:, NECK, :]
    r = np.hypot(neck[:, 0], neck[:, 1])
    degenerate = np.nonzero(r <= DEGENERATE_TOL)[0]
    if degenerate.size:
        raise DegenerateFrameError(degenerate.tolist())

    ux = neck[:, 0] / r
    uy = neck[:, 1] / r
    # rotation taking (ux, uy) -> (0, 1): [[uy, -ux], [ux, uy]]
    x = centred[..., 0]
    y = centred[..., 1]
    rx = uy[:, None] * x - ux[:, None] * y
    ry = ux[:, None] * x + uy[:, None] * y

    out = kp.copy()
    out[..., 0] = rx
    out[..., 1] = ry
    if seq.missing_joints:
        out[:, list(seq.missing_joints), :2] = 0.0
    return replace(seq, keypoints=out)


def preprocess(seq: PoseSequence, conf_threshold: float = CONF_THRESHOLD) -> PoseSequence:
    """interpolate_missing followed by normalize_global."""
    filled, _ = interpolate_missing(seq, conf_threshold)
    return normalize_global(filled)
