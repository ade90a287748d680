"""
Tests for keypoint parsing, gap filling and body-centred normalisation
"""
import json

import numpy as np
import pytest

from conftest import skeleton_frames
from pipeline.errors import (
    DataError,
    DegenerateFrameError,
    ParameterError,
    PoseFormatError,
    PoseParseError,
    PreprocessError,
)
from pipeline.pose_ingest import (
    JOINT_NAMES,
    PoseSequence,
    interpolate_missing,
    load_keypoint_dir,
    normalize_global,
    parse_keypoint_frame,
    preprocess,
    serialize_keypoint_frame,
)


def openpose_payload(frame: np.ndarray) -> str:
    return json.dumps({"version": 1.3, "people": [{"pose_keypoints_2d": frame.ravel().tolist()}]})


def test_parse_openpose_dict():
    """The OpenPose layout gives 18 keypoints in joint order"""
    frame = skeleton_frames(1)[0]
    parsed = parse_keypoint_frame(openpose_payload(frame))
    assert parsed.data.shape == (18, 3)
    assert np.array_equal(parsed.data, frame)
    assert parsed.keypoints[1].x == frame[1, 0]
    assert len(JOINT_NAMES) == 18
    print("✓ OpenPose dict parsed")


def test_parse_flat_and_person_lists():
    """A bare 54-number array and a list of persons are both accepted; first person wins"""
    frame = skeleton_frames(1)[0]
    other = frame + 5.0
    other[:, 2] = 0.5
    assert np.array_equal(parse_keypoint_frame(json.dumps(frame.ravel().tolist())).data, frame)
    persons = json.dumps([frame.ravel().tolist(), other.ravel().tolist()])
    assert np.array_equal(parse_keypoint_frame(persons).data, frame)
    print("✓ flat arrays and person lists parsed")


def test_no_person_is_all_missing():
    """A frame without people becomes an all-zero frame"""
    parsed = parse_keypoint_frame(json.dumps({"people": []}))
    assert not parsed.data.any()
    assert all(kp.missing for kp in parsed.keypoints)


def test_malformed_json_reports_offset():
    """Broken JSON raises PoseParseError carrying the byte offset"""
    with pytest.raises(PoseParseError) as exc:
        parse_keypoint_frame('{"people": [}')
    assert exc.value.offset == 12


def test_wrong_keypoint_counts():
    """Counts that are not a multiple of 3, or not 18 joints, are rejected"""
    with pytest.raises(PoseFormatError):
        parse_keypoint_frame(json.dumps([1.0] * 53))
    with pytest.raises(PoseFormatError):
        parse_keypoint_frame(json.dumps([1.0] * 51))


def test_serialize_then_parse_matches():
    """Serialised frames parse back to the same keypoints"""
    frame = parse_keypoint_frame(openpose_payload(skeleton_frames(1)[0]))
    assert np.array_equal(parse_keypoint_frame(serialize_keypoint_frame(frame)).data, frame.data)


def test_load_keypoint_dir(tmp_path):
    """Frames are read in lexicographic file order"""
    frames = skeleton_frames(3)
    frames[:, :, 0] += np.arange(3)[:, None]
    for i in (2, 0, 1):
        (tmp_path / f"frame_{i:04d}.json").write_text(openpose_payload(frames[i]))
    seq = load_keypoint_dir(tmp_path, fps=30.0, subject_id="s1", label=1)
    assert seq.num_frames == 3
    assert seq.subject_id == "s1" and seq.label == 1
    assert np.array_equal(seq.keypoints, frames)
    print("✓ keypoint directory loaded in order")


def test_load_keypoint_dir_errors(tmp_path):
    """An empty directory or a broken file is a DataError"""
    with pytest.raises(DataError):
        load_keypoint_dir(tmp_path, fps=25.0)
    (tmp_path / "frame_0000.json").write_text("{not json")
    with pytest.raises(DataError):
        load_keypoint_dir(tmp_path, fps=25.0)


def test_sequence_validation():
    """Frame rate and label are checked on construction"""
    with pytest.raises(ParameterError):
        PoseSequence(skeleton_frames(4), fps=10.0, subject_id="slow")
    with pytest.raises(ParameterError):
        PoseSequence(skeleton_frames(4), fps=25.0, subject_id="x", label=2)
    with pytest.raises(PoseFormatError):
        PoseSequence(np.zeros((4, 17, 3)), fps=25.0, subject_id="x")


def test_from_dict_rejects_unknown_version(static_sequence):
    data = static_sequence.to_dict()
    data["format_version"] = 99
    with pytest.raises(DataError):
        PoseSequence.from_dict(data)


def test_interpolate_fills_gaps():
    """A joint missing in one frame is the average of its neighbours"""
    kp = skeleton_frames(3)
    kp[0, 4, :2] = (10.0, 20.0)
    kp[2, 4, :2] = (30.0, 40.0)
    kp[1, 4] = 0.0
    seq = PoseSequence(kp, fps=25.0, subject_id="gap")
    filled, flagged = interpolate_missing(seq)
    assert flagged == []
    assert np.allclose(filled.keypoints[1, 4, :2], (20.0, 30.0))
    print("✓ gaps interpolated linearly")


def test_interpolate_holds_edges():
    """Leading / trailing gaps take the nearest detection"""
    kp = skeleton_frames(4)
    kp[0, 7] = 0.0
    kp[3, 7] = 0.0
    filled, _ = interpolate_missing(PoseSequence(kp, fps=25.0, subject_id="edges"))
    assert np.allclose(filled.keypoints[0, 7], kp[1, 7])
    assert np.allclose(filled.keypoints[3, 7], kp[2, 7])


def test_never_detected_joint_is_flagged():
    """A joint missing in every frame is zeroed and recorded"""
    kp = skeleton_frames(5)
    kp[:, 16] = 0.0
    filled, flagged = interpolate_missing(PoseSequence(kp, fps=25.0, subject_id="ear"))
    assert flagged == [16]
    assert filled.missing_joints == (16,)
    assert not filled.keypoints[:, 16].any()


def test_confidence_threshold():
    """With a threshold, low-confidence detections also count as missing"""
    kp = skeleton_frames(3)
    kp[1, 4, :2] = (999.0, 999.0)
    kp[1, 4, 2] = 0.05
    seq = PoseSequence(kp, fps=25.0, subject_id="lowconf")
    kept, _ = interpolate_missing(seq, conf_threshold=0.0)
    fixed, _ = interpolate_missing(seq, conf_threshold=0.1)
    assert kept.keypoints[1, 4, 0] == 999.0
    assert np.allclose(fixed.keypoints[1, 4, :2], kp[0, 4, :2])
    with pytest.raises(ParameterError):
        interpolate_missing(seq, conf_threshold=1.0)


def test_normalize_centres_and_rotates():
    """Neck/hip centroid goes to the origin and the neck points along +y"""
    kp = skeleton_frames(2)
    # second frame lies on its side
    kp[1, :, :2] = kp[1, :, 1::-1]
    out = normalize_global(PoseSequence(kp, fps=25.0, subject_id="tilt")).keypoints
    centroid = out[:, [1, 8, 11], :2].mean(axis=1)
    assert np.allclose(centroid, 0.0, atol=1e-9)
    assert np.allclose(out[:, 1, 0], 0.0, atol=1e-9)
    assert np.all(out[:, 1, 1] > 0)
    # distances are unchanged
    d_before = np.linalg.norm(kp[0, 4, :2] - kp[0, 7, :2])
    d_after = np.linalg.norm(out[0, 4, :2] - out[0, 7, :2])
    assert d_after == pytest.approx(d_before)
    assert np.array_equal(out[..., 2], kp[..., 2])
    print("✓ frames centred and rotated")


def test_normalize_needs_anchors():
    """A missing neck or hip must be interpolated first"""
    kp = skeleton_frames(2)
    kp[0, 8] = 0.0
    with pytest.raises(PreprocessError):
        normalize_global(PoseSequence(kp, fps=25.0, subject_id="nohip"))


def test_degenerate_frame():
    """Neck at the body origin cannot define an orientation"""
    kp = skeleton_frames(3)
    kp[2, 1, :2] = (5.0, 5.0)
    kp[2, 8, :2] = (4.0, 5.0)
    kp[2, 11, :2] = (6.0, 5.0)
    with pytest.raises(DegenerateFrameError) as exc:
        normalize_global(PoseSequence(kp, fps=25.0, subject_id="flat"))
    assert exc.value.frames == [2]


def test_preprocess_keeps_missing_joints_at_zero():
    kp = skeleton_frames(4)
    kp[:, 17] = 0.0
    out = preprocess(PoseSequence(kp, fps=25.0, subject_id="noear"))
    assert out.missing_joints == (17,)
    assert not out.keypoints[:, 17, :2].any()


def rigid(frame_xy: np.ndarray, angle: float, shift) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return frame_xy @ np.array([[c, s], [-s, c]]) + np.asarray(shift)


def test_normalize_is_rigid_invariant():
    """Random translations and rotations of a frame give the same normalised pose"""
    rng = np.random.default_rng(0)
    base = skeleton_frames(1)
    base[0, :, :2] += rng.normal(0, 15, (18, 2))
    reference = normalize_global(PoseSequence(base, fps=25.0, subject_id="ref")).keypoints
    for _ in range(100):
        moved = base.copy()
        moved[0, :, :2] = rigid(base[0, :, :2], rng.uniform(0, 2 * np.pi), rng.uniform(-200, 200, 2))
        out = normalize_global(PoseSequence(moved, fps=25.0, subject_id="moved")).keypoints
        assert np.allclose(out, reference, rtol=0, atol=1e-9)
    print("✓ normalisation invariant to rigid motion")


def interpolation_oracle(values: np.ndarray, missing: np.ndarray) -> np.ndarray:
    """Frame-by-frame piecewise-linear fill between the nearest present frames"""
    out = values.copy()
    present = np.nonzero(~missing)[0]
    for t in np.nonzero(missing)[0]:
        before = present[present < t]
        after = present[present > t]
        if before.size and after.size:
            t0, t1 = before[-1], after[0]
            w = (t - t0) / (t1 - t0)
            out[t] = values[t0] + w * (values[t1] - values[t0])
        else:
            out[t] = values[before[-1]] if before.size else values[after[0]]
    return out


def test_interpolation_matches_oracle():
    """20% masked random tracks are filled exactly like the brute-force oracle"""
    rng = np.random.default_rng(1)
    for trial in range(100):
        kp = skeleton_frames(30)
        kp[..., :2] += rng.integers(-50, 50, size=(30, 18, 2))
        mask = rng.random((30, 18)) < 0.2
        mask[rng.integers(0, 30), :] = False  # every joint seen at least once
        kp[mask] = 0.0
        filled, flagged = interpolate_missing(PoseSequence(kp, fps=25.0, subject_id=f"t{trial}"))
        assert flagged == []
        for j in range(18):
            expected = interpolation_oracle(kp[:, j, :], mask[:, j])
            assert np.allclose(filled.keypoints[:, j, :], expected, rtol=0, atol=1e-12)


def test_interpolation_is_idempotent():
    kp = skeleton_frames(10)
    kp[3:6, 4] = 0.0
    kp[:, 15] = 0.0
    once, _ = interpolate_missing(PoseSequence(kp, fps=25.0, subject_id="idem"))
    twice, _ = interpolate_missing(once)
    assert np.array_equal(once.keypoints, twice.keypoints)
