"""
Tests for file persistence and the report / attention exports
"""
import numpy as np
import pandas as pd
import pytest

from evalkit.reports import ReportWriter, aggregate_attention, export_attention, read_attention
from ml.faigcn import AttentionMap
from pipeline.errors import DataError
from pipeline.pose_ingest import JOINT_NAMES, PoseSequence
from pipeline.storage import DataStorage


def test_dataset_files(tmp_path, raw_dataset):
    """A saved dataset loads back in file-name order with labels intact"""
    storage = DataStorage(tmp_path)
    paths = storage.save_dataset(raw_dataset[:3], tmp_path / "ds")
    assert [p.name for p in paths] == ["subject_000.json", "subject_001.json", "subject_002.json"]
    loaded = storage.load_dataset(tmp_path / "ds")
    assert [s.subject_id for s in loaded] == ["subject_000", "subject_001", "subject_002"]
    assert np.array_equal(loaded[1].keypoints, raw_dataset[1].keypoints)
    assert loaded[0].label == 0
    print("✓ dataset saved and reloaded")


def test_unlabelled_subject_rejected(tmp_path, static_sequence):
    storage = DataStorage(tmp_path)
    unlabelled = PoseSequence(static_sequence.keypoints, 25.0, "anon")
    storage.save_dataset([unlabelled], tmp_path / "ds")
    with pytest.raises(DataError, match="no label"):
        storage.load_dataset(tmp_path / "ds")
    assert storage.load_dataset(tmp_path / "ds", require_labels=False)[0].label is None


def test_missing_and_broken_files(tmp_path):
    storage = DataStorage(tmp_path)
    with pytest.raises(DataError):
        storage.load_dataset(tmp_path / "nowhere")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(DataError):
        storage.load_sequence(bad)
    bad.write_text('{"format_version": 1, "subject_id": "x"}')
    with pytest.raises(DataError):
        storage.load_sequence(bad)


@pytest.mark.parametrize("suffix", [".json", ".npz"])
def test_feature_files(tmp_path, dataset, suffix):
    storage = DataStorage(tmp_path)
    path = tmp_path / f"features{suffix}"
    storage.save_features(dataset[0], path)
    loaded = storage.load_features(path)
    assert np.array_equal(loaded.values, dataset[0].values)
    assert loaded.schedule == dataset[0].schedule
    assert loaded.label == dataset[0].label


def test_report_floats_reparse_exactly(tmp_path):
    """Report floats survive a write / read unchanged"""
    storage = DataStorage(tmp_path)
    table = pd.DataFrame({"name": ["a", "b"], "value": [0.1 + 0.2, 1.0 / 3.0]})
    path = tmp_path / "reports" / "r.csv"
    mcc = np.float64(100.0 * 28 / np.sqrt(4 * 5 * 8 * 7))
    storage.write_report(path, table, {"seed": 7, "AC": 100.0 * 11 / 12, "MCC": mcc})
    back, summary = storage.read_report(path)
    assert back["value"].tolist() == [0.1 + 0.2, 1.0 / 3.0]
    assert summary["seed"] == "7"
    assert summary["AC"] == "91.66666666666667"
    assert float(summary["MCC"]) == mcc
    assert summary["MCC"] == repr(float(mcc))
    assert [p.name for p in path.parent.iterdir()] == ["r.csv"]


def make_map(seed: int, bins: int = 4) -> AttentionMap:
    alpha = np.random.default_rng(seed).random((bins, 18))
    return AttentionMap(alpha / alpha.sum(axis=0))


def test_attention_export_and_read(tmp_path):
    """Exported attention reads back to the same per-bin values"""
    maps = {"s1": make_map(0), "s2": make_map(1)}
    path = tmp_path / "attention.csv"
    ReportWriter(DataStorage(tmp_path)).attention(path, maps)
    table = pd.read_csv(path)
    assert list(table.columns[:3]) == ["subject_id", "joint", "peak_share"]
    s1 = table[table["subject_id"] == "s1"]
    assert np.allclose(s1["peak_share"], maps["s1"].alpha.max(axis=0) / maps["s1"].alpha.max(axis=0).sum())
    assert s1["peak_share"].sum() == pytest.approx(1.0)
    assert table["joint"].tolist()[:18] == JOINT_NAMES
    back = read_attention(path)
    assert set(back) == {"s1", "s2"}
    assert np.allclose(back["s2"].alpha, maps["s2"].alpha, rtol=0, atol=0)
    export_attention(tmp_path / "one.csv", maps["s1"], "s1")
    assert set(read_attention(tmp_path / "one.csv")) == {"s1"}


def test_read_attention_rejects_other_tables(tmp_path):
    path = tmp_path / "other.csv"
    DataStorage(tmp_path).write_report(path, pd.DataFrame({"a": [1]}))
    with pytest.raises(DataError):
        read_attention(path)


def test_aggregate_attention():
    maps = [make_map(i) for i in range(5)]
    summary = aggregate_attention(maps)
    assert list(summary.columns) == ["joint", "mean", "q1", "q3"]
    assert len(summary) == 18
    assert (summary["q1"] <= summary["q3"]).all()
    assert summary["mean"].sum() == pytest.approx(1.0)
    with pytest.raises(DataError):
        aggregate_attention([])
