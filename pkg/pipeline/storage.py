"""File persistence for sequences, features and reports.

Every write goes to a temp file in the target directory and is moved into
place with `os.replace`, so a crashed run never leaves a half-written file.
"""
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from pipeline.configurations import DATA_DIR
from pipeline.errors import DataError
from pipeline.pose_ingest import PoseSequence
from pipeline.spectral import SpectralFeatures

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
SUMMARY_MARKER = "# summary"


def write_bytes_atomic(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text_atomic(path: Path, text: str) -> None:
    write_bytes_atomic(Path(path), text.encode("utf-8"))


class DataStorage:
    def __init__(self, root: Optional[Path] = None):
        self.root = Path(root) if root is not None else DATA_DIR

    def _load_json(self, path: Path, default: Any = None) -> Any:
        path = Path(path)
        if not path.exists():
            if default is not None:
                return default
            raise DataError(f"file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                return json.load(f)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path.name}: malformed JSON at line {exc.lineno}") from exc

    def _write_json(self, path: Path, data: Any) -> None:
        write_text_atomic(Path(path), json.dumps(data, indent=2) + "\n")

    # sequences

    def save_sequence(self, seq: PoseSequence, path: Path) -> None:
        self._write_json(path, seq.to_dict())

    def load_sequence(self, path: Path) -> PoseSequence:
        data = self._load_json(path)
        try:
            return PoseSequence.from_dict(data)
        except KeyError as exc:
            raise DataError(f"{Path(path).name}: missing field {exc.args[0]!r}") from exc

    def save_dataset(self, sequences: Sequence[PoseSequence], directory: Path) -> List[Path]:
        directory = Path(directory)
        paths = []
        for seq in sequences:
            path = directory / f"{seq.subject_id}.json"
            self.save_sequence(seq, path)
            paths.append(path)
        logger.info(f"  [STORAGE] wrote {len(paths)} sequences to {directory}")
        return paths

    def load_dataset(self, directory: Path, require_labels: bool = True) -> List[PoseSequence]:
        """All canonical sequence files of a directory, ordered by file name."""
        directory = Path(directory)
        if not directory.is_dir():
            raise DataError(f"dataset directory not found: {directory}")
        files = sorted(directory.glob("*.json"))
        if not files:
            raise DataError(f"no sequence files in {directory}")
        sequences = [self.load_sequence(path) for path in files]
        if require_labels:
            for seq in sequences:
                if seq.label is None:
                    raise DataError(f"subject {seq.subject_id!r} has no label")
        return sequences

    # features

    def save_features(self, features: SpectralFeatures, path: Path) -> None:
        path = Path(path)
        if path.suffix == ".npz":
            buf = io.BytesIO()
            np.savez(buf, **features.to_arrays())
            write_bytes_atomic(path, buf.getvalue())
        else:
            self._write_json(path, features.to_dict())

    def load_features(self, path: Path) -> SpectralFeatures:
        path = Path(path)
        if path.suffix == ".npz":
            if not path.exists():
                raise DataError(f"file not found: {path}")
            with np.load(path, allow_pickle=False) as arrays:
                return SpectralFeatures.from_arrays(dict(arrays))
        return SpectralFeatures.from_dict(self._load_json(path))

    # reports

    def write_report(self, path: Path, table: pd.DataFrame, summary: Optional[Dict[str, Any]] = None) -> None:
        """CSV table, optionally followed by a `# summary` block of key,value rows."""
        text = table.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        if summary:
            # floats as their shortest exact text
            values = [repr(float(v)) if isinstance(v, float) else v for v in summary.values()]
            rows = pd.DataFrame({"key": list(summary.keys()), "value": values})
            text += SUMMARY_MARKER + "\n"
            text += rows.to_csv(index=False, header=False, lineterminator="\n")
        write_text_atomic(Path(path), text)

    def read_report(self, path: Path) -> Tuple[pd.DataFrame, Dict[str, str]]:
        path = Path(path)
        if not path.exists():
            raise DataError(f"file not found: {path}")
        text = path.read_text(encoding="utf-8")
        table_text, _, summary_text = text.partition(SUMMARY_MARKER + "\n")
        table = pd.read_csv(io.StringIO(table_text), float_precision="round_trip")
        summary: Dict[str, str] = {}
        for line in summary_text.splitlines():
            if line:
                key, _, value = line.partition(",")
                summary[key] = value
        return table, summary
