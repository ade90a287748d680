"""Frequency-domain features for pose sequences.

Each joint coordinate track is resampled onto the reference frame rate,
transformed with an arbitrary-length FFT (Bluestein) and compressed into
exponentially widening frequency bins below the cutoff.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.fft import fft, ifft

from pipeline.configurations import (
    BIN_B0,
    BIN_C,
    CUTOFF_HZ,
    FEATURES_FORMAT_VERSION,
    LABELS,
    MAX_FPS,
    MIN_FPS,
    N_FFT,
    NUM_CHANNELS,
    NUM_JOINTS,
    REF_FPS,
    ROUND_LIMIT,
)
from pipeline.errors import DataError, DimensionError, ParameterError, PreprocessError
from pipeline.pose_ingest import PoseSequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        if np.ndim(self.samples) != 1 or len(self.samples) < 2:
            raise ParameterError(f"a time series needs at least 2 samples, got shape {np.shape(self.samples)}")
        if self.sample_rate <= 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class Spectrum:
    coefficients: np.ndarray
    resolution: float  # Hz per coefficient

    def __len__(self) -> int:
        return len(self.coefficients)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.coefficients)

    def frequency(self, k: int) -> float:
        return k * self.resolution


def dft_naive(series: TimeSeries) -> Spectrum:
    """Direct O(N^2) DFT, one output coefficient per row."""
    x = np.asarray(series.samples, dtype=np.complex128)
    n_samples = len(x)
    n = np.arange(n_samples)
    out = np.empty(n_samples, dtype=np.complex128)
    for k in range(n_samples):
        # reduce k*n modulo N before scaling to keep the phase exact for large N
        phase = (k * n) % n_samples
        out[k] = np.sum(x * np.exp(-2j * np.pi * phase / n_samples))
    return Spectrum(out, series.sample_rate / n_samples)


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def bluestein(x: np.ndarray) -> np.ndarray:
    """DFT of arbitrary length along the last axis via a power-of-two convolution."""
    x = np.asarray(x)
    n = x.shape[-1]
    if n < 2:
        raise ParameterError(f"FFT length must be at least 2, got {n}")
    k = np.arange(n)
    # n^2 mod 2N keeps the chirp argument small
    chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)

    size = _next_pow2(2 * n - 1)
    a = np.zeros(x.shape[:-1] + (size,), dtype=np.complex128)
    a[..., :n] = x * chirp
    b = np.zeros(size, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[size - n + 1:] = np.conj(chirp[1:])[::-1]

    conv = ifft(fft(a, axis=-1) * fft(b), axis=-1)
    return conv[..., :n] * chirp


def fft_bluestein(series: TimeSeries) -> Spectrum:
    return Spectrum(bluestein(np.asarray(series.samples, dtype=np.float64)), series.sample_rate / len(series))


def _round_half_away(v: float) -> int:
    return int(math.floor(v + 0.5)) if v >= 0 else -int(math.floor(-v + 0.5))


def bin_widths(b0: int, c: float, coverage: int) -> List[int]:
    """Widths b_n = Round(b0 * c^n) below ROUND_LIMIT, Ceiling above, until coverage is reached."""
    if b0 < 1:
        raise ParameterError(f"b0 must be >= 1, got {b0}")
    if c <= 1.0:
        raise ParameterError(f"c must be > 1, got {c}")
    if coverage < 1:
        raise ParameterError(f"coverage must be >= 1, got {coverage}")

    widths: List[int] = []
    total = 0
    n = 0
    while total < coverage:
        v = b0 * c ** n
        w = _round_half_away(v) if v < ROUND_LIMIT else int(math.ceil(v))
        widths.append(w)
        total += w
        n += 1
    return widths


@dataclass(frozen=True)
class BinSchedule:
    """Frequency bins over FFT coefficients 0..coverage-1.

    `widths` are the raw schedule widths; `edges` are their cumulative sums
    clamped at `coverage`, so the last bin may be narrower than its width.
    """
    b0: int
    c: float
    widths: Tuple[int, ...]
    edges: Tuple[int, ...]
    cutoff_hz: float = CUTOFF_HZ
    ref_fps: float = REF_FPS
    n_fft: int = N_FFT
    binned: bool = True

    @property
    def num_bins(self) -> int:
        return len(self.widths)

    @property
    def coverage(self) -> int:
        return self.edges[-1]

    @property
    def resolution(self) -> float:
        return self.ref_fps / self.n_fft

    def bin_range_hz(self, b: int) -> Tuple[float, float]:
        return self.edges[b] * self.resolution, (self.edges[b + 1] - 1) * self.resolution

    def to_dict(self) -> Dict[str, Any]:
        return {
            "b0": self.b0,
            "c": self.c,
            "cutoff_hz": self.cutoff_hz,
            "ref_fps": self.ref_fps,
            "n_fft": self.n_fft,
            "binned": self.binned,
            "widths": list(self.widths),
            "edges": list(self.edges),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BinSchedule":
        return cls(
            b0=int(data["b0"]),
            c=float(data["c"]),
            widths=tuple(int(w) for w in data["widths"]),
            edges=tuple(int(e) for e in data["edges"]),
            cutoff_hz=float(data["cutoff_hz"]),
            ref_fps=float(data["ref_fps"]),
            n_fft=int(data["n_fft"]),
            binned=bool(data.get("binned", True)),
        )


def coverage_for(fps: float, n_fft: int, cutoff_hz: float) -> int:
    # tolerance absorbs float error when cutoff*n_fft/fps is an exact integer
    return int(math.floor(cutoff_hz * n_fft / fps + 1e-9)) + 1


def build_schedule(
    fps: float = REF_FPS,
    n_fft: int = N_FFT,
    cutoff_hz: float = CUTOFF_HZ,
    c: float = BIN_C,
    b0: int = BIN_B0,
) -> BinSchedule:
    if not (MIN_FPS <= fps <= MAX_FPS):
        raise ParameterError(f"fps {fps} outside [{MIN_FPS}, {MAX_FPS}]")
    if cutoff_hz <= 0 or cutoff_hz >= fps / 2:
        raise ParameterError(f"cutoff {cutoff_hz} Hz must be in (0, {fps / 2}) for {fps} fps")
    if n_fft < 2:
        raise ParameterError(f"n_fft must be >= 2, got {n_fft}")

    coverage = coverage_for(fps, n_fft, cutoff_hz)
    if coverage < 2:
        raise ParameterError(f"window of {n_fft} samples is too short for a {cutoff_hz} Hz cutoff")

    widths = bin_widths(b0, c, coverage)
    edges = np.minimum(np.concatenate([[0], np.cumsum(widths)]), coverage)
    return BinSchedule(
        b0=b0,
        c=c,
        widths=tuple(widths),
        edges=tuple(int(e) for e in edges),
        cutoff_hz=cutoff_hz,
        ref_fps=fps,
        n_fft=n_fft,
    )


def unbinned(schedule: BinSchedule) -> BinSchedule:
    """The no-binning limit: one width-1 bin per coefficient below the cutoff."""
    coverage = schedule.coverage
    return BinSchedule(
        b0=1,
        c=1.0,
        widths=(1,) * coverage,
        edges=tuple(range(coverage + 1)),
        cutoff_hz=schedule.cutoff_hz,
        ref_fps=schedule.ref_fps,
        n_fft=schedule.n_fft,
        binned=False,
    )


def _resample_array(values: np.ndarray, fps: float, target_fps: float) -> np.ndarray:
    """Linear resampling along axis 0 onto a uniform grid spanning the same duration."""
    n = values.shape[0]
    duration = (n - 1) / fps
    n_new = int(math.floor(duration * target_fps + 1e-9)) + 1
    if n_new < 2:
        raise ParameterError(f"{n} samples at {fps} Hz are too short to resample to {target_fps} Hz")
    t_old = np.arange(n) / fps
    t_new = np.arange(n_new) / target_fps
    flat = values.reshape(n, -1)
    out = np.empty((n_new, flat.shape[1]), dtype=np.float64)
    for col in range(flat.shape[1]):
        out[:, col] = np.interp(t_new, t_old, flat[:, col])
    return out.reshape((n_new,) + values.shape[1:])


def resample(series: TimeSeries, target_fps: float) -> TimeSeries:
    if target_fps <= 0:
        raise ParameterError(f"target_fps must be positive, got {target_fps}")
    if target_fps == series.sample_rate:
        return series
    samples = _resample_array(np.asarray(series.samples, dtype=np.float64), series.sample_rate, target_fps)
    return TimeSeries(samples, target_fps)


@dataclass(frozen=True)
class SpectralFeatures:
    """Binned magnitudes, shape (bins, 18 joints, 2 channels)."""
    values: np.ndarray
    schedule: BinSchedule
    subject_id: str
    label: Optional[int] = None

    def __post_init__(self):
        expected = (self.schedule.num_bins, NUM_JOINTS, NUM_CHANNELS)
        if self.values.shape != expected:
            raise DimensionError("SpectralFeatures", self.values.shape, expected)
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ParameterError(f"{self.subject_id}: feature values must be finite and non-negative")

    @property
    def num_bins(self) -> int:
        return self.schedule.num_bins

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": FEATURES_FORMAT_VERSION,
            "subject_id": self.subject_id,
            "label": None if self.label is None else LABELS[self.label],
            "num_bins": self.num_bins,
            "num_joints": NUM_JOINTS,
            "num_channels": NUM_CHANNELS,
            "schedule": self.schedule.to_dict(),
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SpectralFeatures":
        if data.get("format_version") != FEATURES_FORMAT_VERSION:
            raise DataError(f"unsupported features format version {data.get('format_version')!r}")
        label = data.get("label")
        return cls(
            values=np.asarray(data["values"], dtype=np.float64),
            schedule=BinSchedule.from_dict(data["schedule"]),
            subject_id=str(data["subject_id"]),
            label=None if label is None else LABELS.index(label),
        )

    def to_arrays(self) -> Dict[str, np.ndarray]:
        """Flat arrays for `np.savez`."""
        s = self.schedule
        return {
            "format_version": np.array(FEATURES_FORMAT_VERSION),
            "values": self.values,
            "widths": np.asarray(s.widths, dtype=np.int64),
            "edges": np.asarray(s.edges, dtype=np.int64),
            "params": np.array([s.b0, s.c, s.cutoff_hz, s.ref_fps, s.n_fft, float(s.binned)]),
            "subject_id": np.array(self.subject_id),
            "label": np.array(-1 if self.label is None else self.label),
        }

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray]) -> "SpectralFeatures":
        if int(arrays["format_version"]) != FEATURES_FORMAT_VERSION:
            raise DataError(f"unsupported features format version {int(arrays['format_version'])}")
        b0, c, cutoff, ref_fps, n_fft, binned = arrays["params"].tolist()
        schedule = BinSchedule(
            b0=int(b0),
            c=float(c),
            widths=tuple(int(w) for w in arrays["widths"]),
            edges=tuple(int(e) for e in arrays["edges"]),
            cutoff_hz=cutoff,
            ref_fps=ref_fps,
            n_fft=int(n_fft),
            binned=bool(binned),
        )
        label = int(arrays["label"])
        return cls(
            values=np.asarray(arrays["values"], dtype=np.float64),
            schedule=schedule,
            subject_id=str(arrays["subject_id"]),
            label=None if label < 0 else label,
        )


def extract_features(seq: PoseSequence, schedule: BinSchedule) -> SpectralFeatures:
    """Binned magnitude spectra of every joint's x and y track."""
    if seq.num_frames < 2:
        raise PreprocessError(f"{seq.subject_id}: need at least 2 frames, got {seq.num_frames}")

    xy = seq.keypoints[..., :2]
    if seq.fps != schedule.ref_fps:
        xy = _resample_array(xy, seq.fps, schedule.ref_fps)
        logger.info(
            f"  [SPECTRAL] {seq.subject_id}: resampled {seq.fps:g} fps -> {schedule.ref_fps:g} fps "
            f"({seq.num_frames} -> {xy.shape[0]} frames)"
        )

    xy = xy[: schedule.n_fft]
    xy = xy - xy.mean(axis=0, keepdims=True)
    padded = np.zeros((schedule.n_fft, NUM_JOINTS, NUM_CHANNELS))
    padded[: xy.shape[0]] = xy

    # (18, 2, n_fft): transform along the time axis
    tracks = np.moveaxis(padded, 0, -1)
    mags = np.abs(bluestein(tracks))[..., : schedule.coverage]

    edges = np.asarray(schedule.edges)
    counts = np.diff(edges)
    sums = np.add.reduceat(mags, edges[:-1], axis=-1)
    binned = sums / counts
    values = np.moveaxis(binned, -1, 0)
    return SpectralFeatures(values=values, schedule=schedule, subject_id=seq.subject_id, label=seq.label)


def extract_dataset(sequences: Sequence[PoseSequence], schedule: BinSchedule) -> List[SpectralFeatures]:
    return [extract_features(seq, schedule) for seq in sequences]


def search_c(
    train_set: Sequence[PoseSequence],
    grid: Sequence[float],
    evaluate: Callable[[List[SpectralFeatures]], float],
    fps: float = REF_FPS,
    n_fft: int = N_FFT,
    cutoff_hz: float = CUTOFF_HZ,
) -> float:
    """Pick the grid value whose features give the best `evaluate` accuracy.

    Ties go to the smallest c (finest low-frequency resolution).
    """
    if not grid:
        raise ParameterError("c grid is empty")
    bad = [c for c in grid if c <= 1.0]
    if bad:
        raise ParameterError(f"c values must be > 1, got {bad}")

    best_c: Optional[float] = None
    best_acc = -math.inf
    for c in sorted(grid):
        schedule = build_schedule(fps, n_fft, cutoff_hz, c)
        acc = float(evaluate(extract_dataset(train_set, schedule)))
        logger.info(f"  [SPECTRAL] c={c:g}: {schedule.num_bins} bins, accuracy {acc:.2f}")
        if acc > best_acc:
            best_c, best_acc = c, acc
    logger.info(f"  [SPECTRAL] best c = {best_c:g} ({best_acc:.2f})")
    return float(best_c)
