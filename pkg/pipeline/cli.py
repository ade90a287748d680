"""Command line entry point.

    python run_pipeline.py --seed 7 synth --preset mini-like --out data/mini
    python run_pipeline.py --seed 7 loocv --data data/mini --preset mini_rgbd_like --out reports/loocv.csv

Exit status: 0 on success, 1 on a data / protocol problem, 2 on bad usage
or an invalid configuration.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import pandas as pd
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from pipeline import __version__
from pipeline.configurations import (
    ATTENTION_VARIANT,
    BIN_C,
    C_GRID,
    CHECKPOINT_FORMAT_VERSION,
    CONF_THRESHOLD,
    CUTOFF_HZ,
    DEFAULT_PRESET,
    DEFAULT_SEED,
    FEATURES_FORMAT_VERSION,
    LABELS,
    LOG_FILE,
    N_FFT,
    REF_FPS,
    REPORT_FORMAT_VERSION,
    SEQUENCE_FORMAT_VERSION,
    WORKERS,
)
from pipeline.errors import FreqGcnError
from pipeline.logs import setup_logging
from pipeline.storage import DataStorage

logger = logging.getLogger(__name__)

VERSION_TEXT = (
    f"freqgcn {__version__} (sequence format {SEQUENCE_FORMAT_VERSION}, "
    f"features format {FEATURES_FORMAT_VERSION}, checkpoint format {CHECKPOINT_FORMAT_VERSION}, "
    f"report format {REPORT_FORMAT_VERSION})"
)


class RunConfig(BaseModel):
    """Everything a command needs, after merging defaults, config file and flags."""
    model_config = ConfigDict(extra="forbid")

    command: str
    input: Optional[str] = None
    output: Optional[str] = None
    preset: str = DEFAULT_PRESET
    seed: int = DEFAULT_SEED
    c: float = Field(default=BIN_C, gt=1)
    cutoff_hz: float = Field(default=CUTOFF_HZ, gt=0)
    n_fft: int = Field(default=N_FFT, ge=2)
    attention_variant: int = Field(default=ATTENTION_VARIANT, ge=1, le=2)
    max_epochs: Optional[int] = Field(default=None, ge=1)
    workers: int = Field(default=WORKERS, ge=1)
    log_file: Optional[str] = LOG_FILE or None


def read_config_file(path: str) -> Dict[str, Any]:
    if not Path(path).exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return {k.lower().replace("-", "_"): v for k, v in dotenv_values(path).items() if v is not None}


def build_run_config(args: argparse.Namespace) -> RunConfig:
    values: Dict[str, Any] = {}
    if args.config:
        values.update(read_config_file(args.config))
    flags = {
        "command": args.command,
        "input": getattr(args, "data", None) or getattr(args, "input", None),
        "output": getattr(args, "out", None),
        "preset": getattr(args, "preset", None),
        "seed": args.seed,
        "c": getattr(args, "c", None),
        "cutoff_hz": getattr(args, "cutoff_hz", None),
        "n_fft": getattr(args, "n_fft", None),
        "attention_variant": getattr(args, "attention_variant", None),
        "max_epochs": getattr(args, "epochs", None),
        "workers": args.workers,
        "log_file": args.log_file,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    return RunConfig(**values)


# ---------------------------------------------------------------- helpers


def _schedule(cfg: RunConfig):
    from pipeline.spectral import build_schedule

    schedule = build_schedule(REF_FPS, cfg.n_fft, cfg.cutoff_hz, cfg.c)
    logger.info(
        f"  [SPECTRAL] schedule: c={schedule.c:g}, {schedule.num_bins} bins over "
        f"{schedule.coverage} coefficients (0-{cfg.cutoff_hz:g} Hz at {schedule.ref_fps:g} fps reference)"
    )
    return schedule


def _train_config(cfg: RunConfig):
    from ml.faigcn import FaigcnConfig
    from ml.training import TrainConfig

    return TrainConfig.from_preset(
        cfg.preset,
        seed=cfg.seed,
        max_epochs=cfg.max_epochs,
        model=FaigcnConfig(attention_variant=cfg.attention_variant),
    )


def _load_poses(storage: DataStorage, cfg: RunConfig):
    from pipeline.pose_ingest import preprocess

    return [preprocess(s) for s in storage.load_dataset(Path(cfg.input))]


def _load_poses_unlabelled(storage: DataStorage, cfg: RunConfig):
    from pipeline.pose_ingest import preprocess

    return [preprocess(s) for s in storage.load_dataset(Path(cfg.input), require_labels=False)]


def _load_features(storage: DataStorage, cfg: RunConfig):
    from pipeline.spectral import extract_dataset

    return extract_dataset(_load_poses(storage, cfg), _schedule(cfg))


# ---------------------------------------------------------------- commands


def cmd_ingest(args, cfg: RunConfig, storage: DataStorage) -> None:
    from pipeline.pose_ingest import load_keypoint_dir, preprocess

    label = None if args.label is None else LABELS.index(args.label)
    seq = load_keypoint_dir(Path(args.keypoints), args.fps, args.subject_id, label)
    seq = preprocess(seq, args.conf_threshold)
    storage.save_sequence(seq, Path(cfg.output))
    logger.info(f"  [CLI] {seq.subject_id}: {seq.num_frames} frames -> {cfg.output}")


def cmd_features(args, cfg: RunConfig, storage: DataStorage) -> None:
    from dataclasses import replace

    from pipeline.pose_ingest import preprocess
    from pipeline.spectral import extract_features, unbinned

    schedule = _schedule(cfg)
    if args.no_binning:
        schedule = unbinned(schedule)
    source = Path(cfg.input)
    files = sorted(source.glob("*.json")) if source.is_dir() else [source]
    out = Path(cfg.output)
    for path in files:
        seq = storage.load_sequence(path)
        if args.fps is not None:
            seq = replace(seq, fps=args.fps)
        features = extract_features(preprocess(seq), schedule)
        target = out / f"{seq.subject_id}.{args.format}" if source.is_dir() else out
        storage.save_features(features, target)
    logger.info(f"  [CLI] features for {len(files)} subject(s) -> {out}")


def cmd_train(args, cfg: RunConfig, storage: DataStorage) -> None:
    from ml.training import save_model, train

    config = _train_config(cfg)
    result = train(_load_features(storage, cfg), config)
    save_model(Path(cfg.output), result, config)
    if args.loss_out:
        curve = pd.DataFrame({"epoch": range(len(result.losses)), "loss": result.losses})
        storage.write_report(Path(args.loss_out), curve)
    logger.info(f"  [CLI] final loss {result.losses[-1]:.6f}; checkpoint -> {cfg.output}")


def cmd_loocv(args, cfg: RunConfig, storage: DataStorage) -> None:
    from evalkit.reports import ReportWriter
    from ml.training import loocv, seed_sweep

    features = _load_features(storage, cfg)
    config = _train_config(cfg)
    writer = ReportWriter(storage)
    if args.seeds:
        sweep = seed_sweep(features, config, args.seeds, cfg.workers)
        writer.seed_sweep(Path(cfg.output), sweep)
        return
    report = loocv(features, config, cfg.workers)
    writer.loocv(Path(cfg.output), report)
    if args.attention_out:
        directory = Path(args.attention_out)
        maps = report.attention_maps()
        writer.attention(directory / "attention_folds.csv", maps)
        writer.attention_summary(directory / "attention_summary.csv", list(maps.values()))


def cmd_ablation(args, cfg: RunConfig, storage: DataStorage) -> None:
    from evalkit.reports import ReportWriter
    from ml.baselines import ablation_table, variant_table

    poses = _load_poses(storage, cfg)
    schedule = _schedule(cfg)
    config = _train_config(cfg)
    writer = ReportWriter(storage)
    writer.table(Path(cfg.output), ablation_table(poses, schedule, config, cfg.workers, include_faigcn=not args.no_faigcn))
    if args.variants_out:
        writer.table(Path(args.variants_out), variant_table(poses, schedule, config, cfg.workers))


def cmd_robustness(args, cfg: RunConfig, storage: DataStorage) -> None:
    from evalkit.reports import ReportWriter
    from evalkit.robustness import NoiseSpec, robustness_sweep

    noise_values = {}
    if args.levels:
        noise_values["levels"] = args.levels
    if args.noise_seeds:
        noise_values["seeds"] = args.noise_seeds
    noise = NoiseSpec(**noise_values)
    raw = storage.load_dataset(Path(cfg.input))
    result = robustness_sweep(raw, noise, _train_config(cfg), _schedule(cfg), cfg.workers)
    ReportWriter(storage).sweep(Path(cfg.output), result)


def cmd_search_c(args, cfg: RunConfig, storage: DataStorage) -> None:
    from ml.baselines import baseline_loocv
    from ml.training import loocv
    from pipeline.spectral import build_schedule, search_c

    poses = _load_poses(storage, cfg)
    config = _train_config(cfg)
    grid = args.grid or C_GRID
    scores = []

    def evaluate(features) -> float:
        if args.method == "faigcn":
            acc = loocv(features, config, cfg.workers).accuracy
        else:
            acc = baseline_loocv(args.method, features, cfg.workers)[1].ac
        scores.append(acc)
        return acc

    best = search_c(poses, grid, evaluate, REF_FPS, cfg.n_fft, cfg.cutoff_hz)
    table = pd.DataFrame({
        "c": sorted(grid),
        "bins": [build_schedule(REF_FPS, cfg.n_fft, cfg.cutoff_hz, c).num_bins for c in sorted(grid)],
        "accuracy": scores,
    })
    storage.write_report(Path(cfg.output), table, {"method": args.method, "best_c": best})
    print(f"best c = {best:g}")


def cmd_synth(args, cfg: RunConfig, storage: DataStorage) -> None:
    from pipeline.synthgen import generate, preset_spec

    overrides = {}
    if args.jitter is not None:
        overrides["jitter_std"] = args.jitter
    spec = preset_spec(args.synth_preset, seed=cfg.seed, hf_noise=args.hf_noise, **overrides)
    storage.save_dataset(generate(spec), Path(cfg.output))


def cmd_attention_export(args, cfg: RunConfig, storage: DataStorage) -> None:
    from evalkit.reports import ReportWriter
    from ml.training import attention_of, load_model
    from pipeline.spectral import extract_dataset

    model, _ = load_model(Path(args.checkpoint))
    poses = _load_poses_unlabelled(storage, cfg)
    features = extract_dataset(poses, _schedule(cfg))
    maps = {f.subject_id: attention_of(model, f) for f in features}
    writer = ReportWriter(storage)
    writer.attention(Path(cfg.output), maps)
    if args.summary_out:
        writer.attention_summary(Path(args.summary_out), list(maps.values()))


HANDLERS = {
    "ingest": cmd_ingest,
    "features": cmd_features,
    "train": cmd_train,
    "loocv": cmd_loocv,
    "ablation": cmd_ablation,
    "robustness": cmd_robustness,
    "search-c": cmd_search_c,
    "synth": cmd_synth,
    "attention-export": cmd_attention_export,
}


# ---------------------------------------------------------------- parser


def _add_spectral_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c", type=float, help=f"bin growth parameter (default {BIN_C})")
    p.add_argument("--cutoff-hz", type=float, help=f"frequency cutoff (default {CUTOFF_HZ})")
    p.add_argument("--n-fft", type=int, help=f"FFT window at the reference fps (default {N_FFT})")


def _add_model_options(p: argparse.ArgumentParser) -> None:
    _add_spectral_options(p)
    p.add_argument("--preset", choices=["mini_rgbd_like", "rvi38_like"], help="training preset")
    p.add_argument("--attention-variant", type=int, choices=[1, 2])
    p.add_argument("--epochs", type=int, help="override the preset's max epochs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freqgcn", description="Frequency-attention GCN movement classifier")
    parser.add_argument("--version", action="version", version=VERSION_TEXT)
    parser.add_argument("--config", help="key=value (dotenv) file of run options")
    parser.add_argument("--seed", type=int, help=f"global seed (default {DEFAULT_SEED})")
    parser.add_argument("--workers", type=int, help="parallel folds / jobs")
    parser.add_argument("--log-file", help="also log (with timestamps) to this file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", help="keypoint JSON directory -> canonical sequence file")
    p.add_argument("--keypoints", required=True, help="directory of per-frame keypoint JSON files")
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--subject-id")
    p.add_argument("--label", choices=LABELS)
    p.add_argument("--conf-threshold", type=float, default=CONF_THRESHOLD)
    p.add_argument("--out", required=True)

    p = sub.add_parser("features", help="sequence file(s) -> spectral features")
    p.add_argument("--input", required=True, help="sequence file or dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--fps", type=float, help="frame rate of the input, if the file's value is wrong")
    p.add_argument("--format", choices=["json", "npz"], default="json")
    p.add_argument("--no-binning", action="store_true")
    _add_spectral_options(p)

    p = sub.add_parser("train", help="train on a dataset directory and save a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-out", help="CSV of the per-epoch loss")
    _add_model_options(p)

    p = sub.add_parser("loocv", help="leave-one-out evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--attention-out", help="directory for per-fold and aggregated attention")
    p.add_argument("--seeds", type=int, nargs="+", help="run once per seed and report mean/min/max")
    _add_model_options(p)

    p = sub.add_parser("ablation", help="baselines and FAIGCN with / without binning")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variants-out", help="also write the attention / binning variant table")
    p.add_argument("--no-faigcn", action="store_true", help="baselines only")
    _add_model_options(p)

    p = sub.add_parser("robustness", help="accuracy under Gaussian pose noise")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--levels", type=float, nargs="+")
    p.add_argument("--noise-seeds", type=int, nargs="+")
    _add_model_options(p)

    p = sub.add_parser("search-c", help="pick the bin growth parameter on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=float, nargs="+")
    p.add_argument(
        "--method",
        choices=["logistic_regression", "lda", "decision_tree", "linear_svm", "faigcn"],
        default="logistic_regression",
    )
    _add_model_options(p)

    p = sub.add_parser("synth", help="generate a synthetic labelled dataset")
    p.add_argument("--preset", dest="synth_preset", choices=["mini-like", "rvi-like"], default="mini-like")
    p.add_argument("--out", required=True)
    p.add_argument("--hf-noise", action="store_true", help="add limb components above the cutoff")
    p.add_argument("--jitter", type=float, help="Gaussian jitter std in pixels")

    p = sub.add_parser("attention-export", help="attention maps of a trained model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--summary-out")
    _add_spectral_options(p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = build_run_config(args)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        print(f"freqgcn: invalid configuration: {where}: {first['msg']}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"freqgcn: {exc}", file=sys.stderr)
        return 2

    setup_logging(args.verbose, cfg.log_file)
    from ml.numerics import configure_torch

    configure_torch()
    storage = DataStorage()
    try:
        HANDLERS[cfg.command](args, cfg, storage)
    except ValidationError as exc:
        logger.error(f"freqgcn {cfg.command}: invalid configuration: {exc.errors()[0]['msg']}")
        return 2
    except (FreqGcnError, OSError) as exc:
        logger.error(f"freqgcn {cfg.command}: {exc}")
        return 1
    return 0
