"""Command-line interface: ingest, train, predict, evaluate, analyze.

Every command writes a run manifest (command, config snapshot, seed,
outputs) into its output directory, sufficient to re-run it. Exit codes:
0 success, 2 configuration error, 3 data-validation error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .datamodel import ValidationError
from .ingest import audio as audio_mod
from .ingest.archive import ArchiveClip, ClipArchive, ingest_dataset
from .ingest.video import CLIP_LENGTH, IngestError, decode_video, extract_clips, frames_to_float
from .datamodel import ClipSample
from .evaluation.analysis import analyze_video, concat_video
from .evaluation.report import MetricReport, VideoMetrics, evaluate_clip
from .synthetic import SyntheticSpec, make_synthetic_archive
from .tensorio import TensorIOError, load_tensor, save_map_png, save_tensor
from .training.config import STAGES, ConfigError, TrainConfig
from .training.stages import load_model, predict_clips, train_stage

DATA_ERRORS = (ValidationError, IngestError, TensorIOError)


def write_run_manifest(out_dir: Path, command: str, config: dict, seed: int,
                       outputs: list[str], started: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    snapshot = {k: (str(v) if isinstance(v, Path) else v)
                for k, v in config.items() if not callable(v)}
    doc = {
        "command": command,
        "config": snapshot,
        "seed": seed,
        "version": f"avsal {__version__}",
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "outputs": outputs,
    }
    with open(out_dir / "run_manifest.json", "w") as fh:
        json.dump(doc, fh, indent=1)


def cmd_ingest(args: argparse.Namespace) -> int:
    started = time.time()
    out_dir = Path(args.out)
    if args.synthetic is not None:
        if args.synthetic < 1:
            raise ConfigError("--synthetic needs a positive clip count")
        spec = SyntheticSpec(
            n_videos=1,
            frames_per_video=args.synthetic * CLIP_LENGTH,
            size=args.resolution,
            seed=args.seed,
        )
        clips = make_synthetic_archive(out_dir, spec)
        print(f"wrote {len(clips)} synthetic clips to {out_dir}")
    else:
        if args.dataset is None:
            raise ConfigError("ingest needs a dataset root (or --synthetic N)")
        manifest = ingest_dataset(args.dataset, out_dir, size=args.resolution)
        n = sum(v["num_clips"] for v in manifest["videos"])
        print(f"ingested {len(manifest['videos'])} videos ({n} clips) into {out_dir}")
    write_run_manifest(out_dir, "ingest", vars(args) | {"dataset": str(args.dataset)},
                       args.seed, [str(out_dir / "manifest.json")], started)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    started = time.time()
    overrides = {
        "stage": args.stage,
        "seed": args.seed,
        "archive": args.archive,
        "out_dir": args.out,
        "input_resolution": args.resolution,
    }
    if args.config:
        cfg = TrainConfig.from_file(args.config, overrides)
    else:
        cfg = TrainConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    if not cfg.archive:
        raise ConfigError("no clip archive configured (archive = ... or --archive)")

    result = train_stage(cfg)
    print(f"stage {result.stage}: {result.steps} steps, "
          f"final loss {result.final_loss:.6f}")
    print(f"checkpoint: {result.checkpoint_path}")
    write_run_manifest(Path(cfg.out_dir), "train", cfg.to_dict(), cfg.seed,
                       [str(result.checkpoint_path), str(result.curve_path)], started)
    return 0


def _video_to_clips(path: Path, resolution: int) -> list[ArchiveClip]:
    """Build in-memory clips from a bare video file (no annotations).

    A sidecar `<stem>.wav` is used when present, silence otherwise; the
    ground-truth fields are placeholders (uniform density, no fixations).
    """
    frames_u8, fps = decode_video(path, size=resolution)
    wav = path.with_suffix(".wav")
    if wav.is_file():
        samples, rate = audio_mod.load_wav(wav)
        samples = audio_mod.resample_audio(samples, rate)
    else:
        samples = np.zeros(int(round(frames_u8.shape[0] / fps * audio_mod.SAMPLE_RATE)))
    logmel = audio_mod.logmel_spectrogram(samples)

    uniform = np.full((CLIP_LENGTH, resolution, resolution),
                      1.0 / (resolution * resolution), dtype=np.float32)
    clips = []
    for index, rng in enumerate(extract_clips(frames_u8.shape[0])):
        local = list(rng)
        times = np.array([t / fps for t in local])
        clips.append(ArchiveClip(
            video_id=path.stem,
            clip_index=index,
            frame_offset=local[0],
            fps=fps,
            sample=ClipSample(
                frames=frames_to_float(frames_u8[local]),
                audio_windows=audio_mod.clip_audio_windows(logmel, times, resolution),
                gt_density=uniform,
            ),
            face_weights=np.zeros((CLIP_LENGTH, 0)),
            supervised=np.zeros(CLIP_LENGTH, dtype=bool),
        ))
    if not clips:
        raise ValidationError(f"{path}: shorter than one {CLIP_LENGTH}-frame clip")
    return clips


def cmd_predict(args: argparse.Namespace) -> int:
    started = time.time()
    net, model_cfg = load_model(args.checkpoint, resolution=args.resolution)
    source = Path(args.input)
    if source.is_dir():
        clips = ClipArchive(source).load_all()
    elif source.is_file():
        clips = _video_to_clips(source, model_cfg.input_resolution)
    else:
        raise ValidationError(f"prediction input not found: {source}")

    out_dir = Path(args.out)
    outputs = []
    predictions = predict_clips(net, clips)
    weight_rows = []
    for pred in predictions:
        clip_dir = out_dir / pred.video_id / f"{pred.clip_index:03d}"
        for t in range(pred.saliency.shape[0]):
            stem = clip_dir / f"frame_{t:02d}"
            save_tensor(stem.with_suffix(".avt"), pred.saliency[t])
            save_map_png(stem.with_suffix(".png"), pred.saliency[t])
        outputs.append(str(clip_dir))
        for t in range(pred.face_weights.shape[0]):
            for slot, fid in enumerate(pred.face_ids):
                if fid is None:
                    continue
                weight_rows.append((pred.video_id, pred.frame_offset + t, fid,
                                    float(pred.face_weights[t, slot])))

    weights_path = out_dir / "face_weights.csv"
    weights_path.parent.mkdir(parents=True, exist_ok=True)
    with open(weights_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video", "frame", "face_id", "weight"])
        for row in weight_rows:
            writer.writerow([row[0], row[1], row[2], f"{row[3]:.6f}"])

    n_frames = sum(p.saliency.shape[0] for p in predictions)
    print(f"predicted {n_frames} frames over {len(predictions)} clips -> {out_dir}")
    write_run_manifest(out_dir, "predict",
                       {"checkpoint": str(args.checkpoint), "input": str(source),
                        "resolution": model_cfg.input_resolution},
                       args.seed, outputs + [str(weights_path)], started)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    started = time.time()
    archive = ClipArchive(args.archive)
    pred_root = Path(args.predictions)
    report = MetricReport()
    problems: list[str] = []

    for video_id in archive.video_ids():
        video = VideoMetrics(video_id=video_id)
        n_clips = next(v["num_clips"] for v in archive.manifest["videos"]
                       if v["video_id"] == video_id)
        for clip_index in range(n_clips):
            clip = archive.load(video_id, clip_index)
            clip_dir = pred_root / video_id / f"{clip_index:03d}"
            maps = []
            for t in range(clip.sample.num_frames):
                frame_path = clip_dir / f"frame_{t:02d}.avt"
                if not frame_path.is_file():
                    problems.append(f"{video_id} clip {clip_index} frame {t}: "
                                    f"missing prediction {frame_path}")
                    continue
                maps.append(load_tensor(frame_path))
            if len(maps) != clip.sample.num_frames:
                continue
            evaluate_clip(np.stack(maps), clip, video)
        report.videos.append(video)

    if problems:
        raise ValidationError(
            "predictions do not align with ground truth:\n  " + "\n  ".join(problems))

    out_dir = Path(args.out)
    report.write_csv(out_dir / "metrics.csv")
    table = report.table()
    (out_dir / "metrics.txt").write_text(table + "\n")
    print(table)
    write_run_manifest(out_dir, "evaluate",
                       {"predictions": str(pred_root), "archive": str(args.archive)},
                       args.seed, [str(out_dir / "metrics.csv"),
                                   str(out_dir / "metrics.txt")], started)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    started = time.time()
    archive = ClipArchive(args.archive)
    flow_root = Path(args.flow_maps) if args.flow_maps else None

    results = []
    for video_id in archive.video_ids():
        clips = [archive.load(vid, i) for vid, i in archive.list_clips()
                 if vid == video_id]
        densities, fixations, tracks = concat_video(clips)
        flow = None
        if flow_root is not None:
            flow_path = flow_root / f"{video_id}.avt"
            if flow_path.is_file():
                flow = load_tensor(flow_path)
        results.append(analyze_video(video_id, densities, fixations, tracks, flow))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "analysis.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video", "frames", "entropy_bits", "dispersion_px",
                         "nss_eyes", "nss_nose", "nss_mouth",
                         "transition_mean", "transition_events",
                         "transition_unreached", "contextual_nss"])
        for r in results:
            tr = r.transition
            writer.writerow([
                r.video_id, r.n_frames, _num(r.mean_entropy), _num(r.mean_dispersion),
                _num(r.landmark_nss.get("eyes")), _num(r.landmark_nss.get("nose")),
                _num(r.landmark_nss.get("mouth")), _num(tr.mean), tr.n_events,
                tr.unreached, _num(r.mean_contextual_nss),
            ])

    lines = []
    for r in results:
        tr = r.transition
        lines.append(f"{r.video_id}: entropy {_num(r.mean_entropy)} bits, "
                     f"dispersion {_num(r.mean_dispersion)} px, "
                     f"landmark NSS {({g: round(v, 3) for g, v in r.landmark_nss.items()})}, "
                     f"transition {_num(tr.mean)} frames "
                     f"({tr.n_events} events, {tr.unreached} unreached)"
                     + (f", contextual NSS {_num(r.mean_contextual_nss)}"
                        if r.mean_contextual_nss is not None else ""))
    text = "\n".join(lines)
    (out_dir / "analysis.txt").write_text(text + "\n")
    print(text)
    write_run_manifest(out_dir, "analyze",
                       {"archive": str(args.archive),
                        "flow_maps": str(flow_root) if flow_root else None},
                       args.seed, [str(csv_path), str(out_dir / "analysis.txt")], started)
    return 0


def _num(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avsal",
        description="Audio-visual saliency prediction for multiple-face videos")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a clip archive from a dataset (or synthetic)")
    p.add_argument("dataset", nargs="?", default=None, help="raw dataset root directory")
    p.add_argument("--synthetic", type=int, default=None, metavar="N",
                   help="generate N scripted synthetic clips instead of reading a dataset")
    p.add_argument("--out", required=True, help="archive output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=256)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="run one training stage")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--stage", choices=STAGES, default=None)
    p.add_argument("--archive", default=None, help="clip archive directory")
    p.add_argument("--out", default=None, help="run output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--resolution", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict saliency maps with a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("input", help="clip archive directory or a video file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=None,
                   help="override the checkpoint's input resolution")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against an archive")
    p.add_argument("predictions", help="directory written by `avsal predict`")
    p.add_argument("archive", help="clip archive with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="dataset statistics (entropy, dispersion, transitions)")
    p.add_argument("archive", help="clip archive directory")
    p.add_argument("--out", required=True)
    p.add_argument("--flow-maps", default=None,
                   help="directory of per-video flow-magnitude tensors (<video_id>.avt)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
