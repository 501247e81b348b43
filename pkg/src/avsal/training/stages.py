"""The staged training state machine.

Stage order and semantics:

1. pretrain_visual      visual branch + a throwaway readout head, KL loss
2. pretrain_face        face branch alone, weight-MSE loss
3. pretrain_audio_joint audio + visual + fusion with the face path zeroed,
                        KL loss; starts from the pretrain_visual checkpoint
4. joint                everything, KL loss; starts from the
                        pretrain_audio_joint checkpoint plus the face
                        branch weights from pretrain_face

Later stages refuse to run without their prerequisite checkpoints. Every
run writes a checkpoint and a `step,loss` curve CSV and is bitwise
reproducible for a fixed seed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..ingest.archive import ArchiveClip, ClipArchive
from ..models.face import face_weight_mse
from ..models.net import GRID_STRIDE, ClipBatch, ModelConfig, SaliencyNet, build_clip_batch
from .checkpoint import Checkpoint, check_version, load_checkpoint, load_into, save_checkpoint
from .config import ConfigError, TrainConfig
from .losses import kl_divergence

HEAD_PREFIX = "pretrain_head."


class VisualReadout(nn.Module):
    """Throwaway saliency head for visual pretraining: 1x1 conv on the
    visual features, x8 bilinear upsample, spatial softmax. Discarded
    before later stages."""

    def __init__(self, in_channels: int, upsample: int = GRID_STRIDE):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, 1, 1)
        self.upsample = upsample

    def forward(self, fv: torch.Tensor) -> torch.Tensor:
        logits = self.conv(fv)
        if self.upsample != 1:
            logits = F.interpolate(logits, scale_factor=self.upsample,
                                   mode="bilinear", align_corners=False)
        bt, _, h, w = logits.shape
        return torch.softmax(logits.reshape(bt, h * w), dim=1).reshape(bt, h, w)


@dataclass
class TrainResult:
    stage: str
    steps: int
    final_loss: float
    loss_curve: list[float]
    checkpoint_path: Path
    curve_path: Path


def model_config_for_stage(cfg: TrainConfig) -> ModelConfig:
    """Branch enablement per stage; widths and resolution from config."""
    enable_audio = cfg.stage in ("pretrain_audio_joint", "joint")
    enable_face = cfg.stage == "joint"
    return ModelConfig(
        input_resolution=cfg.input_resolution,
        width_divisor=cfg.width_divisor,
        enable_audio=enable_audio,
        enable_face=enable_face,
    )


def _load_asset(net: SaliencyNet, path: Optional[str], prefix: str,
                required: bool, what: str) -> None:
    if path is None:
        if required:
            raise ConfigError(
                f"require_pretrained is set but no {what} asset was configured")
        return
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} asset file not found: {p}")
    ckpt = load_checkpoint(p)
    remapped = Checkpoint(
        model_version=ckpt.model_version,
        stage=ckpt.stage,
        config=ckpt.config,
        tensors={prefix + name: arr for name, arr in ckpt.tensors.items()},
    )
    load_into(net, remapped, include=(prefix,))


def apply_assets(net: SaliencyNet, cfg: TrainConfig) -> None:
    """Initialize sub-networks from external weight assets when given.

    An asset file is a checkpoint whose tensor names are relative to the
    target sub-module (e.g. ``features.0.weight`` for the flow stack).
    With require_pretrained set, a missing flow asset is a configuration
    error; configured-but-absent files always are.
    """
    _load_asset(net, cfg.rgb_asset, "visual.appearance.", False, "RGB")
    _load_asset(net, cfg.flow_asset, "visual.motion.", cfg.require_pretrained, "flow")
    _load_asset(net, cfg.face_asset, "face.encoder.", False, "face CNN")


def _load_prerequisites(net: SaliencyNet, cfg: TrainConfig,
                        model_version: str) -> None:
    if cfg.stage == "pretrain_audio_joint":
        if cfg.init_checkpoint is None:
            raise ConfigError(
                "stage pretrain_audio_joint requires init_checkpoint "
                "(the pretrain_visual checkpoint)")
        ckpt = load_checkpoint(cfg.init_checkpoint)
        check_version(ckpt, model_version, cfg.init_checkpoint)
        load_into(net, ckpt, include=("visual.",))
    elif cfg.stage == "joint":
        missing = [name for name, val in
                   (("init_checkpoint", cfg.init_checkpoint),
                    ("face_checkpoint", cfg.face_checkpoint)) if val is None]
        if missing:
            raise ConfigError(
                "stage joint requires all branch checkpoints; missing: "
                + ", ".join(missing))
        ckpt = load_checkpoint(cfg.init_checkpoint)
        check_version(ckpt, model_version, cfg.init_checkpoint)
        load_into(net, ckpt, include=("visual.", "audio.", "fusion."))
        face_ckpt = load_checkpoint(cfg.face_checkpoint)
        check_version(face_ckpt, model_version, cfg.face_checkpoint)
        load_into(net, face_ckpt, include=("face.",))


def _trainable_parameters(net: SaliencyNet, head: Optional[VisualReadout],
                          stage: str) -> list[torch.nn.Parameter]:
    if stage == "pretrain_visual":
        return list(net.visual.parameters()) + list(head.parameters())
    if stage == "pretrain_face":
        return list(net.face.parameters())
    if stage == "pretrain_audio_joint":
        return (list(net.visual.parameters()) + list(net.audio.parameters())
                + list(net.fusion.parameters()))
    return list(net.parameters())


def stage_loss(net: SaliencyNet, head: Optional[VisualReadout],
               batch: ClipBatch, stage: str) -> torch.Tensor:
    if stage == "pretrain_visual":
        b, t = batch.frames.shape[:2]
        res = batch.frames.shape[-1]
        fv = net.visual(batch.frames).reshape(b * t, -1, res // GRID_STRIDE,
                                              res // GRID_STRIDE)
        sal = head(fv).reshape(b, t, res, res)
        return kl_divergence(sal, batch.gt_density)
    if stage == "pretrain_face":
        states = net.face.face_states(batch.crops, batch.present)
        weights = net.face.attention_weights(states, batch.present).transpose(1, 2)
        loss, _ = face_weight_mse(weights, batch.gt_weights, batch.supervised)
        return loss
    out = net(batch)
    return kl_divergence(out.saliency, batch.gt_density)


def _batch_order(rng: np.random.Generator, n_clips: int, batch_size: int):
    """Endless deterministic stream of clip indices: shuffled epochs."""
    while True:
        for i in rng.permutation(n_clips):
            yield int(i)


def collect_state(net: SaliencyNet, head: Optional[VisualReadout]) -> dict:
    tensors = dict(net.state_dict())
    if head is not None:
        tensors.update({HEAD_PREFIX + k: v for k, v in head.state_dict().items()})
    return tensors


def train_stage(cfg: TrainConfig,
                clips: Optional[list[ArchiveClip]] = None) -> TrainResult:
    """Run one training stage to completion and write its artifacts."""
    if clips is None:
        clips = ClipArchive(cfg.archive).load_all()
    if not clips:
        raise ConfigError(f"archive {cfg.archive!r} contains no clips")

    model_cfg = model_config_for_stage(cfg)
    net = SaliencyNet.build(model_cfg, seed=cfg.seed)
    apply_assets(net, cfg)
    _load_prerequisites(net, cfg, model_cfg.version_string())

    head = None
    if cfg.stage == "pretrain_visual":
        head = VisualReadout(model_cfg.visual_hidden)
        head.apply(_init_head)

    params = _trainable_parameters(net, head, cfg.stage)
    opt = torch.optim.Adam(params, lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))

    rng = np.random.default_rng(cfg.seed)
    order = _batch_order(rng, len(clips), cfg.batch_size)
    curve: list[float] = []

    for step in range(1, cfg.max_steps + 1):
        if cfg.lr_decay_every is not None:
            lr = cfg.lr * (cfg.lr_decay_factor ** ((step - 1) // cfg.lr_decay_every))
            for group in opt.param_groups:
                group["lr"] = lr
        picked = [clips[next(order)] for _ in range(cfg.batch_size)]
        batch = build_clip_batch(picked, model_cfg)
        loss = stage_loss(net, head, batch, cfg.stage)
        opt.zero_grad()
        loss.backward()
        opt.step()
        curve.append(float(loss.detach()))
        if (cfg.target_loss is not None and step >= cfg.min_steps
                and curve[-1] <= cfg.target_loss):
            break

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / f"{cfg.stage}.ckpt"
    save_checkpoint(ckpt_path, collect_state(net, head),
                    model_version=model_cfg.version_string(),
                    stage=cfg.stage, config=cfg.to_dict())
    curve_path = out_dir / f"{cfg.stage}_loss.csv"
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for i, value in enumerate(curve, start=1):
            writer.writerow([i, f"{value:.8f}"])

    return TrainResult(
        stage=cfg.stage,
        steps=len(curve),
        final_loss=curve[-1],
        loss_curve=curve,
        checkpoint_path=ckpt_path,
        curve_path=curve_path,
    )


def _init_head(module: nn.Module) -> None:
    if isinstance(module, nn.Conv2d):
        nn.init.kaiming_normal_(module.weight, nonlinearity="relu")
        nn.init.zeros_(module.bias)


@dataclass
class ClipPrediction:
    video_id: str
    clip_index: int
    frame_offset: int
    saliency: np.ndarray       # (T, H, W) float32 distributions
    face_weights: np.ndarray   # (T, N)
    face_ids: list[Optional[int]]


def load_model(ckpt_path: str | Path, resolution: Optional[int] = None,
               ) -> tuple[SaliencyNet, ModelConfig]:
    """Rebuild the network a checkpoint was trained with.

    ``resolution`` overrides the stored input resolution (the convolution
    stacks are size-agnostic); widths always come from the checkpoint, and
    a version mismatch against them is an error naming both strings.
    """
    ckpt = load_checkpoint(ckpt_path)
    stored = ckpt.config or {}
    model_cfg = ModelConfig(
        input_resolution=resolution or stored.get("input_resolution", 256),
        width_divisor=stored.get("width_divisor", 1),
        enable_audio=True,
        enable_face=True,
    )
    check_version(ckpt, model_cfg.version_string(), ckpt_path)
    net = SaliencyNet(model_cfg)
    load_into(net, ckpt)
    net.eval()
    return net, model_cfg


def predict_clips(net: SaliencyNet, clips: list[ArchiveClip],
                  batch_size: int = 2) -> list[ClipPrediction]:
    """Deterministic inference over archive clips."""
    out = []
    with torch.no_grad():
        for start in range(0, len(clips), batch_size):
            chunk = clips[start:start + batch_size]
            batch = build_clip_batch(chunk, net.config)
            result = net(batch)
            for i, clip in enumerate(chunk):
                n = len(clip.sample.face_tracks)
                out.append(ClipPrediction(
                    video_id=clip.video_id,
                    clip_index=clip.clip_index,
                    frame_offset=clip.frame_offset,
                    saliency=result.saliency[i].numpy().astype(np.float32),
                    face_weights=result.face_weights[i, :, :n].numpy(),
                    face_ids=batch.face_ids[i][:n],
                ))
    return out
