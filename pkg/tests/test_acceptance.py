"""Acceptance suite: ten end-to-end behavioral guarantees.

Each test derives its expected values first — from independent oracle
implementations (tests/oracles.py), closed-form hand calculations, or the
scripted synthetic ground truth — and only then runs the package code.
One summary line is printed per criterion (run pytest with -s to see
them).
"""
import math
import time

import numpy as np
import pytest
import torch

from avsal.datamodel import Box, FixationPoint
from avsal.evaluation.analysis import dispersion, entropy_bits, transition_times, turn_events
from avsal.evaluation.metrics import auc_judd, cc, kl_div, nss
from avsal.ingest.audio import (
    HOP_LENGTH,
    LOG_FLOOR,
    SAMPLE_RATE,
    WINDOW_COLUMNS,
    clip_audio_windows,
    frame_audio_window,
    logmel_spectrogram,
    window_columns,
)
from avsal.models.audio import AudioBranch, stack_spectrograms
from avsal.models.face import compose_face_map, gaussian_face_kernels, masked_softmax
from avsal.models.fusion import FusionModule
from avsal.models.net import ClipBatch, ModelConfig, SaliencyNet, build_clip_batch
from avsal.models.visual import VisualBranch
from avsal.synthetic import SyntheticSpec, make_synthetic_archive
from avsal.evaluation.analysis import concat_video
from avsal.training.checkpoint import load_checkpoint, load_into, save_checkpoint
from avsal.training.config import TrainConfig
from avsal.training.losses import kl_divergence
from avsal.training.stages import (
    VisualReadout,
    collect_state,
    load_model,
    model_config_for_stage,
    predict_clips,
    train_stage,
)
from oracles import (
    finite_diff_grads,
    grad_rel_error,
    oracle_auc_judd,
    oracle_cc,
    oracle_kl,
    oracle_mel_bin,
    oracle_nss,
)


def _report(n: int, message: str) -> None:
    print(f"\n[criterion {n:2d}] PASS — {message}")


# ---------------------------------------------------------------------------
# Criterion 1: the four evaluation metrics agree with independent
# loop-based oracle implementations over randomized inputs.
# ---------------------------------------------------------------------------

def test_criterion_1_metric_oracle_equivalence():
    start = time.monotonic()
    rng = np.random.default_rng(20260823)
    checked = 0
    for trial in range(200):
        h = w = 32
        if trial % 10 == 0:
            sal = np.full((h, w), 0.37)          # constant map
        elif trial % 10 == 5:
            sal = rng.integers(0, 4, (h, w)) / 3.0  # heavy value ties
        else:
            sal = rng.random((h, w))
        n_fix = int(rng.integers(0, 9))
        pts = [(float(rng.integers(-2, w + 2)), float(rng.integers(-2, h + 2)))
               for _ in range(n_fix)]
        fixations = [FixationPoint(x, y) for x, y in pts]

        gt = rng.random((h, w))
        gt /= gt.sum()
        dist = sal / sal.sum()

        # oracle values first
        o_nss = oracle_nss(sal.tolist(), pts)
        o_auc = oracle_auc_judd(sal.tolist(), pts)
        o_cc = oracle_cc(sal.tolist(), gt.tolist())
        o_kl = oracle_kl(dist.tolist(), gt.tolist())

        g_nss = nss(sal, fixations)
        g_auc = auc_judd(sal, fixations)
        g_cc = cc(sal, gt)
        g_kl = kl_div(dist, gt)

        for got, want in ((g_nss, o_nss), (g_auc, o_auc)):
            if want is None:
                assert got is None
            else:
                assert got == pytest.approx(want, abs=1e-10)
        assert g_cc == pytest.approx(o_cc, abs=1e-10)
        assert g_kl == pytest.approx(o_kl, abs=1e-10)
        checked += 1

    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    _report(1, f"NSS/CC/AUC/KL match loop oracles on {checked} random maps "
               f"within 1e-10 ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# Criterion 2: KL loss reproduces hand-computed values and its
# definitional properties (clamp, 0*log0, frame averaging).
# ---------------------------------------------------------------------------

def test_criterion_2_kl_hand_values():
    # hand value 1: G is a delta on a 4x4 grid, S uniform ->
    # KL = 1 * ln(1 / (1/16)) = ln 16 = 2.772588722239781
    gt = torch.zeros(4, 4, dtype=torch.float64)
    gt[2, 1] = 1.0
    uniform = torch.full((4, 4), 1 / 16, dtype=torch.float64)
    assert kl_divergence(uniform, gt).item() == pytest.approx(math.log(16.0), abs=1e-9)

    # hand value 2: G uniform on 2x2, S = [0.7, 0.1, 0.1, 0.1] ->
    # 0.25*ln(0.25/0.7) + 3*0.25*ln(0.25/0.1) = 0.429824...
    hand = 0.25 * math.log(0.25 / 0.7) + 0.75 * math.log(0.25 / 0.1)
    gt2 = torch.full((2, 2), 0.25, dtype=torch.float64)
    s2 = torch.tensor([[0.7, 0.1], [0.1, 0.1]], dtype=torch.float64)
    assert kl_divergence(s2, gt2).item() == pytest.approx(hand, abs=1e-4)
    assert kl_divergence(s2, gt2).item() == pytest.approx(0.4298, abs=1e-4)

    # 0 * log 0: gt zeros contribute nothing even where S is tiny
    gt3 = torch.tensor([[1.0, 0.0], [0.0, 0.0]], dtype=torch.float64)
    s3 = torch.tensor([[1.0, 0.0], [0.0, 0.0]], dtype=torch.float64)
    self_kl = kl_divergence(s3, gt3).item()
    assert math.isfinite(self_kl) and abs(self_kl) < 1e-5

    # frame averaging: a (B, T) batch of the delta case means to the same
    batch_s = uniform.expand(3, 2, 4, 4)
    batch_g = gt.expand(3, 2, 4, 4)
    assert kl_divergence(batch_s, batch_g).item() == pytest.approx(math.log(16.0), abs=1e-9)

    _report(2, "KL loss matches ln16 (delta vs uniform) and 0.4298 hand value")


# ---------------------------------------------------------------------------
# Criterion 3: Gaussian face-map composition is exact and linear, and
# the masked cross-face softmax is safe on every presence pattern.
# ---------------------------------------------------------------------------

def test_criterion_3_face_composition_and_masked_softmax():
    rng = np.random.default_rng(7)
    h = w = 40
    for _ in range(25):
        n = int(rng.integers(1, 5))
        boxes, weights = [], []
        for i in range(n):
            if rng.random() < 0.2:
                boxes.append(None)
            else:
                bw, bh = rng.uniform(4, 14, 2)
                boxes.append(Box(rng.uniform(0, w - bw), rng.uniform(0, h - bh), bw, bh))
            weights.append(float(rng.random()))

        # reference map via the numpy path, then the tensor path
        ref = compose_face_map(weights, boxes, (h, w))
        boxes_t = torch.zeros(1, n, 1, 4, dtype=torch.float64)
        present = torch.zeros(1, n, 1, dtype=torch.bool)
        for i, b in enumerate(boxes):
            if b is not None:
                boxes_t[0, i, 0] = torch.tensor([b.x, b.y, b.w, b.h])
                present[0, i, 0] = True
        kern = gaussian_face_kernels(boxes_t, present, h, w)
        wt = torch.tensor(weights, dtype=torch.float64).reshape(1, n, 1, 1, 1)
        got = (wt * kern).sum(dim=1)[0, 0].numpy()
        np.testing.assert_allclose(got, ref, atol=1e-10)

        # linearity in the weights
        half = compose_face_map([v / 2 for v in weights], boxes, (h, w))
        np.testing.assert_allclose(ref, 2.0 * half, atol=1e-10)

    # peak-1 and sigma = half the box size
    box = Box(12.0, 8.0, 10.0, 6.0)
    m = compose_face_map([1.0], [box], (h, w))
    assert m[11, 17] == pytest.approx(1.0)
    assert m[11, 22] == pytest.approx(math.exp(-0.5), rel=1e-9)   # +sigma_x = 5
    assert m[14, 17] == pytest.approx(math.exp(-0.5), rel=1e-9)   # +sigma_y = 3

    # masked softmax battery: 1000 random presence patterns
    trng = torch.Generator().manual_seed(99)
    for _ in range(1000):
        scores = torch.randn(2, 4, 3, generator=trng) * 10
        present = torch.rand(2, 4, 3, generator=trng) < 0.5
        out = masked_softmax(scores, present, dim=1)
        assert not torch.isnan(out).any()
        assert torch.all(out >= 0)
        assert torch.all(out[~present] == 0)
        sums = out.sum(dim=1)
        some = present.any(dim=1)
        assert torch.all((sums[some] - 1.0).abs() < 1e-6)
        assert torch.all(sums[~some] == 0)

    _report(3, "face-map composition matches the reference within 1e-10; "
               "masked softmax safe on 1000 presence patterns")


# ---------------------------------------------------------------------------
# Criterion 4: the canonical-profile network accepts every (T, N)
# combination, including faces appearing mid-clip, and always emits
# per-frame spatial distributions and per-frame face distributions.
# ---------------------------------------------------------------------------

def _manual_batch(t_frames: int, n_faces: int, config: ModelConfig,
                  absent_until: int = 0, seed: int = 0) -> ClipBatch:
    g = torch.Generator().manual_seed(seed)
    res = config.input_resolution
    crop = config.crop_size
    present = torch.ones(1, n_faces, t_frames, dtype=torch.bool)
    if n_faces > 0 and absent_until > 0:
        present[0, 0, :absent_until] = False
    boxes = torch.zeros(1, n_faces, t_frames, 4)
    for i in range(n_faces):
        boxes[0, i, :] = torch.tensor(
            [10.0 + 30.0 * i, 40.0, 25.0, 25.0]) * (res / 256.0)
    return ClipBatch(
        frames=torch.randn(1, t_frames, 3, res, res, generator=g) * 0.2,
        audio=torch.rand(1, t_frames, res, res, generator=g),
        crops=torch.rand(1, n_faces, t_frames, 3, crop, crop, generator=g),
        present=present,
        boxes=boxes,
        gt_density=torch.zeros(1, t_frames, res, res),
        gt_weights=torch.zeros(1, t_frames, n_faces),
        supervised=torch.zeros(1, t_frames, dtype=torch.bool),
        face_ids=[list(range(n_faces))],
    )


def test_criterion_4_canonical_shape_suite():
    start = time.monotonic()
    config = ModelConfig.canonical()
    net = SaliencyNet.build(config, seed=0)
    net.eval()

    cases = [(t, n) for t in (1, 5, 12) for n in (0, 1, 2, 5)]
    with torch.no_grad():
        for t_frames, n_faces in cases:
            out = net(_manual_batch(t_frames, n_faces, config))
            assert out.saliency.shape == (1, t_frames, 256, 256)
            sums = out.saliency.double().sum(dim=(-2, -1))
            assert torch.all((sums - 1.0).abs() < 1e-5), (t_frames, n_faces)
            assert torch.all(out.saliency >= 0)
            assert out.face_weights.shape == (1, t_frames, n_faces)
            if n_faces > 0:
                wsums = out.face_weights.double().sum(dim=-1)
                assert torch.all((wsums - 1.0).abs() < 1e-5)
                assert out.face_map.shape == (1, t_frames, 256, 256)
            else:
                assert out.face_map is None

        # a face that appears mid-clip: zero weight while absent, then a
        # proper distribution over both faces
        t_frames, absent_until = 5, 3
        out = net(_manual_batch(t_frames, 2, config, absent_until=absent_until))
        w = out.face_weights[0]
        assert torch.all(w[:absent_until, 0] == 0.0)
        torch.testing.assert_close(w[:absent_until, 1],
                                   torch.ones(absent_until), rtol=0, atol=1e-6)
        late = w[absent_until:]
        assert torch.all(late > 0)
        assert torch.all((late.double().sum(dim=-1) - 1.0).abs() < 1e-5)

    elapsed = time.monotonic() - start
    assert elapsed < 600.0
    n_params = sum(p.numel() for p in net.parameters())
    _report(4, f"canonical net ({n_params / 1e6:.2f}M params) handled "
               f"T in {{1,5,12}} x N in {{0,1,2,5}} + mid-clip appearance "
               f"in {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# Criterion 5: analytic gradients of the KL training loss match central
# finite differences through each branch's miniature.
# ---------------------------------------------------------------------------

def _finite_diff_check(params, loss_fn) -> float:
    for p in params:
        if p.grad is not None:
            p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = [p.grad.detach().clone() if p.grad is not None
                else torch.zeros_like(p) for p in params]
    numeric = finite_diff_grads(lambda: loss_fn().item(), params)
    return grad_rel_error(analytic, numeric)


def test_criterion_5_gradient_checks():
    start = time.monotonic()
    torch.manual_seed(0)

    # visual miniature: full branch + the pretraining readout, KL loss
    visual = VisualBranch(rgb_channels=(2, 2, 2, 2), rgb_convs=(1, 1, 1, 1),
                          flow_channels=(2, 2, 2, 2), hidden_channels=2).double()
    head = VisualReadout(2).double()
    frames = torch.randn(1, 2, 3, 16, 16, dtype=torch.float64)
    gt_v = torch.rand(1, 2, 16, 16, dtype=torch.float64)
    gt_v /= gt_v.sum(dim=(-2, -1), keepdim=True)

    def visual_loss():
        fv = visual(frames).reshape(2, 2, 2, 2)
        sal = head(fv).reshape(1, 2, 16, 16)
        return kl_divergence(sal, gt_v)

    params_v = list(visual.parameters()) + list(head.parameters())
    err_v = _finite_diff_check(params_v, visual_loss)
    assert err_v < 1e-4, f"visual gradient error {err_v}"

    # audio miniature: 4-image stacks through the 3-D CNN + 1x1 readout
    audio = AudioBranch((2, 2, 2, 2), depth=4).double()
    readout = torch.nn.Conv2d(2, 1, 1).double()
    windows = torch.rand(1, 2, 16, 16, dtype=torch.float64)
    gt_a = torch.rand(1, 2, 2, 2, dtype=torch.float64)
    gt_a /= gt_a.sum(dim=(-2, -1), keepdim=True)

    def audio_loss():
        fa = audio(windows).flatten(0, 1)
        logits = readout(fa).reshape(1, 2, -1)
        sal = torch.softmax(logits, dim=-1).reshape(1, 2, 2, 2)
        return kl_divergence(sal, gt_a)

    params_a = list(audio.parameters()) + list(readout.parameters())
    err_a = _finite_diff_check(params_a, audio_loss)
    assert err_a < 1e-4, f"audio gradient error {err_a}"

    # fusion miniature: all three inputs, spatial-softmax readout
    fusion = FusionModule(visual_channels=3, audio_channels=2, face_channels=1,
                          hidden_channels=3, map_channels=2, upsample=1).double()
    fv = torch.randn(2, 3, 8, 8, dtype=torch.float64)
    fa = torch.randn(2, 2, 8, 8, dtype=torch.float64)
    fm = torch.rand(2, 1, 8, 8, dtype=torch.float64)
    gt_f = torch.rand(2, 8, 8, dtype=torch.float64)
    gt_f /= gt_f.sum(dim=(-2, -1), keepdim=True)

    def fusion_loss():
        return kl_divergence(fusion(fv, fa, fm), gt_f)

    params_f = list(fusion.parameters())
    err_f = _finite_diff_check(params_f, fusion_loss)
    assert err_f < 1e-4, f"fusion gradient error {err_f}"

    elapsed = time.monotonic() - start
    assert elapsed < 300.0
    _report(5, f"finite-difference gradient checks: visual {err_v:.2e}, "
               f"audio {err_a:.2e}, fusion {err_f:.2e} ({elapsed:.0f}s)")


# ---------------------------------------------------------------------------
# Criterion 6: the staged pipeline overfits one scripted video at desk
# scale — the joint stage reaches KL <= 0.1 with a decreasing loss curve.
# ---------------------------------------------------------------------------

DESK_STAGE = dict(input_resolution=64, width_divisor=8, batch_size=2)


def test_criterion_6_staged_overfit(synth_archive, tmp_path):
    start = time.monotonic()
    root, _ = synth_archive
    out = tmp_path / "overfit"

    visual = train_stage(TrainConfig(
        stage="pretrain_visual", archive=str(root), out_dir=str(out),
        max_steps=60, **DESK_STAGE))
    face = train_stage(TrainConfig(
        stage="pretrain_face", archive=str(root), out_dir=str(out),
        max_steps=60, **DESK_STAGE))
    audio_joint = train_stage(TrainConfig(
        stage="pretrain_audio_joint", archive=str(root), out_dir=str(out),
        max_steps=60, init_checkpoint=str(visual.checkpoint_path), **DESK_STAGE))
    joint = train_stage(TrainConfig(
        stage="joint", archive=str(root), out_dir=str(out),
        max_steps=2000, target_loss=0.1, min_steps=200,
        init_checkpoint=str(audio_joint.checkpoint_path),
        face_checkpoint=str(face.checkpoint_path), **DESK_STAGE))

    elapsed = time.monotonic() - start
    assert joint.final_loss <= 0.1, f"joint KL stuck at {joint.final_loss:.4f}"
    curve = joint.loss_curve
    assert len(curve) >= 200
    first, last = np.mean(curve[:100]), np.mean(curve[-100:])
    assert last < first, f"loss not decreasing: {first:.4f} -> {last:.4f}"
    assert elapsed < 1800.0
    _report(6, f"staged overfit: joint KL {joint.final_loss:.4f} after "
               f"{joint.steps} steps (curve {first:.3f} -> {last:.3f}, "
               f"{elapsed:.0f}s total)")


# ---------------------------------------------------------------------------
# Criterion 7: face pretraining recovers the scripted attention weights
# on a scene with a fixed attended face.
# ---------------------------------------------------------------------------

def test_criterion_7_face_weight_recovery(tmp_path):
    start = time.monotonic()
    # scripted ground truth: face 1 always attended with share 0.75, so
    # every frame's weights are exactly [0.25, 0.75]
    spec = SyntheticSpec(n_videos=1, frames_per_video=24, n_faces=2,
                         fixed_attended=1, seed=21)
    root = tmp_path / "archive"
    clips = make_synthetic_archive(root, spec)
    for clip in clips:
        np.testing.assert_array_equal(clip.face_weights,
                                      np.tile([0.25, 0.75], (12, 1)))

    result = train_stage(TrainConfig(
        stage="pretrain_face", archive=str(root), out_dir=str(tmp_path / "run"),
        max_steps=1000, target_loss=2e-5, min_steps=20, lr=1e-3, **DESK_STAGE))
    assert result.final_loss < 5e-3

    # verify the trained branch's weights on the training clips
    cfg = TrainConfig(stage="pretrain_face", archive=str(root), **DESK_STAGE)
    mc = model_config_for_stage(cfg)
    net = SaliencyNet.build(mc, seed=0)
    load_into(net, load_checkpoint(result.checkpoint_path), include=("face.",))
    net.eval()
    with torch.no_grad():
        batch = build_clip_batch(clips, mc)
        states = net.face.face_states(batch.crops, batch.present)
        weights = net.face.attention_weights(states, batch.present).transpose(1, 2)
    err = (weights - batch.gt_weights).abs().max().item()
    assert err < 0.05, f"worst weight error {err:.3f}"

    elapsed = time.monotonic() - start
    _report(7, f"face pretraining recovered [0.25, 0.75] within {err:.3f} "
               f"after {result.steps} steps ({elapsed:.0f}s)")


# ---------------------------------------------------------------------------
# Criterion 8: the spectrogram pipeline — mel localization of a pure
# tone, exact silence handling, and the 20-column frame window.
# ---------------------------------------------------------------------------

def test_criterion_8_spectrogram_pipeline():
    # oracle first: which mel filter should a 440 Hz tone excite most
    expected_bin = oracle_mel_bin(440.0)

    t = np.arange(2 * SAMPLE_RATE) / SAMPLE_RATE
    tone = 0.4 * np.sin(2 * np.pi * 440.0 * t)
    spec = logmel_spectrogram(tone)
    interior = spec[:, 8:-8]
    peak_bins = interior.argmax(axis=0)
    # the modal peak bin is exactly the oracle filter
    counts = np.bincount(peak_bins, minlength=spec.shape[0])
    assert int(counts.argmax()) == expected_bin
    assert np.all(np.abs(peak_bins - expected_bin) <= 1)

    # silence maps to exactly log(1e-6) everywhere
    silence_value = float(np.log(LOG_FLOOR))
    silent = logmel_spectrogram(np.zeros(SAMPLE_RATE))
    assert np.all(silent == silence_value)

    # window extraction: every frame time sees exactly 20 hop columns
    # starting at the first hop center past t - 0.23 s (found here by a
    # plain linear scan, independent of the floor arithmetic inside)
    hop_dur = HOP_LENGTH / SAMPLE_RATE
    rng = np.random.default_rng(4)
    for t_sec in np.concatenate([[0.0, 0.23, 1.0], rng.uniform(0, 30, 50)]):
        cols = window_columns(float(t_sec))
        assert len(cols) == WINDOW_COLUMNS == 20
        k_start = next(k for k in range(-100, 3000) if k * hop_dur > t_sec - 0.23)
        assert list(cols) == list(range(k_start, k_start + 20))
        assert cols[0] * hop_dur > t_sec - 0.23 >= (cols[0] - 1) * hop_dur

    # out-of-range windows fall back to the silence value, and constant
    # windows normalize to zero
    img = frame_audio_window(spec, 1000.0, size=64)
    assert np.all(img == silence_value)
    wins = clip_audio_windows(spec, np.array([0.5, 1.0, 1000.0]), size=64)
    assert wins.shape == (3, 64, 64)
    assert wins.min() >= 0.0 and wins.max() <= 1.0
    assert np.all(wins[2] == 0.0)

    # the 16-image stacking clamps at the clip start
    w = torch.arange(6, dtype=torch.float32).reshape(1, 6, 1, 1)
    stacks = stack_spectrograms(w, depth=16)
    assert torch.all(stacks[0, 0] == 0.0)
    assert stacks.shape[2] == 16

    _report(8, f"440 Hz tone peaks in oracle mel bin {expected_bin}; silence "
               f"is exactly log(1e-6); windows are exactly 20 columns")


# ---------------------------------------------------------------------------
# Criterion 9: analysis statistics — exact entropy of uniform maps,
# dispersion edge cases, and exact recovery of the scripted gaze lag.
# ---------------------------------------------------------------------------

def test_criterion_9_analysis_statistics(tmp_path):
    # uniform 256x256 -> exactly 16 bits (1/65536 is a power of two)
    assert entropy_bits(np.full((256, 256), 1.0 / 65536.0)) == 16.0
    delta = np.zeros((256, 256))
    delta[100, 100] = 1.0
    assert entropy_bits(delta) == 0.0

    # dispersion edge cases
    assert dispersion([]) is None
    assert dispersion([FixationPoint(5, 5)]) is None
    assert dispersion([FixationPoint(9, 9)] * 7) == 0.0
    assert dispersion([FixationPoint(0, 0), FixationPoint(3, 4)]) == 5.0

    # scripted transitions: 36 frames (three 12-frame clips), 8-frame
    # turns, gaze lag 2 -> onsets at frames 8, 16, 24 and 32, each
    # resolved exactly 2 frames later
    spec = SyntheticSpec(n_videos=1, frames_per_video=36, n_faces=2,
                         segment_length=8, gaze_lag=2, seed=13)
    root = tmp_path / "arch"
    clips = make_synthetic_archive(root, spec)
    _, fixations, tracks = concat_video(clips)
    events = turn_events(tracks)
    assert [e[0] for e in events] == [8, 16, 24, 32]
    stats = transition_times(fixations, tracks, events)
    assert stats.times == [2, 2, 2, 2]
    assert stats.unreached == 0
    assert stats.mean == 2.0

    _report(9, "entropy(uniform 256x256) == 16.0 bits exactly; scripted "
               "gaze lag of 2 frames recovered exactly at 4 turn events")


# ---------------------------------------------------------------------------
# Criterion 10: bitwise training determinism and checkpoint round-trip
# fidelity (stored weights reproduce identical predictions).
# ---------------------------------------------------------------------------

def test_criterion_10_determinism_and_round_trip(synth_archive, tmp_path):
    root, clips = synth_archive

    # two identically seeded runs agree bitwise: loss curves and weights
    results = []
    for name in ("a", "b"):
        results.append(train_stage(TrainConfig(
            stage="pretrain_visual", archive=str(root),
            out_dir=str(tmp_path / name), seed=42, max_steps=3, **DESK_STAGE)))
    assert results[0].loss_curve == results[1].loss_curve
    assert (results[0].curve_path.read_text() == results[1].curve_path.read_text())
    t_a = load_checkpoint(results[0].checkpoint_path).tensors
    t_b = load_checkpoint(results[1].checkpoint_path).tensors
    assert set(t_a) == set(t_b)
    for name in t_a:
        assert t_a[name].tobytes() == t_b[name].tobytes(), name

    # round trip: a freshly built net's predictions survive save + load
    config = ModelConfig.desk()
    net = SaliencyNet.build(config, seed=5)
    net.eval()
    before = predict_clips(net, clips, batch_size=2)

    ckpt_path = tmp_path / "round_trip.ckpt"
    save_checkpoint(ckpt_path, collect_state(net, None),
                    model_version=config.version_string(), stage="joint",
                    config={"input_resolution": config.input_resolution,
                            "width_divisor": config.width_divisor})
    net2, _ = load_model(ckpt_path)
    after = predict_clips(net2, clips, batch_size=2)

    assert len(before) == len(after)
    for p_before, p_after in zip(before, after):
        np.testing.assert_array_equal(p_before.saliency, p_after.saliency)
        np.testing.assert_array_equal(p_before.face_weights, p_after.face_weights)

    _report(10, "same-seed runs are bitwise identical; checkpoint round trip "
                "reproduces predictions bit for bit")
