import numpy as np
import pytest
import torch

from avsal.datamodel import Box
from avsal.models.face import (
    FaceBranch,
    FaceEncoder,
    compose_face_map,
    face_weight_mse,
    gaussian_face_kernels,
    masked_softmax,
)

TINY = dict(channels=(2, 3, 4, 4, 4), convs=(1, 1, 1, 1, 1),
            lstm_hidden=6, mlp_hidden=5)


def _branch(seed=0):
    torch.manual_seed(seed)
    return FaceBranch(**TINY)


def _boxes(n, t, size=32):
    # n identical boxes stacked along the face axis
    return torch.tensor([8.0, 8.0, 12.0, 12.0]).repeat(1, n, t, 1)


def test_encoder_descriptor_shape():
    enc = FaceEncoder((2, 3, 4, 4, 4), (1, 1, 1, 1, 1))
    out = enc(torch.randn(2, 3, 32, 32))
    assert out.shape == (2, 4)


def test_default_encoder_has_13_convs():
    enc = FaceEncoder()
    convs = [m for m in enc.features if isinstance(m, torch.nn.Conv2d)]
    assert len(convs) == 13
    assert enc.out_features == 512


def test_identical_faces_share_weight_equally():
    branch = _branch()
    crop = torch.randn(1, 1, 3, 3, 32, 32)
    crops = crop.expand(1, 2, 3, 3, 32, 32).contiguous()
    present = torch.ones(1, 2, 3, dtype=torch.bool)
    weights, _ = branch(crops, present, _boxes(2, 3), (32, 32))
    assert weights.shape == (1, 3, 2)
    torch.testing.assert_close(weights, torch.full((1, 3, 2), 0.5),
                               rtol=0, atol=0)


def test_single_face_gets_weight_one():
    branch = _branch()
    crops = torch.randn(1, 1, 2, 3, 32, 32)
    present = torch.ones(1, 1, 2, dtype=torch.bool)
    weights, _ = branch(crops, present, _boxes(1, 2), (32, 32))
    torch.testing.assert_close(weights, torch.ones(1, 2, 1), rtol=0, atol=0)


def test_permutation_equivariance():
    branch = _branch()
    crops = torch.randn(1, 3, 2, 3, 32, 32)
    present = torch.ones(1, 3, 2, dtype=torch.bool)
    boxes = _boxes(3, 2)
    w_fwd, _ = branch(crops, present, boxes, (32, 32))
    perm = [2, 0, 1]
    w_perm, _ = branch(crops[:, perm], present[:, perm], boxes[:, perm], (32, 32))
    torch.testing.assert_close(w_perm, w_fwd[:, :, perm], rtol=0, atol=0)


def test_all_absent_frame_gives_zero_weights():
    branch = _branch()
    crops = torch.randn(1, 2, 3, 3, 32, 32)
    present = torch.ones(1, 2, 3, dtype=torch.bool)
    present[0, :, 1] = False  # nobody on frame 1
    weights, face_map = branch(crops, present, _boxes(2, 3), (32, 32))
    assert torch.all(weights[0, 1] == 0.0)
    assert torch.all(face_map[0, 1] == 0.0)
    assert not torch.isnan(weights).any()
    # the other frames still form distributions
    torch.testing.assert_close(weights[0, 0].sum(), torch.tensor(1.0))


def test_absent_frames_mask_crop_content():
    # garbage pixels on absent frames must not change anything
    branch = _branch()
    crops = torch.randn(1, 2, 3, 3, 32, 32)
    present = torch.ones(1, 2, 3, dtype=torch.bool)
    present[0, 1, 0] = False
    noisy = crops.clone()
    noisy[0, 1, 0] = 99.0
    w_a, _ = branch(crops, present, _boxes(2, 3), (32, 32))
    w_b, _ = branch(noisy, present, _boxes(2, 3), (32, 32))
    torch.testing.assert_close(w_a, w_b, rtol=0, atol=0)


def test_masked_softmax_properties(rng):
    for _ in range(50):
        scores = torch.from_numpy(rng.standard_normal((4, 3, 5)))
        present = torch.from_numpy(rng.random((4, 3, 5)) < 0.6)
        out = masked_softmax(scores, present, dim=1)
        assert not torch.isnan(out).any()
        assert torch.all(out >= 0)
        assert torch.all(out[~present] == 0)
        sums = out.sum(dim=1)
        any_present = present.any(dim=1)
        torch.testing.assert_close(sums[any_present],
                                   torch.ones_like(sums[any_present]))
        assert torch.all(sums[~any_present] == 0)


def test_kernels_match_numpy_composition(rng):
    h = w = 24
    boxes_np = [Box(2.0, 3.0, 8.0, 6.0), Box(12.0, 10.0, 6.0, 9.0), None]
    weights_np = [0.5, 0.3, 0.2]
    boxes_t = torch.zeros(1, 3, 1, 4, dtype=torch.float64)
    present = torch.zeros(1, 3, 1, dtype=torch.bool)
    for i, b in enumerate(boxes_np):
        if b is not None:
            boxes_t[0, i, 0] = torch.tensor([b.x, b.y, b.w, b.h])
            present[0, i, 0] = True
    kernels = gaussian_face_kernels(boxes_t, present, h, w)
    weights_t = torch.tensor(weights_np, dtype=torch.float64).reshape(1, 3, 1)
    tensor_map = (weights_t.unsqueeze(-1).unsqueeze(-1) * kernels).sum(dim=1)[0, 0]
    np_map = compose_face_map(weights_np, boxes_np, (h, w))
    np.testing.assert_allclose(tensor_map.numpy(), np_map, atol=1e-10)


def test_kernel_peak_and_sigma():
    box = Box(10.0, 6.0, 8.0, 4.0)
    m = compose_face_map([1.0], [box], (32, 32))
    cy, cx = 8, 14  # box center
    assert m[cy, cx] == pytest.approx(1.0)
    # one sigma along x is w/2 = 4 pixels
    assert m[cy, cx + 4] == pytest.approx(np.exp(-0.5), rel=1e-6)
    # one sigma along y is h/2 = 2 pixels
    assert m[cy + 2, cx] == pytest.approx(np.exp(-0.5), rel=1e-6)


def test_composition_is_linear():
    boxes = [Box(2.0, 2.0, 8.0, 8.0), Box(14.0, 14.0, 6.0, 6.0)]
    a = compose_face_map([0.7, 0.0], boxes, (28, 28))
    b = compose_face_map([0.0, 0.3], boxes, (28, 28))
    ab = compose_face_map([0.7, 0.3], boxes, (28, 28))
    np.testing.assert_allclose(ab, a + b, atol=1e-12)


def test_kernels_carry_no_grad():
    boxes = torch.rand(1, 2, 3, 4, requires_grad=True) * 10 + 1
    kernels = gaussian_face_kernels(boxes, torch.ones(1, 2, 3, dtype=torch.bool),
                                    32, 32)
    assert not kernels.requires_grad


def test_face_weight_mse_hand_values():
    pred = torch.tensor([[[1.0, 0.0]]])
    gt = torch.tensor([[[0.0, 1.0]]])
    sup = torch.tensor([[True]])
    loss, n = face_weight_mse(pred, gt, sup)
    assert n == 1
    assert loss.item() == pytest.approx(1.0)

    pred = torch.tensor([[[0.75, 0.25]]])
    gt = torch.tensor([[[0.5, 0.5]]])
    loss, _ = face_weight_mse(pred, gt, sup)
    assert loss.item() == pytest.approx(0.0625)


def test_face_weight_mse_masks_unsupervised():
    pred = torch.tensor([[[1.0, 0.0], [1.0, 0.0]]])
    gt = torch.tensor([[[0.0, 1.0], [1.0, 0.0]]])
    sup = torch.tensor([[False, True]])
    loss, n = face_weight_mse(pred, gt, sup)
    assert n == 1
    assert loss.item() == 0.0  # only the matching frame is supervised

    none_loss, none_n = face_weight_mse(pred, gt, torch.tensor([[False, False]]))
    assert none_n == 0
    assert none_loss.item() == 0.0
