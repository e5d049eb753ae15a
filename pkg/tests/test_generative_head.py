import pytest
import torch

from src.common.errors import LayoutMismatchError
from src.models.config import DEFAULT_JOINT_GROUPS, DecoderConfig
from src.models.generative_head import (
    KLConfig,
    MotionDecoder,
    MotionReconstruction,
    decode_motion,
    gaussian_kl,
    loss_kl,
    loss_reconstruction,
    reparameterize,
    sample_noise,
)
from src.models.motion_encoder import LatentGaussian, MotionBatch


def _gaussian(mu, log_var=None) -> LatentGaussian:
    mu = torch.as_tensor(mu, dtype=torch.float64)
    log_var = torch.zeros_like(mu) if log_var is None else torch.as_tensor(log_var, dtype=torch.float64)
    return LatentGaussian(mu=mu, log_var=log_var)


def _zeros(T: int, mask=None) -> MotionBatch:
    mask = torch.ones(1, T, dtype=torch.bool) if mask is None else torch.as_tensor(mask)
    return MotionBatch(
        body=torch.zeros(1, T, 21, 12, dtype=torch.float64),
        root=torch.zeros(1, T, 4, dtype=torch.float64),
        feet=torch.zeros(1, T, 4, dtype=torch.float64),
        mask=mask,
    )


@pytest.fixture
def decoder():
    torch.manual_seed(0)
    config = DecoderConfig(depth=1, heads=2, ffn_width=16, model_width=8, dropout=0.0)
    return MotionDecoder(5, DEFAULT_JOINT_GROUPS, config).double().eval().requires_grad_(False)


class TestReparameterize:

    def test_zero_noise_returns_mean(self):
        g = _gaussian([[0.3, -1.0]], [[0.7, -0.2]])
        sample = reparameterize(g, torch.zeros(1, 2, dtype=torch.float64))
        torch.testing.assert_close(sample.z, g.mu)

    def test_scales_noise_by_std(self):
        g = _gaussian([[0.0]], [[2.0 * torch.log(torch.tensor(3.0)).item()]])
        sample = reparameterize(g, torch.ones(1, 1, dtype=torch.float64))
        assert sample.z.item() == pytest.approx(3.0)

    def test_noise_shape_checked(self):
        with pytest.raises(LayoutMismatchError):
            reparameterize(_gaussian([[0.0, 0.0]]), torch.zeros(1, 3, dtype=torch.float64))

    def test_seeded_noise_replays(self):
        g = _gaussian([[0.0, 0.0, 0.0]])
        a = sample_noise(g, torch.Generator().manual_seed(4))
        b = sample_noise(g, torch.Generator().manual_seed(4))
        torch.testing.assert_close(a, b, rtol=0, atol=0)


class TestKL:

    def test_unit_mean_shift(self):
        prior = _gaussian([[0.0, 0.0, 0.0]])
        assert gaussian_kl(_gaussian([[1.0, 0.0, 0.0]]), prior).item() == pytest.approx(0.5)

    def test_identical_standard_normals(self):
        g = _gaussian([[0.0, 0.0]])
        assert loss_kl(g, g).item() == pytest.approx(0.0)

    def test_terms_can_be_disabled(self):
        motion = _gaussian([[1.0, 0.0, 0.0]])
        text = _gaussian([[0.0, 0.0, 0.0]])
        only_prior = KLConfig(prior_motion=True, prior_text=False, text_to_motion=False, motion_to_text=False)
        assert loss_kl(motion, text, only_prior).item() == pytest.approx(0.5)
        # 0.5 (motion prior) + 0 (text prior) + 0.5 + 0.5 (cross terms)
        assert loss_kl(motion, text).item() == pytest.approx(1.5)

    def test_shape_mismatch(self):
        with pytest.raises(LayoutMismatchError):
            loss_kl(_gaussian([[0.0, 0.0]]), _gaussian([[0.0, 0.0, 0.0]]))


class TestReconstruction:

    def test_l1_over_groups(self):
        target = _zeros(1)
        prediction = _zeros(1)
        prediction.body[0, 0, 0, 0] = 1.0
        prediction.root[0, 0, 1] = -1.0
        prediction.feet[0, 0, 3] = 1.0
        assert loss_reconstruction(target, prediction).item() == pytest.approx(3.0)

    def test_normalized_by_frame_count(self):
        target = _zeros(2)
        prediction = _zeros(2)
        prediction.root[0, 0, 0] = 4.0
        assert loss_reconstruction(target, prediction).item() == pytest.approx(2.0)

    def test_padded_frames_ignored(self):
        target = _zeros(3, mask=[[True, True, False]])
        prediction = _zeros(3)
        prediction.body[0, 2] = 5.0
        assert loss_reconstruction(target, prediction).item() == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(LayoutMismatchError):
            loss_reconstruction(_zeros(2), _zeros(3))


class TestDecoder:

    def test_output_layout(self, decoder):
        out = decode_motion(torch.randn(2, 5, dtype=torch.float64), 6, decoder)
        assert isinstance(out, MotionReconstruction)
        assert out.body.shape == (2, 6, 21, 12)
        assert out.root.shape == (2, 6, 4)
        assert out.feet.shape == (2, 6, 4)

    def test_padded_frames_zero(self, decoder):
        mask = torch.tensor([[True, True, True, False]])
        out = decode_motion(torch.randn(1, 5, dtype=torch.float64), mask, decoder)
        assert torch.count_nonzero(out.body[:, 3]) == 0
        assert torch.count_nonzero(out.root[:, 3]) == 0

    def test_group_heads_scatter_to_joints(self, decoder):
        for g, head in enumerate(decoder.body_heads):
            head.weight.zero_()
            head.bias.fill_(g + 1.0)
        out = decode_motion(torch.randn(5, dtype=torch.float64), 2, decoder)
        for g, joints in enumerate(DEFAULT_JOINT_GROUPS.values()):
            for j in joints:
                assert torch.all(out.body[0, :, j] == g + 1.0)

    def test_zero_frames_rejected(self, decoder):
        with pytest.raises(LayoutMismatchError):
            decode_motion(torch.zeros(5, dtype=torch.float64), 0, decoder)
