import json

import pytest
import torch

from src.common.errors import ConfigError, GradCheckFailure
from src.testing import GradientCheckSuite, grad_check


class _WrongSquare(torch.autograd.Function):
    """x**2 with a backward pass that is off by a factor of two."""

    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return x ** 2

    @staticmethod
    def backward(ctx, grad_output):
        (x,) = ctx.saved_tensors
        return 4.0 * x * grad_output


class _OffsetSquare(torch.autograd.Function):
    """x**2 whose backward pass adds a constant 5e-8."""

    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return x ** 2

    @staticmethod
    def backward(ctx, grad_output):
        (x,) = ctx.saved_tensors
        return (2.0 * x + 5e-8) * grad_output


def _leaf(*values) -> torch.Tensor:
    return torch.tensor(values, dtype=torch.float64, requires_grad=True)


class TestGradCheck:

    def test_quadratic_passes(self):
        x = _leaf(0.3, -1.2, 2.0)
        report = grad_check(lambda: (x ** 2).sum(), [x])
        assert report.passed
        assert report.max_rel_error < 1e-6
        assert report.n_checked == 3
        assert x.tolist() == pytest.approx([0.3, -1.2, 2.0], abs=0)

    def test_corrupted_gradient_is_caught(self):
        x = _leaf(0.5, 1.5, -2.0)
        report = grad_check(lambda: _WrongSquare.apply(x).sum(), {"x": x})
        assert not report.passed
        assert report.worst.startswith("x[")
        with pytest.raises(GradCheckFailure):
            report.raise_on_failure()

    def test_sampling_limits_coordinates(self):
        x = torch.randn(10, 10, dtype=torch.float64, requires_grad=True)
        report = grad_check(lambda: (x.sin()).sum(), [x], n_samples=7)
        assert report.n_checked == 7
        assert report.passed

    def test_unused_parameter_has_zero_gradient(self):
        x, y = _leaf(1.0), _leaf(2.0)
        report = grad_check(lambda: (x ** 3).sum(), {"x": x, "y": y})
        assert report.passed
        assert report.per_param["y"] == 0.0

    def test_requires_float64(self):
        x = torch.ones(2, requires_grad=True)
        with pytest.raises(ConfigError):
            grad_check(lambda: x.sum(), [x])

    def test_requires_grad(self):
        x = torch.ones(2, dtype=torch.float64)
        with pytest.raises(ConfigError):
            grad_check(lambda: x.sum(), [x])

    def test_requires_scalar_loss(self):
        x = _leaf(1.0, 2.0)
        with pytest.raises(ConfigError):
            grad_check(lambda: x * 2, [x])

    def test_small_gradient_off_by_factor_two_is_caught(self):
        x = _leaf(5e-4, -1e-3)
        report = grad_check(lambda: _WrongSquare.apply(x).sum(), [x])
        assert not report.passed
        assert report.max_abs_error == pytest.approx(2e-3, rel=1e-6)

    def test_floor_bounds_absolute_error_of_tiny_gradients(self):
        x = _leaf(1e-5, -2e-5)
        floored = grad_check(lambda: _OffsetSquare.apply(x).sum(), [x])
        assert floored.passed
        assert floored.max_abs_error == pytest.approx(5e-8, rel=1e-3)
        assert floored.max_rel_error == pytest.approx(5e-8 / 1e-2, rel=1e-3)
        assert not grad_check(lambda: _OffsetSquare.apply(x).sum(), [x], floor=0.0).passed

    def test_negative_floor_rejected(self):
        x = _leaf(1.0)
        with pytest.raises(ConfigError):
            grad_check(lambda: x.sum(), [x], floor=-1.0)


class TestSuite:

    @pytest.fixture
    def suite(self):
        return GradientCheckSuite(seed=0)

    @pytest.mark.parametrize("check", [
        "run_info_nce_check",
        "run_info_nce_filtered_check",
        "run_cross_to_uni_check",
        "run_teacher_to_uni_check",
        "run_cccl_total_check",
        "run_reparameterization_check",
        "run_kl_check",
        "run_reconstruction_check",
        "run_text_encoder_check",
    ])
    def test_single_check_passes(self, suite, check):
        report = getattr(suite, check)()
        assert report.passed, f"{report.name}: {report.max_rel_error:.3e} at {report.worst}"

    def test_cccl_without_diagonal(self, suite):
        assert suite.run_cccl_total_check(exclude_diagonal=True).passed

    @pytest.mark.parametrize("mode", ["factorized_encoder", "factorized_self_attention"])
    def test_motion_encoder(self, suite, mode):
        report = suite.run_motion_encoder_check(mode)
        assert report.passed, f"{report.name}: {report.max_rel_error:.3e} at {report.worst}"

    def test_report_file(self, suite, tmp_path):
        suite.run_info_nce_check()
        suite.run_kl_check()
        report = suite.generate_report(tmp_path)
        assert report.overall_pass
        files = list(tmp_path.glob("gradcheck_report_*.json"))
        assert len(files) == 1
        data = json.loads(files[0].read_text())
        assert data["summary_statistics"]["total_checks"] == 2
        assert [c["name"] for c in data["checks"]] == ["info_nce", "loss_kl"]

    def test_empty_suite_does_not_pass(self, suite):
        assert not suite.generate_report().overall_pass

    @pytest.mark.slow
    def test_full_suite(self, suite):
        report = suite.run_full_suite()
        assert report.overall_pass, [c.name for c in report.checks if not c.passed]
