"""
Gradient Verification Suite
Checks every loss term and both encoders against central finite differences
on small float64 instances (B=3, d=5, T=4).
"""

import json
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import torch
from loguru import logger
from torch import Tensor

from src.losses.cccl import (
    cccl_total,
    cosine_matrix,
    info_nce,
    info_nce_filtered,
    loss_cross_to_uni,
    loss_teacher_to_uni,
    score_distributions,
    teacher_distribution,
)
from src.models.config import DecoderConfig, MotionEncoderConfig, TextEncoderConfig
from src.models.generative_head import (
    MotionDecoder,
    MotionReconstruction,
    loss_kl,
    loss_reconstruction,
    reparameterize,
)
from src.models.motion_encoder import LatentGaussian, MotionBatch, MotionEncoder
from src.data.motion import BODY_DIM, FEET_DIM, N_BODY_JOINTS, ROOT_DIM
from src.models.text_encoder import TextBatch, TextEncoder
from .gradcheck import GradCheckReport, grad_check

TOY_BATCH = 3
TOY_DIM = 5
TOY_FRAMES = 4
TOY_VOCAB = 12


@dataclass
class SuiteReport:
    """Complete verification report"""
    timestamp: str
    settings: Dict
    checks: List[GradCheckReport]
    overall_pass: bool
    summary_statistics: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        checks = [dict(asdict(c), passed=c.passed) for c in self.checks]
        return {
            "timestamp": self.timestamp,
            "settings": self.settings,
            "checks": checks,
            "overall_pass": self.overall_pass,
            "summary_statistics": self.summary_statistics,
        }


def _leaf(x: Tensor) -> Tensor:
    return x.detach().clone().requires_grad_(True)


class GradientCheckSuite:
    """
    Finite-difference checks for the loss terms, the reparameterization,
    the decoder and both encoders.
    """

    def __init__(self, tol: float = 1e-4, eps: float = 1e-5, seed: int = 0, n_samples: Optional[int] = 48):
        """
        Args:
            tol: Maximum accepted relative error
            eps: Central-difference step
            seed: Seed for toy instances and coordinate sampling
            n_samples: Coordinates checked per weight tensor (None checks all)
        """
        self.tol = tol
        self.eps = eps
        self.seed = seed
        self.n_samples = n_samples
        self.results: List[GradCheckReport] = []
        self.generator = torch.Generator().manual_seed(seed)

    def _randn(self, *shape) -> Tensor:
        return torch.randn(*shape, generator=self.generator, dtype=torch.float64)

    def _check(self, name: str, loss_fn: Callable[[], Tensor], params) -> GradCheckReport:
        report = grad_check(loss_fn, params, eps=self.eps, tol=self.tol, n_samples=self.n_samples,
                            seed=self.seed, name=name)
        self.results.append(report)
        status = "passed" if report.passed else "FAILED"
        logger.info(f"{name:<28} {status}  max rel err {report.max_rel_error:.2e}")
        return report

    def _features(self):
        t = _leaf(self._randn(TOY_BATCH, TOY_DIM))
        m = _leaf(self._randn(TOY_BATCH, TOY_DIM))
        log_tau = _leaf(torch.tensor(np.log(0.5), dtype=torch.float64))
        return t, m, log_tau

    def _teacher_sim(self) -> Tensor:
        a = torch.rand(TOY_BATCH, TOY_BATCH, generator=self.generator, dtype=torch.float64)
        sim = 0.5 * (a + a.T)
        sim.fill_diagonal_(1.0)
        sim[0, 1] = sim[1, 0] = 0.97
        return sim

    def _motion_batch(self) -> MotionBatch:
        lengths = [TOY_FRAMES, TOY_FRAMES, TOY_FRAMES - 1]
        mask = torch.zeros(TOY_BATCH, TOY_FRAMES, dtype=torch.bool)
        for i, n in enumerate(lengths):
            mask[i, :n] = True
        weights = mask.to(torch.float64)
        feet = torch.randint(0, 2, (TOY_BATCH, TOY_FRAMES, FEET_DIM), generator=self.generator).to(torch.float64)
        return MotionBatch(
            body=self._randn(TOY_BATCH, TOY_FRAMES, N_BODY_JOINTS, BODY_DIM) * weights[..., None, None],
            root=self._randn(TOY_BATCH, TOY_FRAMES, ROOT_DIM) * weights[..., None],
            feet=feet * weights[..., None],
            mask=mask,
        )

    def _text_batch(self) -> TextBatch:
        lengths = [4, 3, 2]
        ids = torch.zeros(TOY_BATCH, max(lengths), dtype=torch.long)
        mask = torch.zeros(TOY_BATCH, max(lengths), dtype=torch.bool)
        for i, n in enumerate(lengths):
            ids[i, :n] = torch.randint(2, TOY_VOCAB, (n,), generator=self.generator)
            mask[i, :n] = True
        return TextBatch(ids=ids, mask=mask)

    @staticmethod
    def _toy_motion_encoder(attention_mode: str = "factorized_encoder") -> MotionEncoder:
        config = MotionEncoderConfig(depth=2, heads=2, ffn_width=16, model_width=8, latent_dim=TOY_DIM,
                                     attention_mode=attention_mode, dropout=0.0)
        return MotionEncoder(config).double().eval()

    @staticmethod
    def _toy_text_encoder() -> TextEncoder:
        config = TextEncoderConfig(depth=2, heads=2, ffn_width=16, model_width=8, latent_dim=TOY_DIM, dropout=0.0)
        return TextEncoder(TOY_VOCAB, config).double().eval()

    @staticmethod
    def _toy_decoder(joint_groups: dict) -> MotionDecoder:
        config = DecoderConfig(depth=1, heads=2, ffn_width=16, model_width=8, dropout=0.0)
        return MotionDecoder(TOY_DIM, joint_groups, config).double().eval()

    def run_info_nce_check(self) -> GradCheckReport:
        t, m, log_tau = self._features()
        return self._check("info_nce", lambda: info_nce(cosine_matrix(t, m), torch.exp(log_tau)),
                           {"t": t, "m": m, "log_tau": log_tau})

    def run_info_nce_filtered_check(self) -> GradCheckReport:
        t, m, log_tau = self._features()
        teacher = self._teacher_sim()
        return self._check(
            "info_nce_filtered",
            lambda: info_nce_filtered(cosine_matrix(t, m), teacher, 0.95, torch.exp(log_tau)),
            {"t": t, "m": m, "log_tau": log_tau})

    def run_cross_to_uni_check(self) -> GradCheckReport:
        t, m, _ = self._features()
        return self._check("cross_to_uni", lambda: loss_cross_to_uni(score_distributions(t, m)),
                           {"t": t, "m": m})

    def run_teacher_to_uni_check(self) -> GradCheckReport:
        t, m, _ = self._features()
        S_textGT = teacher_distribution(self._teacher_sim())
        return self._check("teacher_to_uni", lambda: loss_teacher_to_uni(S_textGT, score_distributions(t, m)),
                           {"t": t, "m": m})

    def run_cccl_total_check(self, exclude_diagonal: bool = False) -> GradCheckReport:
        t, m, log_tau = self._features()
        S_textGT = teacher_distribution(self._teacher_sim(), exclude_diagonal=exclude_diagonal)
        name = "cccl_total" + ("_no_diagonal" if exclude_diagonal else "")
        return self._check(
            name,
            lambda: cccl_total(t, m, torch.exp(log_tau), S_textGT, 0.5, exclude_diagonal=exclude_diagonal).total,
            {"t": t, "m": m, "log_tau": log_tau})

    def run_reparameterization_check(self) -> GradCheckReport:
        mu = _leaf(self._randn(TOY_BATCH, TOY_DIM))
        log_var = _leaf(self._randn(TOY_BATCH, TOY_DIM) * 0.5)
        noise = self._randn(TOY_BATCH, TOY_DIM)
        weights = self._randn(TOY_BATCH, TOY_DIM)
        return self._check(
            "reparameterize",
            lambda: (reparameterize(LatentGaussian(mu, log_var), noise).z * weights).sum(),
            {"mu": mu, "log_var": log_var})

    def run_kl_check(self) -> GradCheckReport:
        params = {name: _leaf(self._randn(TOY_BATCH, TOY_DIM) * 0.5)
                  for name in ("motion_mu", "motion_log_var", "text_mu", "text_log_var")}
        return self._check(
            "loss_kl",
            lambda: loss_kl(LatentGaussian(params["motion_mu"], params["motion_log_var"]),
                            LatentGaussian(params["text_mu"], params["text_log_var"])),
            params)

    def run_reconstruction_check(self) -> GradCheckReport:
        target = self._motion_batch()
        other = self._motion_batch()
        body, root, feet = _leaf(other.body), _leaf(other.root), _leaf(other.feet + 0.3)
        return self._check(
            "loss_reconstruction",
            lambda: loss_reconstruction(target, MotionReconstruction(body, root, feet, target.mask)),
            {"body": body, "root": root, "feet": feet})

    def run_motion_encoder_check(self, attention_mode: str = "factorized_encoder") -> GradCheckReport:
        torch.manual_seed(self.seed)
        encoder = self._toy_motion_encoder(attention_mode)
        batch = self._motion_batch()
        w_mu, w_var = self._randn(TOY_BATCH, TOY_DIM), self._randn(TOY_BATCH, TOY_DIM)

        def loss():
            g = encoder(batch)
            return (g.mu * w_mu).sum() + 0.1 * (g.log_var * w_var).sum()

        return self._check(f"motion_encoder[{attention_mode}]", loss, dict(encoder.named_parameters()))

    def run_text_encoder_check(self) -> GradCheckReport:
        torch.manual_seed(self.seed)
        encoder = self._toy_text_encoder()
        batch = self._text_batch()
        w_mu, w_var = self._randn(TOY_BATCH, TOY_DIM), self._randn(TOY_BATCH, TOY_DIM)

        def loss():
            g = encoder(batch)
            return (g.mu * w_mu).sum() + 0.1 * (g.log_var * w_var).sum()

        return self._check("text_encoder", loss, dict(encoder.named_parameters()))

    def run_end_to_end_check(self) -> GradCheckReport:
        """L_rec + L_kl through the decoder, the reparameterization and both encoders."""
        torch.manual_seed(self.seed)
        motion_encoder = self._toy_motion_encoder()
        text_encoder = self._toy_text_encoder()
        decoder = self._toy_decoder(motion_encoder.config.joint_groups)
        batch, tokens = self._motion_batch(), self._text_batch()
        noise = self._randn(TOY_BATCH, TOY_DIM)

        def loss():
            motion_g, text_g = motion_encoder(batch), text_encoder(tokens)
            z = reparameterize(motion_g, noise).z
            return loss_reconstruction(batch, decoder(z, batch.mask)) + loss_kl(motion_g, text_g)

        params = {}
        for prefix, module in (("motion", motion_encoder), ("text", text_encoder), ("decoder", decoder)):
            params.update({f"{prefix}.{k}": v for k, v in module.named_parameters()})
        return self._check("end_to_end", loss, params)

    def run_full_suite(self, report_dir: Optional[Union[str, Path]] = None) -> SuiteReport:
        logger.info(f"Gradient verification: eps={self.eps:.0e}, tol={self.tol:.0e}, seed={self.seed}")
        start = time.perf_counter()
        self.run_info_nce_check()
        self.run_info_nce_filtered_check()
        self.run_cross_to_uni_check()
        self.run_teacher_to_uni_check()
        self.run_cccl_total_check()
        self.run_cccl_total_check(exclude_diagonal=True)
        self.run_reparameterization_check()
        self.run_kl_check()
        self.run_reconstruction_check()
        self.run_motion_encoder_check("factorized_encoder")
        self.run_motion_encoder_check("factorized_self_attention")
        self.run_text_encoder_check()
        self.run_end_to_end_check()
        return self.generate_report(report_dir, elapsed=time.perf_counter() - start)

    def generate_report(self, report_dir: Optional[Union[str, Path]] = None,
                        elapsed: Optional[float] = None) -> SuiteReport:
        """
        Summarize the collected checks, optionally writing a JSON report.

        Args:
            report_dir: Directory for gradcheck_report_<timestamp>.json (None skips writing)
            elapsed: Wall-clock seconds to record
        """
        total = len(self.results)
        passed = sum(1 for r in self.results if r.passed)
        summary = {
            "total_checks": total,
            "passed_checks": passed,
            "failed_checks": total - passed,
            "max_rel_error": max((r.max_rel_error for r in self.results), default=0.0),
            "coordinates_checked": sum(r.n_checked for r in self.results),
        }
        if elapsed is not None:
            summary["elapsed_seconds"] = elapsed

        report = SuiteReport(
            timestamp=datetime.now(timezone.utc).isoformat(),
            settings={"tol": self.tol, "eps": self.eps, "seed": self.seed, "n_samples": self.n_samples},
            checks=list(self.results),
            overall_pass=total > 0 and passed == total,
            summary_statistics=summary,
        )
        logger.info(f"{passed}/{total} gradient checks passed")

        if report_dir is not None:
            report_dir = Path(report_dir)
            report_dir.mkdir(parents=True, exist_ok=True)
            report_file = report_dir / f"gradcheck_report_{datetime.now().strftime('%Y%m%d_%H%M%S')}.json"
            with open(report_file, "w") as f:
                json.dump(report.to_dict(), f, indent=2, default=str)
            logger.info(f"Report saved to: {report_file}")
        return report
