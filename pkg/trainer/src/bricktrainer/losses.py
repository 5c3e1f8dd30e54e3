"""Loss assembly.

Per task the neural estimate's AAE, ARE, and MSE are divided by the rule
estimate's same metrics (squared ratios, guide detached), then combined with
learnable homoscedastic weights: LW(e_1..e_m) = sum_j e_j / (2 sigma_j^2)
+ ln sigma_j with sigma_j parametrized through its log variance. The
auxiliary term regresses the two leading scan outputs onto ln(1 + n) and
alpha; the total is L = L' + 0.1 * L''. The regular variant replaces the
ratio terms with the raw metrics for ablation comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .model import EpisodeResult


@dataclass
class LossBreakdown:
    total: torch.Tensor
    main: torch.Tensor
    aux: torch.Tensor
    per_task_metrics: list[dict]


class LearnableWeighting(nn.Module):
    """One log-variance per error term.

    The log variances warm-start from the first batch's term magnitudes;
    the squared-ratio terms span many orders of magnitude across tasks and
    a cold zero start would let one term drown the others for thousands of
    steps (the log variances only move at learning-rate speed).
    """

    def __init__(self, n_terms: int):
        super().__init__()
        self.log_var = nn.Parameter(torch.zeros(n_terms, dtype=torch.float64))
        self.register_buffer("initialized", torch.tensor(False))

    def forward(self, terms: torch.Tensor) -> torch.Tensor:
        # terms: (..., n_terms); weighting applied along the last axis.
        if not bool(self.initialized):
            with torch.no_grad():
                flat = terms.detach().reshape(-1, terms.shape[-1])
                self.log_var.copy_(torch.log(flat.mean(dim=0) + 1e-12))
                self.initialized.fill_(True)
        return (terms * torch.exp(-self.log_var) / 2.0 + self.log_var / 2.0).sum(dim=-1)


def error_metrics(estimate: torch.Tensor, truth: torch.Tensor) -> tuple[torch.Tensor, ...]:
    err = (estimate - truth).abs()
    return err.mean(), (err / truth).mean(), (err * err).mean()


class LossComputer(nn.Module):
    def __init__(self, variant: str = "self_guided", aux_weight: float = 0.1, guide_floor: float = 1e-12):
        super().__init__()
        if variant not in ("self_guided", "regular"):
            raise ValueError(f"unknown loss variant {variant!r}")
        self.variant = variant
        self.aux_weight = aux_weight
        self.guide_floor = guide_floor
        self.lw_main = LearnableWeighting(3)
        self.lw_aux = LearnableWeighting(2)

    def task_terms(self, ep: EpisodeResult) -> tuple[torch.Tensor, torch.Tensor, dict]:
        aae_n, are_n, mse_n = error_metrics(ep.f_neural, ep.truth)
        with torch.no_grad():
            aae_r, are_r, mse_r = error_metrics(ep.f_rule, ep.truth)
        if self.variant == "regular":
            main = torch.stack([aae_n, are_n, mse_n])
        else:
            ratios = []
            for num, guide in ((aae_n, aae_r), (are_n, are_r), (mse_n, mse_r)):
                denom = guide.detach() ** 2
                if denom < self.guide_floor:
                    # A perfect guide leaves nothing to normalize by; fall
                    # back to the raw squared error.
                    ratios.append(num**2)
                else:
                    ratios.append(num**2 / denom)
            main = torch.stack(ratios)
        target_n = torch.log1p(torch.tensor(float(ep.n), dtype=torch.float64))
        target_alpha = torch.tensor(ep.alpha, dtype=torch.float64)
        aux = torch.stack([(ep.s[0] - target_n) ** 2, (ep.s[1] - target_alpha) ** 2])
        detail = {
            "aae_neural": float(aae_n.detach()),
            "are_neural": float(are_n.detach()),
            "mse_neural": float(mse_n.detach()),
            "aae_rule": float(aae_r),
            "are_rule": float(are_r),
            "mse_rule": float(mse_r),
        }
        return main, aux, detail

    def forward(self, episodes: list[EpisodeResult]) -> LossBreakdown:
        if not episodes:
            raise ValueError("loss needs a non-empty batch")
        mains, auxes, details = [], [], []
        for ep in episodes:
            main, aux, detail = self.task_terms(ep)
            mains.append(main)
            auxes.append(aux)
            details.append(detail)
        main_loss = self.lw_main(torch.stack(mains)).mean()
        aux_loss = self.lw_aux(torch.stack(auxes)).mean()
        total = main_loss + self.aux_weight * aux_loss
        return LossBreakdown(total=total, main=main_loss, aux=aux_loss, per_task_metrics=details)
