"""
Training objectives: per-option translation NLL, the lambda-weighted mix,
the diversity and uniformity premiums, the masked-token loss and the total.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from adaptive_docmt.utils.app_exception import (
    ConfigurationError,
    EmptyInputError,
    NumericError,
    VocabularyError,
)

PROB_FLOOR = 1e-8


class LossWeights:
    """beta1 (diversity), beta2 (uniformity), beta3 (mask)."""

    def __init__(self, beta1: float = 0.05, beta2: float = 0.01, beta3: float = 0.5):
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.beta3 = float(beta3)
        for name in ("beta1", "beta2", "beta3"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be finite and non-negative, got {value}")

    def to_dict(self) -> Dict[str, float]:
        return {"beta1": self.beta1, "beta2": self.beta2, "beta3": self.beta3}

    def __repr__(self):
        return f"LossWeights(beta1={self.beta1}, beta2={self.beta2}, beta3={self.beta3})"


@dataclass
class LossBreakdown:
    per_option_nll: List[float]
    lambda_: List[float]
    l_mt: float
    l_div: float
    l_uni: float
    l_mask: float
    total: float
    mean_pi: List[float] = field(default_factory=list)

    def record_fields(self) -> Dict[str, Union[float, List[float]]]:
        fields = {
            "l_mt": self.l_mt,
            "l_div": self.l_div,
            "l_uni": self.l_uni,
            "l_mask": self.l_mask,
            "total": self.total,
        }
        for i, value in enumerate(self.mean_pi):
            fields[f"pi_{i}"] = value
        return fields


def nll(logits: torch.Tensor, target_ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """
    Mean negative log-probability of the gold tokens over scored positions.

    logits [..., T, V], target_ids and mask [..., T]; the mean runs over the
    last axis, so a batch yields one loss per sentence.
    """
    mask = mask.to(torch.bool)
    counts = mask.sum(dim=-1)
    if bool((counts == 0).any()):
        raise EmptyInputError("no target positions are scored")
    if target_ids.numel() and (target_ids.min() < 0 or target_ids.max() >= logits.size(-1)):
        raise VocabularyError("target id outside the output vocabulary")
    log_probs = F.log_softmax(logits, dim=-1)
    gold = log_probs.gather(-1, target_ids.unsqueeze(-1)).squeeze(-1)
    gold = torch.where(mask, gold, torch.zeros_like(gold))
    return -gold.sum(dim=-1) / counts.to(logits.dtype)


def weighted_mt_loss(per_option_nll: torch.Tensor, lambda_: torch.Tensor) -> torch.Tensor:
    """l_mt = sum_i lambda_i * L_MT^i over the last axis."""
    if per_option_nll.shape != lambda_.shape:
        raise ConfigurationError(
            f"loss/lambda shape mismatch: {tuple(per_option_nll.shape)} vs {tuple(lambda_.shape)}"
        )
    return (lambda_ * per_option_nll).sum(dim=-1)


def _as_pi_batch(batch_pis: Union[torch.Tensor, Sequence[torch.Tensor]]) -> torch.Tensor:
    if not torch.is_tensor(batch_pis):
        if len(batch_pis) == 0:
            raise EmptyInputError("empty batch of option distributions")
        batch_pis = torch.stack(list(batch_pis))
    if batch_pis.dim() == 1:
        batch_pis = batch_pis.unsqueeze(0)
    if batch_pis.size(0) == 0:
        raise EmptyInputError("empty batch of option distributions")
    return batch_pis


def diversity_loss(batch_pis) -> torch.Tensor:
    """KL(U || E[pi]) = -(1/N) sum_i log E[pi_i] - log N, E over the batch."""
    pis = _as_pi_batch(batch_pis)
    n = pis.size(-1)
    expected = pis.mean(dim=0).clamp_min(PROB_FLOOR)
    return -torch.log(expected).mean() - math.log(n)


def uniformity_loss(batch_pis) -> torch.Tensor:
    """-E[KL(U || pi)], the batch mean of the negated per-instance divergence."""
    pis = _as_pi_batch(batch_pis)
    n = pis.size(-1)
    kl = -torch.log(pis.clamp_min(PROB_FLOOR)).mean(dim=-1) - math.log(n)
    return -kl.mean()


def mask_loss(hidden: torch.Tensor, original_ids: torch.Tensor, mask_head: nn.Linear) -> torch.Tensor:
    """
    Mean cross-entropy of the masked-token head at masked source positions.

    hidden [M, d] are encoder states at the M masked positions; zero masked
    positions give a zero loss.
    """
    if original_ids.numel() == 0:
        return hidden.new_zeros(()) if torch.is_tensor(hidden) else torch.zeros(())
    if original_ids.min() < 0 or original_ids.max() >= mask_head.out_features:
        raise VocabularyError("masked source id outside the vocabulary")
    return F.cross_entropy(mask_head(hidden), original_ids)


LOSS_COMPONENTS = ("l_mt", "l_div", "l_uni", "l_mask")


def total_loss(parts: Dict[str, torch.Tensor], weights: LossWeights) -> torch.Tensor:
    """L = L_MT + beta1 L_div + beta2 L_uni + beta3 L_mask."""
    for name in LOSS_COMPONENTS:
        value = parts.get(name)
        if value is None:
            raise NumericError(f"missing loss component {name}", name)
        if not bool(torch.isfinite(torch.as_tensor(value)).all()):
            raise NumericError(f"loss component {name} is not finite", name)
    return (
        parts["l_mt"]
        + weights.beta1 * parts["l_div"]
        + weights.beta2 * parts["l_uni"]
        + weights.beta3 * parts["l_mask"]
    )


def breakdown(
    per_option_nll: torch.Tensor,
    lambda_: torch.Tensor,
    parts: Dict[str, torch.Tensor],
    total: torch.Tensor,
    pi: Optional[torch.Tensor] = None,
) -> LossBreakdown:
    """Detach a step's losses into plain floats for logging."""
    def mean_rows(t):
        t = t.detach()
        return (t.mean(dim=0) if t.dim() > 1 else t).tolist()

    return LossBreakdown(
        per_option_nll=mean_rows(per_option_nll),
        lambda_=mean_rows(lambda_),
        l_mt=parts["l_mt"].item(),
        l_div=parts["l_div"].item(),
        l_uni=parts["l_uni"].item(),
        l_mask=parts["l_mask"].item(),
        total=total.item(),
        mean_pi=mean_rows(pi) if pi is not None else [],
    )
