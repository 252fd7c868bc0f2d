"""
Lightweight context predictor.

The averaged source encoding H_s is projected to one logit per context option;
training weights the per-option translation losses with Gumbel-softmax
weights, inference picks the argmax option.
"""
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import torch
import torch.nn as nn

from adaptive_docmt.model.transformer import EncoderOutput
from adaptive_docmt.utils.app_exception import ConfigurationError, EmptyInputError, NumericError
from adaptive_docmt.utils.logger import logger

log = logger(__name__)


class PredictorHead(nn.Module):
    """Projection W [d × N], bias b [N] and the constant temperature tau."""

    def __init__(self, d_model: int, n_options: int, tau: float = 1.0):
        super().__init__()
        if tau <= 0:
            raise ConfigurationError(f"temperature tau must be positive, got {tau}")
        self.tau = float(tau)
        # zero init starts every sentence at the uniform option distribution
        self.W = nn.Parameter(torch.zeros(d_model, n_options))
        self.b = nn.Parameter(torch.zeros(n_options))

    @property
    def n_options(self) -> int:
        return self.b.numel()

    def logits(self, pooled: torch.Tensor) -> torch.Tensor:
        if pooled.size(-1) != self.W.size(0):
            raise ConfigurationError(
                f"pooled width {pooled.size(-1)} does not match predictor input {self.W.size(0)}"
            )
        logits = pooled @ self.W + self.b
        if not torch.isfinite(logits).all():
            raise NumericError("predictor logits are not finite", "predictor")
        return logits

    def forward(self, encoder_out: EncoderOutput) -> torch.Tensor:
        return self.logits(pool(encoder_out))


@dataclass
class OptionDistribution:
    pi: torch.Tensor
    lambda_: torch.Tensor
    # None when the weights were forced rather than sampled
    gumbel_noise: Optional[torch.Tensor]


def pool(encoder_out: EncoderOutput) -> torch.Tensor:
    """Mean of the non-pad encoder rows: [S, d] -> [d], [B, S, d] -> [B, d]."""
    keep = (~encoder_out.pad_mask).to(encoder_out.hidden.dtype)
    counts = keep.sum(dim=-1, keepdim=True)
    if encoder_out.hidden.size(-2) == 0 or bool((counts == 0).any()):
        raise EmptyInputError("cannot pool an encoder output without non-pad positions")
    summed = (encoder_out.hidden * keep.unsqueeze(-1)).sum(dim=-2)
    return summed / counts


def stable_softmax(logits: torch.Tensor) -> torch.Tensor:
    shifted = logits - logits.max(dim=-1, keepdim=True).values
    exp = shifted.exp()
    return exp / exp.sum(dim=-1, keepdim=True)


def option_probs(pooled: torch.Tensor, head: PredictorHead) -> torch.Tensor:
    """pi = softmax(H_s W + b)."""
    return stable_softmax(head.logits(pooled))


def sample_gumbel(shape, rng: torch.Generator, dtype=torch.float64) -> torch.Tensor:
    """g = -log(-log(u)), u drawn from the open interval (0, 1)."""
    finfo = torch.finfo(dtype)
    u = torch.rand(shape, generator=rng, dtype=dtype)
    u = u.clamp(min=finfo.tiny, max=1.0 - finfo.eps)
    return -torch.log(-torch.log(u))


def gumbel_weights(
    pi: torch.Tensor,
    tau: float,
    rng: Optional[torch.Generator] = None,
    noise: Optional[torch.Tensor] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Gumbel-softmax weights lambda = softmax((log pi + g) / tau).

    Either an explicitly seeded generator or fixed noise must be given. The
    result is differentiable with respect to pi for fixed g.
    """
    if tau <= 0:
        raise ConfigurationError(f"temperature tau must be positive, got {tau}")
    if noise is None:
        if rng is None:
            raise ConfigurationError("gumbel_weights needs a seeded generator or fixed noise")
        noise = sample_gumbel(pi.shape, rng, pi.dtype)
    log_pi = torch.log(pi.clamp_min(torch.finfo(pi.dtype).tiny))
    return stable_softmax((log_pi + noise.to(pi.dtype)) / tau), noise


def option_distribution(
    pooled: torch.Tensor,
    head: PredictorHead,
    tau: float,
    rng: Optional[torch.Generator] = None,
    noise: Optional[torch.Tensor] = None,
) -> OptionDistribution:
    """pi of a pooled source encoding together with its Gumbel-softmax weights."""
    pi = option_probs(pooled, head)
    lambda_, noise = gumbel_weights(pi, tau, rng=rng, noise=noise)
    return OptionDistribution(pi, lambda_, noise)


def select_option(pooled: torch.Tensor, head: PredictorHead) -> Union[int, torch.Tensor]:
    """argmax(H_s W + b); ties resolve to the lowest index."""
    with torch.no_grad():
        choice = torch.argmax(head.logits(pooled), dim=-1)
    return int(choice) if choice.dim() == 0 else choice
