"""
Finite-difference check of backpropagated gradients.

Central differences (f(x + e) - f(x - e)) / 2e are compared with autograd on
a random subset of parameter entries. The objective must be deterministic,
so dropout is off and any Gumbel noise is fixed by the caller.
"""
import bisect
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import torch

from adaptive_docmt.utils.app_exception import ConfigurationError, EmptyInputError
from adaptive_docmt.utils.logger import logger

log = logger(__name__)

# gradients below this magnitude are compared absolutely
RELATIVE_FLOOR = 1e-4


@dataclass
class GradCheckReport:
    n_checked: int
    epsilon: float
    max_rel_error: float
    mean_rel_error: float
    worst: Tuple[str, int] = ("", -1)
    errors: List[float] = field(default_factory=list)

    def record_fields(self):
        return {
            "checked": self.n_checked,
            "epsilon": self.epsilon,
            "max_rel_error": self.max_rel_error,
            "mean_rel_error": self.mean_rel_error,
            "worst": f"{self.worst[0]}[{self.worst[1]}]",
        }


def relative_error(analytic: float, numeric: float, floor: float = RELATIVE_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(
    objective: Callable[[], torch.Tensor],
    params: Sequence[Tuple[str, torch.nn.Parameter]],
    n_samples: int = 100,
    epsilon: float = 1e-5,
    generator: Optional[torch.Generator] = None,
    floor: float = RELATIVE_FLOOR,
) -> GradCheckReport:
    """
    Compare autograd with central differences on n_samples parameter entries.

    params are (name, parameter) pairs; entries are drawn without replacement
    across all of them. Every parameter must be float64.
    """
    params = [(name, param) for name, param in params if param.requires_grad]
    if not params:
        raise EmptyInputError("no trainable parameters to check")
    for name, param in params:
        if param.dtype != torch.float64:
            raise ConfigurationError(f"gradient check needs float64 parameters, {name} is {param.dtype}")
    if epsilon <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")

    for _, param in params:
        param.grad = None
    objective().backward()
    analytic = [
        (param.grad.detach().reshape(-1).clone() if param.grad is not None else torch.zeros(param.numel(), dtype=param.dtype))
        for _, param in params
    ]

    sizes = [param.numel() for _, param in params]
    offsets = torch.tensor([0] + sizes).cumsum(0).tolist()
    total = offsets[-1]
    if generator is None:
        generator = torch.Generator()
        generator.manual_seed(0)
    picks = torch.randperm(total, generator=generator)[: min(n_samples, total)].tolist()

    errors, worst, worst_error = [], ("", -1), -1.0
    with torch.no_grad():
        for flat in sorted(picks):
            which = bisect.bisect_right(offsets, flat) - 1
            index = flat - offsets[which]
            name, param = params[which]
            view = param.data.view(-1)
            original = view[index].item()
            view[index] = original + epsilon
            plus = float(objective())
            view[index] = original - epsilon
            minus = float(objective())
            view[index] = original
            numeric = (plus - minus) / (2 * epsilon)
            error = relative_error(float(analytic[which][index]), numeric, floor)
            errors.append(error)
            if error > worst_error:
                worst, worst_error = (name, index), error

    report = GradCheckReport(
        n_checked=len(errors),
        epsilon=epsilon,
        max_rel_error=max(errors),
        mean_rel_error=sum(errors) / len(errors),
        worst=worst,
        errors=errors,
    )
    log.debug(f"grad check: {report.record_fields()}")
    return report


def check_linear_head(
    predictor, pooled: torch.Tensor, coefficients: torch.Tensor, n_samples: int = 100,
    epsilon: float = 1e-3, generator: Optional[torch.Generator] = None,
) -> GradCheckReport:
    """A linear objective of the predictor logits; central differences are exact up to rounding."""
    return grad_check(
        lambda: (coefficients * predictor.logits(pooled)).sum(),
        list(predictor.named_parameters()),
        n_samples,
        epsilon,
        generator,
    )


def check_document_objective(
    model, predictor, batch, weights, tau: float, gumbel_noise: torch.Tensor, n_samples: int = 100,
    epsilon: float = 1e-5, generator: Optional[torch.Generator] = None,
) -> GradCheckReport:
    """The full joint objective with fixed Gumbel noise and a fixed masked copy."""
    from adaptive_docmt.training.trainer import document_loss

    model.eval()
    params = [("model." + name, param) for name, param in model.named_parameters()]
    params += [("predictor." + name, param) for name, param in predictor.named_parameters()]
    return grad_check(
        lambda: document_loss(model, predictor, batch, weights, tau, gumbel_noise=gumbel_noise).total,
        params,
        n_samples,
        epsilon,
        generator,
    )
