import math

import pytest
import torch

from adaptive_docmt.model.transformer import EncoderOutput
from adaptive_docmt.predictor.context_predictor import (
    PredictorHead,
    gumbel_weights,
    option_distribution,
    option_probs,
    pool,
    sample_gumbel,
    select_option,
)
from adaptive_docmt.utils.app_exception import ConfigurationError, EmptyInputError, NumericError
from adaptive_docmt.utils.logger import logger

log = logger(__name__)

# chi-square critical value, 3 degrees of freedom, alpha = 0.01
CHI2_CRITICAL_DF3 = 11.345


def head(n_options: int, d_model: int = 3, bias=None, tau: float = 1.0) -> PredictorHead:
    predictor = PredictorHead(d_model, n_options, tau).to(torch.float64)
    if bias is not None:
        with torch.no_grad():
            predictor.b.copy_(torch.tensor(bias, dtype=torch.float64))
    return predictor


def encoder_out(rows, pad=None) -> EncoderOutput:
    hidden = torch.tensor(rows, dtype=torch.float64)
    pad_mask = torch.tensor(pad if pad is not None else [False] * hidden.size(-2))
    return EncoderOutput(hidden, pad_mask)


@pytest.mark.unit
class TestPool:
    def test_single_row(self):
        assert torch.equal(pool(encoder_out([[0.3, -1.2]])), torch.tensor([0.3, -1.2], dtype=torch.float64))

    def test_identical_rows(self):
        assert torch.allclose(pool(encoder_out([[2.0, 1.0], [2.0, 1.0]])), torch.tensor([2.0, 1.0], dtype=torch.float64))

    def test_mean(self):
        assert torch.equal(pool(encoder_out([[1.0, 0.0], [0.0, 1.0]])), torch.tensor([0.5, 0.5], dtype=torch.float64))

    def test_padding_excluded(self):
        pooled = pool(encoder_out([[1.0, 0.0], [0.0, 1.0], [9.0, 9.0]], [False, False, True]))
        assert torch.equal(pooled, torch.tensor([0.5, 0.5], dtype=torch.float64))

    def test_batch(self):
        out = EncoderOutput(
            torch.tensor([[[1.0, 1.0], [3.0, 3.0]], [[2.0, 0.0], [7.0, 7.0]]], dtype=torch.float64),
            torch.tensor([[False, False], [False, True]]),
        )
        assert torch.equal(pool(out), torch.tensor([[2.0, 2.0], [2.0, 0.0]], dtype=torch.float64))

    def test_all_padding(self):
        with pytest.raises(EmptyInputError):
            pool(encoder_out([[1.0, 0.0]], [True]))


@pytest.mark.unit
class TestOptionProbs:
    def test_zero_init_is_uniform(self):
        pi = option_probs(torch.randn(3, dtype=torch.float64), head(4))
        assert torch.allclose(pi, torch.full((4,), 0.25, dtype=torch.float64), atol=1e-15)

    def test_shift_invariance(self):
        predictor = head(3, bias=[0.2, -0.5, 1.0])
        pooled = torch.tensor([0.1, 0.2, 0.3], dtype=torch.float64)
        before = option_probs(pooled, predictor)
        with torch.no_grad():
            predictor.b.add_(17.0)
        assert torch.allclose(before, option_probs(pooled, predictor), atol=1e-12, rtol=0)

    def test_hand_evaluated(self):
        pi = option_probs(torch.zeros(3, dtype=torch.float64), head(2, bias=[math.log(3.0), 0.0]))
        assert torch.allclose(pi, torch.tensor([0.75, 0.25], dtype=torch.float64), atol=1e-15)

    def test_large_logits_are_stable(self):
        pi = option_probs(torch.zeros(3, dtype=torch.float64), head(2, bias=[1000.0, 999.0]))
        assert torch.isfinite(pi).all()
        assert abs(float(pi.sum()) - 1.0) < 1e-12

    def test_non_finite_logits(self):
        with pytest.raises(NumericError):
            option_probs(torch.tensor([float("nan"), 0.0, 0.0], dtype=torch.float64), head(2))

    def test_width_mismatch(self):
        with pytest.raises(ConfigurationError):
            option_probs(torch.zeros(5, dtype=torch.float64), head(2))

    def test_temperature_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            PredictorHead(3, 2, tau=0.0)


@pytest.mark.unit
class TestGumbelWeights:
    def test_zero_noise_unit_temperature_is_identity(self):
        pi = torch.tensor([0.1, 0.2, 0.3, 0.4], dtype=torch.float64)
        lambda_, noise = gumbel_weights(pi, 1.0, noise=torch.zeros(4, dtype=torch.float64))
        assert torch.allclose(lambda_, pi, atol=1e-12, rtol=0)
        assert torch.equal(noise, torch.zeros(4, dtype=torch.float64))

    def test_low_temperature_is_one_hot(self):
        pi = torch.tensor([0.1, 0.5, 0.4], dtype=torch.float64)
        lambda_, _ = gumbel_weights(pi, 1e-3, noise=torch.zeros(3, dtype=torch.float64))
        assert torch.allclose(lambda_, torch.tensor([0.0, 1.0, 0.0], dtype=torch.float64), atol=1e-12)

    def test_needs_generator_or_noise(self):
        with pytest.raises(ConfigurationError):
            gumbel_weights(torch.tensor([0.5, 0.5], dtype=torch.float64), 1.0)

    def test_temperature_must_be_positive(self):
        generator = torch.Generator().manual_seed(0)
        with pytest.raises(ConfigurationError):
            gumbel_weights(torch.tensor([0.5, 0.5], dtype=torch.float64), -1.0, rng=generator)

    def test_seeded_noise_is_reproducible(self):
        pi = torch.tensor([0.3, 0.7], dtype=torch.float64)
        a, g_a = gumbel_weights(pi, 1.0, rng=torch.Generator().manual_seed(9))
        b, g_b = gumbel_weights(pi, 1.0, rng=torch.Generator().manual_seed(9))
        assert torch.equal(a, b) and torch.equal(g_a, g_b)

    def test_option_distribution_bundles_pi_and_weights(self):
        predictor = head(3, bias=[0.5, 0.0, -0.5])
        pooled = torch.tensor([[0.1, 0.2, 0.3], [0.0, -1.0, 1.0]], dtype=torch.float64)
        distribution = option_distribution(pooled, predictor, 1.0, rng=torch.Generator().manual_seed(4))
        assert torch.equal(distribution.pi, option_probs(pooled, predictor))
        lambda_, noise = gumbel_weights(distribution.pi, 1.0, rng=torch.Generator().manual_seed(4))
        assert torch.equal(distribution.lambda_, lambda_)
        assert torch.equal(distribution.gumbel_noise, noise)

    def test_weights_are_a_distribution(self):
        pi = torch.softmax(torch.randn(5, 4, dtype=torch.float64), dim=-1)
        lambda_, _ = gumbel_weights(pi, 0.5, rng=torch.Generator().manual_seed(1))
        assert torch.allclose(lambda_.sum(dim=-1), torch.ones(5, dtype=torch.float64), atol=1e-12)

    def test_differentiable_in_pi(self):
        logits = torch.tensor([0.2, -0.3, 0.5], dtype=torch.float64, requires_grad=True)
        lambda_, _ = gumbel_weights(torch.softmax(logits, dim=-1), 1.0, noise=torch.tensor([0.1, 0.4, -0.2], dtype=torch.float64))
        (lambda_ * torch.tensor([1.0, 2.0, 3.0], dtype=torch.float64)).sum().backward()
        assert logits.grad is not None and torch.count_nonzero(logits.grad) > 0

    def test_gumbel_max_frequencies(self):
        draws = 100_000
        pi = torch.tensor([0.1, 0.2, 0.3, 0.4], dtype=torch.float64)
        lambda_, _ = gumbel_weights(pi.expand(draws, 4), 1.0, rng=torch.Generator().manual_seed(2024))
        observed = torch.bincount(torch.argmax(lambda_, dim=-1), minlength=4).to(torch.float64)
        expected = pi * draws
        chi2 = float(((observed - expected) ** 2 / expected).sum())
        log.info(f"chi2 {chi2:.3f} observed {observed.tolist()}")
        assert chi2 < CHI2_CRITICAL_DF3

    def test_samples_are_finite(self):
        noise = sample_gumbel((10_000,), torch.Generator().manual_seed(3))
        assert torch.isfinite(noise).all()


@pytest.mark.unit
class TestSelectOption:
    def test_argmax(self):
        assert select_option(torch.zeros(3, dtype=torch.float64), head(3, bias=[0.1, 2.0, -1.0])) == 1

    def test_ties_resolve_to_lowest_index(self):
        assert select_option(torch.zeros(3, dtype=torch.float64), head(4)) == 0
        assert select_option(torch.zeros(3, dtype=torch.float64), head(3, bias=[0.0, 1.0, 1.0])) == 1

    def test_shift_invariance(self):
        predictor = head(3, bias=[0.4, 0.1, 0.3])
        pooled = torch.tensor([1.0, -2.0, 0.5], dtype=torch.float64)
        before = select_option(pooled, predictor)
        with torch.no_grad():
            predictor.b.sub_(3.0)
        assert select_option(pooled, predictor) == before

    def test_agrees_with_probabilities(self):
        predictor = head(4, d_model=6)
        with torch.no_grad():
            predictor.W.copy_(torch.randn(6, 4, generator=torch.Generator().manual_seed(4), dtype=torch.float64))
        pooled = torch.randn(20, 6, generator=torch.Generator().manual_seed(5), dtype=torch.float64)
        choices = select_option(pooled, predictor)
        assert torch.equal(choices, torch.argmax(option_probs(pooled, predictor), dim=-1))
