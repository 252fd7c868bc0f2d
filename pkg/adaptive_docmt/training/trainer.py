"""
Two-stage training.

Stage one trains the shared transformer on the empty-context variant of every
sentence. Stage two finetunes model and context predictor jointly: every
option of a sentence is run forward, the per-option losses are mixed with
Gumbel-softmax weights and one optimizer step follows.

All randomness of a step (dropout, source masking, Gumbel noise, batch order)
is derived from (seed, step), so resuming from a checkpoint continues exactly
like an uninterrupted run.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import torch
import torch.nn as nn

from adaptive_docmt.corpus.batching import collate
from adaptive_docmt.corpus.document_corpus import DocumentCorpus
from adaptive_docmt.corpus.masking import apply_source_mask
from adaptive_docmt.corpus.variants import build_variants
from adaptive_docmt.corpus.vocabulary import Vocabulary
from adaptive_docmt.model.checkpoint import (
    MODEL_PREFIX,
    OPTIMIZER_PREFIX,
    PREDICTOR_PREFIX,
    Checkpoint,
    build_model,
    build_predictor,
    save_checkpoint,
)
from adaptive_docmt.model.model_config import ModelConfig
from adaptive_docmt.model.model_factory import model_factory
from adaptive_docmt.model.transformer import DocumentTransformer
from adaptive_docmt.predictor.context_predictor import (
    OptionDistribution,
    PredictorHead,
    option_distribution,
    option_probs,
    pool,
)
from adaptive_docmt.training.losses import (
    LossBreakdown,
    LossWeights,
    breakdown,
    diversity_loss,
    mask_loss,
    nll,
    total_loss,
    uniformity_loss,
    weighted_mt_loss,
)
from adaptive_docmt.training.train_config import DOC_FINETUNE, SENTENCE_PRETRAIN, TrainConfig
from adaptive_docmt.utils.app_exception import (
    CheckpointError,
    ConfigurationError,
    EmptyInputError,
    NumericError,
    VocabularyError,
)
from adaptive_docmt.utils.logger import format_record, logger, write_report_file

log = logger(__name__)

SEED_STRIDE = 1_000_003


def step_seed(seed: int, step: int) -> int:
    return (seed * SEED_STRIDE + step) % (2**63 - 1)


def step_generator(seed: int, step: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(step_seed(seed, step))
    return generator


@dataclass
class DocumentBatch:
    """Collated inputs of every option for one batch of sentences, plus the masked copy."""

    options: List[Dict[str, Optional[torch.Tensor]]]
    masked: Optional[Dict[str, Optional[torch.Tensor]]] = None
    mask_positions: Optional[List[List[int]]] = None
    mask_originals: Optional[List[List[int]]] = None

    @property
    def size(self) -> int:
        return self.options[0]["src_ids"].size(0)


def build_document_batch(
    corpus: DocumentCorpus,
    vocabulary: Vocabulary,
    sentences: Sequence[Tuple[int, int]],
    model_config: ModelConfig,
    rng: Optional[torch.Generator] = None,
    mask_rate: float = 0.0,
) -> DocumentBatch:
    """
    Variants of every option for the given (document, sentence) indices.

    With a generator and a positive mask_rate the richest option is also
    masked into a separate copy for the masked-token loss.
    """
    if not sentences:
        raise EmptyInputError("a training batch needs at least one sentence")
    variants = [
        build_variants(corpus, vocabulary, doc_idx, sent_idx, model_config.variant)
        for doc_idx, sent_idx in sentences
    ]
    options = [
        collate([sentence_variants[option] for sentence_variants in variants])
        for option in range(model_config.n_options)
    ]
    if rng is None or mask_rate <= 0.0:
        return DocumentBatch(options)

    masked, positions, originals = [], [], []
    for sentence_variants in variants:
        variant, selected, original = apply_source_mask(
            sentence_variants[model_config.full_option], rng, mask_rate, model_config.vocab_size
        )
        masked.append(variant)
        positions.append(selected)
        originals.append(original)
    return DocumentBatch(options, collate(masked), positions, originals)


@dataclass
class DocumentLoss:
    total: torch.Tensor
    breakdown: LossBreakdown
    gumbel_noise: Optional[torch.Tensor]


def masked_token_loss(model: DocumentTransformer, batch: DocumentBatch) -> torch.Tensor:
    option = model.config.full_option
    memory = model.encode_option(batch.masked, option).batched()
    rows = [row for row, selected in enumerate(batch.mask_positions) for _ in selected]
    cols = [position for selected in batch.mask_positions for position in selected]
    originals = torch.tensor(
        [token for original in batch.mask_originals for token in original], dtype=torch.long
    )
    hidden = memory.hidden[rows, cols] if rows else memory.hidden.new_zeros((0, memory.hidden.size(-1)))
    return mask_loss(hidden, originals, model.mask_head)


def document_loss(
    model: DocumentTransformer,
    predictor: PredictorHead,
    batch: DocumentBatch,
    weights: LossWeights,
    tau: float,
    rng: Optional[torch.Generator] = None,
    gumbel_noise: Optional[torch.Tensor] = None,
    forced_lambda: Optional[torch.Tensor] = None,
) -> DocumentLoss:
    """
    Joint objective of one batch: the lambda-weighted per-option NLL plus the
    diversity, uniformity and masked-token terms.

    Option forwards run in option order. forced_lambda replaces the Gumbel
    weights (broadcast over the batch).
    """
    per_option = torch.stack(
        [
            nll(model.option_logits(inputs, option), inputs["tgt_out"], inputs["loss_mask"])
            for option, inputs in enumerate(batch.options)
        ],
        dim=-1,
    )
    empty = model.config.empty_option
    pooled = pool(model.encode_option(batch.options[empty], empty))
    if forced_lambda is not None:
        pi = option_probs(pooled, predictor)
        forced = torch.as_tensor(forced_lambda, dtype=pi.dtype).expand_as(pi)
        distribution = OptionDistribution(pi, forced, None)
    else:
        distribution = option_distribution(pooled, predictor, tau, rng=rng, noise=gumbel_noise)
    pi, lambda_ = distribution.pi, distribution.lambda_

    if batch.masked is not None:
        l_mask = masked_token_loss(model, batch)
    else:
        l_mask = per_option.new_zeros(())
    parts = {
        "l_mt": weighted_mt_loss(per_option, lambda_).mean(),
        "l_div": diversity_loss(pi),
        "l_uni": uniformity_loss(pi),
        "l_mask": l_mask,
    }
    total = total_loss(parts, weights)
    return DocumentLoss(total, breakdown(per_option, lambda_, parts, total, pi), distribution.gumbel_noise)


class Trainer:
    """Shared step loop, schedule, clipping and checkpointing of both stages."""

    stage = ""

    def __init__(
        self,
        model: DocumentTransformer,
        vocabulary: Vocabulary,
        corpus: DocumentCorpus,
        config: TrainConfig,
        predictor: Optional[PredictorHead] = None,
    ):
        if len(vocabulary) > model.config.vocab_size:
            raise VocabularyError(
                f"vocabulary of {len(vocabulary)} tokens exceeds model vocab_size {model.config.vocab_size}"
            )
        self.model = model
        self.vocabulary = vocabulary
        self.corpus = corpus
        self.config = config
        self.predictor = predictor
        self.step = 0
        self.records: List[str] = []
        self.sentences = [(doc_idx, sent_idx) for doc_idx, sent_idx, _ in corpus.sentences()]
        self._epoch: Optional[Tuple[int, List[int]]] = None
        self.optimizer = torch.optim.Adam(
            [param for _, param in self.named_parameters()],
            lr=config.lr,
            betas=(config.adam_beta1, config.adam_beta2),
            eps=config.adam_eps,
        )

    def named_parameters(self) -> List[Tuple[str, nn.Parameter]]:
        params = [(MODEL_PREFIX + name, param) for name, param in self.model.named_parameters()]
        if self.predictor is not None:
            params += [
                (PREDICTOR_PREFIX + name, param) for name, param in self.predictor.named_parameters()
            ]
        return params

    def _permutation(self, epoch: int) -> List[int]:
        """Shuffle of one epoch; only the latest epoch is kept."""
        if self._epoch is None or self._epoch[0] != epoch:
            generator = torch.Generator()
            generator.manual_seed(step_seed(self.config.seed, -(epoch + 1)))
            self._epoch = (epoch, torch.randperm(len(self.sentences), generator=generator).tolist())
        return self._epoch[1]

    def predictor_frozen(self, step: int) -> bool:
        """The predictor keeps its initial weights for the first predictor_warmup steps."""
        return self.predictor is not None and step <= self.config.predictor_warmup

    def batch_indices(self, step: int) -> List[Tuple[int, int]]:
        """Sentences of a step: consecutive slices of a per-epoch shuffle."""
        n = len(self.sentences)
        size = self.config.batch_size
        positions = range((step - 1) * size, step * size)
        return [self.sentences[self._permutation(p // n)[p % n]] for p in positions]

    def compute_loss(self, sentences: List[Tuple[int, int]], rng: torch.Generator) -> Tuple[torch.Tensor, LossBreakdown]:
        raise NotImplementedError

    def train_step(self) -> Dict[str, object]:
        step = self.step + 1
        torch.manual_seed(step_seed(self.config.seed, step))
        rng = step_generator(self.config.seed, step)
        self.model.train()
        if self.predictor is not None:
            self.predictor.train()

        self.optimizer.zero_grad(set_to_none=True)
        try:
            total, losses = self.compute_loss(self.batch_indices(step), rng)
        except NumericError as error:
            raise NumericError(f"training diverged at step {step}: {error.message}", error.component)
        if not bool(torch.isfinite(total)):
            raise NumericError(f"training diverged at step {step}: loss is not finite", "total")
        total.backward()
        if self.predictor_frozen(step):
            for param in self.predictor.parameters():
                param.grad = None

        params = [param for _, param in self.named_parameters()]
        torch.nn.utils.clip_grad_norm_(params, self.config.clip_norm)
        lr = self.config.learning_rate(step)
        for group in self.optimizer.param_groups:
            group["lr"] = lr
        self.optimizer.step()
        self.step = step

        record = {"step": step}
        fields = losses.record_fields()
        record.update({key: value for key, value in fields.items() if not key.startswith("pi_")})
        record["lr"] = lr
        record.update({key: value for key, value in fields.items() if key.startswith("pi_")})
        return record

    def train(self, checkpoint_path: Optional[str] = None, log_file: Optional[str] = None) -> Checkpoint:
        log.info(
            format_record(
                "train_start", stage=self.stage, step=self.step, max_steps=self.config.max_steps,
                sentences=len(self.sentences),
            )
        )
        while self.step < self.config.max_steps:
            record = self.train_step()
            if self.config.log_every and self.step % self.config.log_every == 0:
                line = format_record("train", **record)
                self.records.append(line)
                log.info(line)
            if checkpoint_path and self.config.ckpt_every and self.step % self.config.ckpt_every == 0:
                save_checkpoint(self.checkpoint(), checkpoint_path)

        checkpoint = self.checkpoint()
        if checkpoint_path:
            save_checkpoint(checkpoint, checkpoint_path)
        if log_file:
            write_report_file(log_file, "\n".join(self.records))
        return checkpoint

    def checkpoint(self) -> Checkpoint:
        tensors = {}
        for name, param in self.named_parameters():
            tensors[name] = param.detach().clone()
            state = self.optimizer.state.get(param)
            if state:
                tensors[f"{OPTIMIZER_PREFIX}{name}.exp_avg"] = state["exp_avg"].detach().clone()
                tensors[f"{OPTIMIZER_PREFIX}{name}.exp_avg_sq"] = state["exp_avg_sq"].detach().clone()
                tensors[f"{OPTIMIZER_PREFIX}{name}.step"] = torch.tensor(float(state["step"]))
        meta = {
            "stage": self.stage,
            "step": str(self.step),
            "seed": str(self.config.seed),
            "tau": repr(self.config.tau),
        }
        return Checkpoint(self.model.config, self.vocabulary, tensors, meta)

    def restore_optimizer(self, checkpoint: Checkpoint):
        """Adam moments and the step counter of a checkpoint written by the same stage."""
        state = checkpoint.optimizer_state
        for name, param in self.named_parameters():
            if f"{name}.exp_avg" not in state:
                continue
            self.optimizer.state[param] = {
                "step": torch.tensor(float(state[f"{name}.step"])),
                "exp_avg": state[f"{name}.exp_avg"].to(param.dtype).clone(),
                "exp_avg_sq": state[f"{name}.exp_avg_sq"].to(param.dtype).clone(),
            }
        self.step = checkpoint.step
        log.info(f"resumed {self.stage} at step {self.step}")


class SentencePretrainer(Trainer):
    stage = SENTENCE_PRETRAIN

    def compute_loss(self, sentences, rng):
        option = self.model.config.empty_option
        inputs = collate(
            [
                build_variants(self.corpus, self.vocabulary, doc_idx, sent_idx, self.model.config.variant)[option]
                for doc_idx, sent_idx in sentences
            ]
        )
        l_mt = nll(self.model.option_logits(inputs, option), inputs["tgt_out"], inputs["loss_mask"]).mean()
        zero = l_mt.new_zeros(())
        parts = {"l_mt": l_mt, "l_div": zero, "l_uni": zero, "l_mask": zero}
        total = total_loss(parts, self.config.loss_weights)
        return total, LossBreakdown([l_mt.item()], [1.0], l_mt.item(), 0.0, 0.0, 0.0, total.item())


class DocumentFinetuner(Trainer):
    stage = DOC_FINETUNE

    def __init__(self, *args, forced_lambda: Optional[torch.Tensor] = None, **kwargs):
        super().__init__(*args, **kwargs)
        if self.predictor is None:
            raise ConfigurationError("document finetuning needs a context predictor")
        self.forced_lambda = forced_lambda

    def compute_loss(self, sentences, rng):
        weights = self.config.loss_weights
        batch = build_document_batch(
            self.corpus,
            self.vocabulary,
            sentences,
            self.model.config,
            rng=rng,
            mask_rate=self.config.mask_rate if weights.beta3 > 0 else 0.0,
        )
        result = document_loss(
            self.model, self.predictor, batch, weights, self.config.tau,
            rng=rng, forced_lambda=self.forced_lambda,
        )
        return result.total, result.breakdown


def _stage_config(config: TrainConfig, stage: str) -> TrainConfig:
    return config if config.stage == stage else TrainConfig({**config.to_dict(), "stage": stage})


def pretrain_sentence(
    corpus: DocumentCorpus,
    config: TrainConfig,
    model_config: Optional[ModelConfig] = None,
    vocabulary: Optional[Vocabulary] = None,
    resume: Optional[Checkpoint] = None,
    checkpoint_path: Optional[str] = None,
    log_file: Optional[str] = None,
) -> Checkpoint:
    """
    Sentence-level pretraining of a fresh model, or continuation of a
    stage-one checkpoint up to config.max_steps.
    """
    config = _stage_config(config, SENTENCE_PRETRAIN)
    if resume is not None:
        if resume.stage != SENTENCE_PRETRAIN:
            raise CheckpointError(f"cannot resume pretraining from a '{resume.stage}' checkpoint")
        model, vocabulary = build_model(resume), resume.vocabulary
    else:
        if model_config is None:
            raise ConfigurationError("pretraining from scratch needs a model configuration")
        vocabulary = vocabulary or Vocabulary.from_corpus(corpus)
        model = model_factory.build(model_config, seed=config.seed)

    trainer = SentencePretrainer(model, vocabulary, corpus, config)
    if resume is not None:
        trainer.restore_optimizer(resume)
    return trainer.train(checkpoint_path, log_file)


def finetune_document(
    corpus: DocumentCorpus,
    pretrained: Checkpoint,
    config: TrainConfig,
    variant: Optional[str] = None,
    checkpoint_path: Optional[str] = None,
    forced_lambda: Optional[torch.Tensor] = None,
    log_file: Optional[str] = None,
) -> Checkpoint:
    """
    Joint document-level finetuning of model and predictor.

    Starts from a stage-one checkpoint with a zero-initialised predictor, or
    resumes a stage-two checkpoint with its predictor and optimizer state.
    """
    config = _stage_config(config, DOC_FINETUNE)
    model_config = pretrained.model_config
    if variant is not None and variant.replace("-", "_") != model_config.variant:
        expected = ModelConfig({**model_config.to_dict(), "variant": variant, "n_options": None})
        raise ConfigurationError(
            f"checkpoint has {model_config.n_options} options ({model_config.variant}), "
            f"the {expected.variant} variant needs {expected.n_options}"
        )

    model = build_model(pretrained)
    if config.no_doc_tips and model.config.doc_tips:
        model.config = ModelConfig({**model_config.to_dict(), "doc_tips": False})

    resuming = pretrained.stage == DOC_FINETUNE
    if resuming:
        predictor = build_predictor(pretrained, config.tau)
    else:
        predictor = PredictorHead(model_config.d_model, model_config.n_options, config.tau)
        predictor = predictor.to(model_config.torch_dtype())

    trainer = DocumentFinetuner(
        model, pretrained.vocabulary, corpus, config, predictor=predictor, forced_lambda=forced_lambda
    )
    if resuming:
        trainer.restore_optimizer(pretrained)
    return trainer.train(checkpoint_path, log_file)
