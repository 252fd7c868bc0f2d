from typing import Any, Dict

import torch

from adaptive_docmt.corpus.document_corpus import read_corpus
from adaptive_docmt.corpus.synthetic import GeneratorConfig, generate_from_config, synthetic_vocabulary
from adaptive_docmt.corpus.vocabulary import Vocabulary, read_vocabulary
from adaptive_docmt.model.checkpoint import build_model, checkpoint_digest, load_checkpoint
from adaptive_docmt.model.model_config import MODEL_DEFAULTS, ModelConfig
from adaptive_docmt.model.model_factory import model_factory
from adaptive_docmt.operation import Operation
from adaptive_docmt.predictor.context_predictor import PredictorHead, sample_gumbel
from adaptive_docmt.services.service import Service
from adaptive_docmt.training.grad_check import check_document_objective, check_linear_head
from adaptive_docmt.training.train_config import DOC_FINETUNE, SENTENCE_PRETRAIN, TRAIN_DEFAULTS, TrainConfig
from adaptive_docmt.training.trainer import (
    build_document_batch,
    finetune_document,
    pretrain_sentence,
    step_generator,
)
from adaptive_docmt.utils.app_exception import ConfigurationError, NumericError
from adaptive_docmt.utils.logger import format_record, logger

log = logger(__name__)

OPTIMIZER_KEYS = (
    "lr", "adam_beta1", "adam_beta2", "adam_eps", "warmup_steps", "clip_norm",
    "batch_size", "max_steps", "log_every", "ckpt_every", "seed",
)
DOCUMENT_KEYS = (
    "predictor_warmup", "beta1", "beta2", "beta3", "tau", "mask_rate", "no_uni", "no_div", "no_doc_tips",
)


def pick(defaults: Dict[str, Any], keys) -> Dict[str, Any]:
    return {key: defaults[key] for key in keys}


PRETRAIN_DEFAULTS = {
    **MODEL_DEFAULTS,
    **pick(TRAIN_DEFAULTS, OPTIMIZER_KEYS),
    "corpus": "",
    "checkpoint": "",
    "vocabulary": "",
    "resume": "",
    "log_file": "",
}

FINETUNE_DEFAULTS = {
    **pick(TRAIN_DEFAULTS, OPTIMIZER_KEYS + DOCUMENT_KEYS),
    "corpus": "",
    "pretrained": "",
    "checkpoint": "",
    "variant": "",
    "log_file": "",
}

GRADCHECK_DEFAULTS = {
    **{key: value for key, value in MODEL_DEFAULTS.items() if key not in ("doc_tips", "dtype")},
    **pick(TRAIN_DEFAULTS, ("seed", "beta1", "beta2", "beta3", "tau", "mask_rate", "no_doc_tips")),
    "batch_size": 2,
    "n_samples": 100,
    "epsilon": 1e-5,
    "tolerance": 1e-4,
    "linear_tolerance": 1e-8,
    "checkpoint": "",
    "corpus": "",
}


def _train_config(params: Dict[str, Any], keys, stage: str) -> TrainConfig:
    return TrainConfig({**pick(params, keys), "stage": stage})


def checkpoint_record(checkpoint, path: str) -> str:
    return format_record(
        "checkpoint",
        stage=checkpoint.stage,
        step=checkpoint.step,
        variant=checkpoint.model_config.variant,
        path=path,
        sha256=checkpoint_digest(path),
    )


class TrainingService(Service):
    def execute(self, operation: Operation) -> str:
        if operation.command == "pretrain":
            return self.pretrain(operation.params)
        if operation.command == "finetune":
            return self.finetune(operation.params)
        if operation.command == "gradcheck":
            return self.gradcheck(operation.params)
        raise ConfigurationError(f"unsupported training command '{operation.command}'")

    def pretrain(self, params: Dict[str, Any]) -> str:
        corpus = read_corpus(params["corpus"])
        resume = load_checkpoint(params["resume"]) if params["resume"] else None
        vocabulary = read_vocabulary(params["vocabulary"]) if params["vocabulary"] else None
        checkpoint = pretrain_sentence(
            corpus,
            _train_config(params, OPTIMIZER_KEYS, SENTENCE_PRETRAIN),
            model_config=ModelConfig(pick(params, MODEL_DEFAULTS)),
            vocabulary=vocabulary,
            resume=resume,
            checkpoint_path=params["checkpoint"],
            log_file=params["log_file"] or None,
        )
        return checkpoint_record(checkpoint, params["checkpoint"])

    def finetune(self, params: Dict[str, Any]) -> str:
        corpus = read_corpus(params["corpus"])
        checkpoint = finetune_document(
            corpus,
            load_checkpoint(params["pretrained"]),
            _train_config(params, OPTIMIZER_KEYS + DOCUMENT_KEYS, DOC_FINETUNE),
            variant=params["variant"] or None,
            checkpoint_path=params["checkpoint"],
            log_file=params["log_file"] or None,
        )
        return checkpoint_record(checkpoint, params["checkpoint"])

    def gradcheck(self, params: Dict[str, Any]) -> str:
        if params["checkpoint"]:
            checkpoint = load_checkpoint(params["checkpoint"], dtype=torch.float64)
            checkpoint.model_config = ModelConfig(
                {**checkpoint.model_config.to_dict(), "dtype": "float64", "dropout": 0.0}
            )
            model, vocabulary = build_model(checkpoint), checkpoint.vocabulary
        else:
            config = ModelConfig(
                {
                    **pick(params, [key for key in MODEL_DEFAULTS if key in params]),
                    "dtype": "float64",
                    "dropout": 0.0,
                    "doc_tips": not params["no_doc_tips"],
                }
            )
            model = model_factory.build(config, seed=params["seed"])
            vocabulary = None

        generator_config = GeneratorConfig(
            {"seed": params["seed"], "n_docs": 2, "doc_len": 3, "vocab_size": model.config.vocab_size}
        )
        if params["corpus"]:
            corpus = read_corpus(params["corpus"])
            vocabulary = vocabulary or Vocabulary.from_corpus(corpus)
        else:
            corpus = generate_from_config(generator_config)
            vocabulary = vocabulary or synthetic_vocabulary(generator_config)

        rng = step_generator(params["seed"], 1)
        sentences = [(d, s) for d, s, _ in corpus.sentences()][: params["batch_size"]]
        batch = build_document_batch(corpus, vocabulary, sentences, model.config, rng, params["mask_rate"])
        train_config = TrainConfig(
            {**pick(params, ("seed", "beta1", "beta2", "beta3", "tau", "mask_rate", "no_doc_tips"))}
        )
        n_options = model.config.n_options
        predictor = PredictorHead(model.config.d_model, n_options, params["tau"]).to(torch.float64)
        with torch.no_grad():
            # off the uniform start so the predictor gradients are not degenerate
            predictor.W.copy_(0.1 * torch.randn(predictor.W.shape, generator=rng, dtype=torch.float64))
            predictor.b.copy_(0.1 * torch.randn(predictor.b.shape, generator=rng, dtype=torch.float64))
        noise = sample_gumbel((len(sentences), n_options), rng)

        full = check_document_objective(
            model, predictor, batch, train_config.loss_weights, params["tau"], noise,
            params["n_samples"], params["epsilon"], rng,
        )
        pooled = torch.randn((len(sentences), model.config.d_model), generator=rng, dtype=torch.float64)
        coefficients = torch.randn((len(sentences), n_options), generator=rng, dtype=torch.float64)
        linear = check_linear_head(predictor, pooled, coefficients, params["n_samples"], generator=rng)

        lines = [
            format_record("gradcheck", objective="full", **full.record_fields()),
            format_record("gradcheck", objective="linear_head", **linear.record_fields()),
        ]
        report = "\n".join(lines)
        if full.max_rel_error > params["tolerance"] or linear.max_rel_error > params["linear_tolerance"]:
            log.error(report)
            raise NumericError(
                f"gradient check failed: full {full.max_rel_error:.3e} (tolerance {params['tolerance']}), "
                f"linear {linear.max_rel_error:.3e} (tolerance {params['linear_tolerance']})",
                "gradcheck",
            )
        return report
