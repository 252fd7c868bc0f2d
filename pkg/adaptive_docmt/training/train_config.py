import math
from typing import Any, Dict, Optional

from adaptive_docmt.training.losses import LossWeights
from adaptive_docmt.utils.app_exception import ConfigurationError

SENTENCE_PRETRAIN = "sentence_pretrain"
DOC_FINETUNE = "doc_finetune"
STAGES = (SENTENCE_PRETRAIN, DOC_FINETUNE)

TRAIN_DEFAULTS: Dict[str, Any] = {
    "stage": DOC_FINETUNE,
    "lr": 2e-3,
    "adam_beta1": 0.9,
    "adam_beta2": 0.98,
    "adam_eps": 1e-9,
    "warmup_steps": 100,
    "clip_norm": 1.0,
    "batch_size": 16,
    "max_steps": 2000,
    "log_every": 10,
    "ckpt_every": 0,
    "seed": 0,
    "predictor_warmup": 500,
    "beta1": 0.05,
    "beta2": 0.01,
    "beta3": 0.5,
    "tau": 1.0,
    "mask_rate": 0.15,
    "no_uni": False,
    "no_div": False,
    "no_doc_tips": False,
}


class TrainConfig:
    """Optimizer, schedule, loss weights and ablation switches of one training stage."""

    def __init__(self, data: Optional[Dict[str, Any]] = None):
        data = {**TRAIN_DEFAULTS, **(data or {})}
        self.stage = str(data.get("stage")).replace("-", "_").lower()
        self.lr = float(data.get("lr"))
        self.adam_beta1 = float(data.get("adam_beta1"))
        self.adam_beta2 = float(data.get("adam_beta2"))
        self.adam_eps = float(data.get("adam_eps"))
        self.warmup_steps = int(data.get("warmup_steps"))
        self.clip_norm = float(data.get("clip_norm"))
        self.batch_size = int(data.get("batch_size"))
        self.max_steps = int(data.get("max_steps"))
        self.log_every = int(data.get("log_every"))
        self.ckpt_every = int(data.get("ckpt_every"))
        self.seed = int(data.get("seed"))
        self.predictor_warmup = int(data.get("predictor_warmup"))
        self.beta1 = float(data.get("beta1"))
        self.beta2 = float(data.get("beta2"))
        self.beta3 = float(data.get("beta3"))
        self.tau = float(data.get("tau"))
        self.mask_rate = float(data.get("mask_rate"))
        self.no_uni = bool(data.get("no_uni"))
        self.no_div = bool(data.get("no_div"))
        self.no_doc_tips = bool(data.get("no_doc_tips"))
        self.validate()

    def validate(self):
        if self.stage not in STAGES:
            raise ConfigurationError(f"unknown training stage '{self.stage}', expected one of {STAGES}")
        # lr = 0 is accepted as a frozen dry run
        if not math.isfinite(self.lr) or self.lr < 0:
            raise ConfigurationError(f"lr must be finite and non-negative, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if min(self.max_steps, self.log_every, self.ckpt_every, self.predictor_warmup) < 0:
            raise ConfigurationError("max_steps, log_every, ckpt_every and predictor_warmup must be non-negative")
        if self.warmup_steps < 1:
            raise ConfigurationError(f"warmup_steps must be >= 1, got {self.warmup_steps}")
        if self.clip_norm <= 0:
            raise ConfigurationError(f"clip_norm must be positive, got {self.clip_norm}")
        if self.tau <= 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")
        if not 0.0 <= self.mask_rate < 1.0:
            raise ConfigurationError(f"mask_rate must be in [0, 1), got {self.mask_rate}")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1)")
        # raises on negative betas
        LossWeights(self.beta1, self.beta2, self.beta3)

    @property
    def loss_weights(self) -> LossWeights:
        """Effective weights: sentence pretraining and ablations zero the premiums."""
        if self.stage == SENTENCE_PRETRAIN:
            return LossWeights(0.0, 0.0, 0.0)
        return LossWeights(
            0.0 if self.no_div else self.beta1,
            0.0 if self.no_uni else self.beta2,
            # the masked-token loss is one of the doc tips
            0.0 if self.no_doc_tips else self.beta3,
        )

    def learning_rate(self, step: int) -> float:
        """Inverse square root schedule with linear warmup; steps count from 1."""
        step = max(step, 1)
        return self.lr * min(step / self.warmup_steps, math.sqrt(self.warmup_steps / step))

    def to_dict(self) -> Dict[str, Any]:
        return {key: getattr(self, key) for key in TRAIN_DEFAULTS}

    def __repr__(self):
        return f"TrainConfig(stage={self.stage}, lr={self.lr}, max_steps={self.max_steps}, seed={self.seed})"
