from typing import Any, Dict, Optional

from adaptive_docmt.utils.app_exception import ConfigurationError

CONTEXT_UNIT = "context_unit"
CONCATENATE = "concatenate"

VARIANT_OPTIONS = {CONTEXT_UNIT: 3, CONCATENATE: 4}

# decoder layers skipped per Concatenate option, in option order
CONCAT_DEPTH_DELTAS = (2, 1, 1, 0)

MODEL_DEFAULTS: Dict[str, Any] = {
    "variant": CONCATENATE,
    "d_model": 32,
    "n_heads": 4,
    "ffn_dim": 64,
    "enc_layers": 2,
    "dec_layers": 3,
    "vocab_size": 64,
    "max_positions": 128,
    "dropout": 0.0,
    "doc_tips": True,
    "dtype": "float32",
}


class ModelConfig:
    """Transformer dimensions and the document-level variant they serve."""

    def __init__(self, data: Optional[Dict[str, Any]] = None):
        data = {**MODEL_DEFAULTS, **(data or {})}
        self.variant = str(data.get("variant")).replace("-", "_").lower()
        self.d_model = int(data.get("d_model"))
        self.n_heads = int(data.get("n_heads"))
        self.ffn_dim = int(data.get("ffn_dim"))
        self.enc_layers = int(data.get("enc_layers"))
        self.dec_layers = int(data.get("dec_layers"))
        self.vocab_size = int(data.get("vocab_size"))
        self.max_positions = int(data.get("max_positions"))
        self.dropout = float(data.get("dropout"))
        self.doc_tips = bool(data.get("doc_tips"))
        self.dtype = str(data.get("dtype"))
        n_options = data.get("n_options")
        self.validate(n_options)

    def validate(self, n_options=None):
        if self.variant not in VARIANT_OPTIONS:
            raise ConfigurationError(
                f"unknown model variant '{self.variant}', expected one of {list(VARIANT_OPTIONS)}"
            )
        for name in ("d_model", "n_heads", "ffn_dim", "enc_layers", "dec_layers",
                     "vocab_size", "max_positions"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if self.d_model % self.n_heads != 0:
            raise ConfigurationError(
                f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout {self.dropout} must be in [0, 1)")
        if self.variant == CONCATENATE and self.dec_layers < 3:
            raise ConfigurationError(
                "the concatenate variant needs dec_layers >= 3 to skip two layers"
            )
        if n_options is not None and int(n_options) != self.n_options:
            raise ConfigurationError(
                f"n_options {n_options} does not match variant {self.variant} ({self.n_options})"
            )
        if self.dtype not in ("float32", "float64"):
            raise ConfigurationError(f"dtype must be float32 or float64, got {self.dtype}")

    @property
    def n_options(self) -> int:
        return VARIANT_OPTIONS[self.variant]

    @property
    def encoder_depth(self) -> int:
        # the concatenate model carries one encoder layer more than the sentence baseline
        return self.enc_layers + 1 if self.variant == CONCATENATE else self.enc_layers

    @property
    def empty_option(self) -> int:
        """Option index whose input carries no surrounding sentence."""
        return 0 if self.variant == CONCATENATE else 2

    @property
    def full_option(self) -> int:
        """Option index carrying the most context."""
        return 3 if self.variant == CONCATENATE else 0

    def decoder_depth(self, option: int) -> int:
        if self.variant != CONCATENATE or not self.doc_tips:
            return self.dec_layers
        depth = self.dec_layers - CONCAT_DEPTH_DELTAS[option]
        if depth < 1:
            raise ConfigurationError(f"decoder depth {depth} for option {option} is below 1")
        return depth

    def torch_dtype(self):
        import torch

        return torch.float64 if self.dtype == "float64" else torch.float32

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "ffn_dim": self.ffn_dim,
            "enc_layers": self.enc_layers,
            "dec_layers": self.dec_layers,
            "vocab_size": self.vocab_size,
            "max_positions": self.max_positions,
            "n_options": self.n_options,
            "dropout": self.dropout,
            "doc_tips": self.doc_tips,
            "dtype": self.dtype,
        }

    def __eq__(self, other):
        return isinstance(other, ModelConfig) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return (
            f"ModelConfig(variant={self.variant}, d_model={self.d_model}, "
            f"enc_layers={self.enc_layers}, dec_layers={self.dec_layers})"
        )
