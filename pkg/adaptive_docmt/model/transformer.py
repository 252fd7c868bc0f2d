import math
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn

from adaptive_docmt.model.layers import (
    CrossAttentionBlock,
    DecoderLayer,
    EncoderLayer,
    causal_mask,
    clone,
    sinusoidal_positions,
)
from adaptive_docmt.model.model_config import ModelConfig
from adaptive_docmt.utils.app_exception import (
    DecodeError,
    InputTooLongError,
    NumericError,
    OptionError,
    VocabularyError,
)
from adaptive_docmt.utils.logger import logger

log = logger(__name__)

N_SEGMENTS = 4


@dataclass
class EncoderOutput:
    """Encoder states H. hidden is [B, S, d] (or [S, d] for a single sequence)."""

    hidden: torch.Tensor
    pad_mask: torch.Tensor

    def batched(self) -> "EncoderOutput":
        if self.hidden.dim() == 2:
            return EncoderOutput(self.hidden.unsqueeze(0), self.pad_mask.unsqueeze(0))
        return self

    @property
    def length(self) -> int:
        return self.hidden.size(-2)


def _as_batch(tensor: Optional[torch.Tensor]) -> Optional[torch.Tensor]:
    if tensor is None:
        return None
    tensor = torch.as_tensor(tensor, dtype=torch.long) if not torch.is_tensor(tensor) else tensor
    return tensor.unsqueeze(0) if tensor.dim() == 1 else tensor


class DocumentTransformer(nn.Module):
    """
    Shared encoder-decoder used by every context option.

    Subclasses decide how an option's input is encoded; the decoder, the
    embeddings, the masked-token head and the output projection are common.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.d_model
        self.token_embedding = nn.Embedding(config.vocab_size, d)
        self.segment_embedding = nn.Embedding(N_SEGMENTS, d)
        self.register_buffer(
            "positions", sinusoidal_positions(config.max_positions, d), persistent=False
        )
        layer = EncoderLayer(d, config.n_heads, config.ffn_dim, config.dropout)
        self.encoder_layers = clone(layer, config.encoder_depth)
        self.encoder_norm = nn.LayerNorm(d)
        self.decoder_layers = clone(
            DecoderLayer(d, config.n_heads, config.ffn_dim, config.dropout), config.dec_layers
        )
        self.decoder_norm = nn.LayerNorm(d)
        self.embed_dropout = nn.Dropout(config.dropout)
        self.output_projection = nn.Linear(d, config.vocab_size)
        self.mask_head = nn.Linear(d, config.vocab_size)
        self._reset_parameters()

    def _reset_parameters(self):
        for name, param in self.named_parameters():
            if param.dim() > 1 and "alpha" not in name:
                nn.init.xavier_uniform_(param)

    @property
    def n_options(self) -> int:
        return self.config.n_options

    def check_option(self, option) -> int:
        if isinstance(option, bool) or not isinstance(option, int) or not 0 <= option < self.n_options:
            raise OptionError(option, self.n_options)
        return option

    def check_ids(self, tokens: torch.Tensor, segments: Optional[torch.Tensor] = None):
        if tokens.size(-1) > self.config.max_positions:
            raise InputTooLongError(tokens.size(-1), self.config.max_positions)
        if tokens.numel() and (tokens.min() < 0 or tokens.max() >= self.config.vocab_size):
            raise VocabularyError(
                f"token id out of range 0..{self.config.vocab_size - 1}: "
                f"{int(tokens.min())}..{int(tokens.max())}"
            )
        if segments is not None:
            if segments.shape != tokens.shape:
                raise VocabularyError(
                    f"segment shape {tuple(segments.shape)} != token shape {tuple(tokens.shape)}"
                )
            if segments.numel() and (segments.min() < 0 or segments.max() >= N_SEGMENTS):
                raise VocabularyError(f"segment id out of range 0..{N_SEGMENTS - 1}")

    def embed(self, tokens: torch.Tensor, segments: Optional[torch.Tensor] = None) -> torch.Tensor:
        x = self.token_embedding(tokens) * math.sqrt(self.config.d_model)
        x = x + self.positions[: tokens.size(-1)].to(x.dtype)
        if segments is not None and self.config.doc_tips:
            x = x + self.segment_embedding(segments)
        return self.embed_dropout(x)

    def run_encoder(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        for layer in self.encoder_layers:
            x = layer(x, pad_mask)
        return self.encoder_norm(x)

    def encode(
        self,
        tokens,
        segments=None,
        pad_mask: Optional[torch.Tensor] = None,
    ) -> EncoderOutput:
        """
        Plain sentence-level encoding of one sequence [S] or a padded batch [B, S].

        pad_mask is True on padding positions; when omitted nothing is padding.
        """
        single = torch.as_tensor(tokens).dim() == 1
        tokens, segments, pad_mask = _as_batch(tokens), _as_batch(segments), _as_batch(pad_mask)
        self.check_ids(tokens, segments)
        if pad_mask is None:
            pad_mask = torch.zeros_like(tokens, dtype=torch.bool)
        hidden = self.run_encoder(self.embed(tokens, segments), pad_mask)
        if not torch.isfinite(hidden).all():
            raise NumericError("encoder produced non-finite states", "encoder")
        if single:
            return EncoderOutput(hidden[0], pad_mask[0])
        return EncoderOutput(hidden, pad_mask)

    def encode_option(self, inputs: dict, option: int) -> EncoderOutput:
        """Encode one option's batched inputs (see `corpus.batching.collate`)."""
        raise NotImplementedError

    def decoder_depth(self, option: int) -> int:
        return self.config.decoder_depth(self.check_option(option))

    def decode_logits(
        self,
        memory: EncoderOutput,
        tgt_in,
        tgt_segments=None,
        tgt_pad_mask: Optional[torch.Tensor] = None,
        depth: Optional[int] = None,
    ) -> torch.Tensor:
        """
        Teacher-forced decoder pass running the first `depth` layers.

        Returns logits [B, T, vocab] (or [T, vocab] for a single prefix).
        """
        memory = memory.batched()
        single = torch.as_tensor(tgt_in).dim() == 1
        tgt_in, tgt_segments, tgt_pad_mask = (
            _as_batch(tgt_in), _as_batch(tgt_segments), _as_batch(tgt_pad_mask)
        )
        if memory.length == 0 or bool(memory.pad_mask.all()):
            raise DecodeError("cannot decode from an empty encoder output")
        self.check_ids(tgt_in, tgt_segments)
        depth = self.config.dec_layers if depth is None else depth
        if not 1 <= depth <= self.config.dec_layers:
            raise DecodeError(f"decoder depth {depth} outside 1..{self.config.dec_layers}")
        if tgt_pad_mask is None:
            tgt_pad_mask = torch.zeros_like(tgt_in, dtype=torch.bool)

        y = self.embed(tgt_in, tgt_segments)
        attn_mask = causal_mask(tgt_in.size(1), device=tgt_in.device)
        # exits before the remaining layers; the final norm and projection are shared
        for layer in self.decoder_layers[:depth]:
            y = layer(y, memory.hidden, memory.pad_mask, tgt_pad_mask, attn_mask)
        logits = self.output_projection(self.decoder_norm(y))
        return logits[0] if single else logits

    def option_logits(self, inputs: dict, option: int) -> torch.Tensor:
        memory = self.encode_option(inputs, option)
        return self.decode_logits(
            memory,
            inputs["tgt_in"],
            inputs["tgt_in_segments"],
            inputs["tgt_pad_mask"],
            depth=self.decoder_depth(option),
        )


class ConcatenateTransformer(DocumentTransformer):
    """Single-stream model over `pre <sep> source <sep> pos` with option-dependent decoder depth."""

    def encode_option(self, inputs: dict, option: int) -> EncoderOutput:
        self.check_option(option)
        return self.encode(inputs["src_ids"], inputs["src_segments"], inputs["src_pad_mask"])

    def concat_forward(self, variant, target_prefix) -> torch.Tensor:
        """
        Next-token logits [len(target_prefix) × vocab] for one ContextVariant.

        target_prefix is the decoder input, starting with <bos>.
        """
        option = self.check_option(variant.option)
        depth = self.decoder_depth(option)
        memory = self.encode(
            torch.tensor(variant.src_ids, dtype=torch.long),
            torch.tensor(variant.src_segments, dtype=torch.long),
        )
        prefix = torch.as_tensor(target_prefix, dtype=torch.long)
        segments = decoder_input_segments(variant, prefix.size(0))
        return self.decode_logits(memory, prefix, segments, depth=depth)


class ContextUnitTransformer(DocumentTransformer):
    """
    Dual-stream encoder: a context unit runs beside the source stream and is
    merged per layer as F_i = F_i^src + alpha[option][i] * CrossAttn_i(F_i^cxt).
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        d = config.d_model
        self.context_layers = clone(
            EncoderLayer(d, config.n_heads, config.ffn_dim, config.dropout), config.enc_layers
        )
        cross = CrossAttentionBlock(d, config.n_heads, config.dropout)
        self.cross_blocks = clone(cross, config.enc_layers - 1)
        # last layer's cross-attention belongs to the option
        self.last_cross_blocks = clone(cross, config.n_options)
        # zero gates start document training at the sentence-level function
        self.alpha = nn.Parameter(torch.zeros(config.n_options, config.enc_layers))
        self._reset_parameters()

    def cross_block(self, layer_index: int, option: int) -> CrossAttentionBlock:
        if layer_index == self.config.enc_layers - 1:
            return self.last_cross_blocks[option]
        return self.cross_blocks[layer_index]

    def context_unit_forward(
        self,
        src_tokens,
        ctx_tokens,
        option: int,
        src_segments=None,
        ctx_segments=None,
        src_pad_mask=None,
        ctx_pad_mask=None,
    ) -> EncoderOutput:
        option = self.check_option(option)
        single = torch.as_tensor(src_tokens).dim() == 1
        if option == self.config.empty_option:
            # empty context is replaced by the source sentence itself
            ctx_tokens, ctx_segments, ctx_pad_mask = src_tokens, src_segments, src_pad_mask
        src_tokens, src_segments, src_pad_mask = (
            _as_batch(src_tokens), _as_batch(src_segments), _as_batch(src_pad_mask)
        )
        ctx_tokens, ctx_segments, ctx_pad_mask = (
            _as_batch(ctx_tokens), _as_batch(ctx_segments), _as_batch(ctx_pad_mask)
        )
        self.check_ids(src_tokens, src_segments)
        self.check_ids(ctx_tokens, ctx_segments)
        if src_pad_mask is None:
            src_pad_mask = torch.zeros_like(src_tokens, dtype=torch.bool)
        if ctx_pad_mask is None:
            ctx_pad_mask = torch.zeros_like(ctx_tokens, dtype=torch.bool)

        x = self.embed(src_tokens, src_segments)
        c = self.embed(ctx_tokens, ctx_segments)
        for i, (src_layer, ctx_layer) in enumerate(zip(self.encoder_layers, self.context_layers)):
            f_src = src_layer(x, src_pad_mask)
            c = ctx_layer(c, ctx_pad_mask)
            x = f_src + self.alpha[option, i] * self.cross_block(i, option)(f_src, c, ctx_pad_mask)
        hidden = self.encoder_norm(x)
        if not torch.isfinite(hidden).all():
            raise NumericError("context-unit encoder produced non-finite states", "encoder")
        if single:
            return EncoderOutput(hidden[0], src_pad_mask[0])
        return EncoderOutput(hidden, src_pad_mask)

    def encode_option(self, inputs: dict, option: int) -> EncoderOutput:
        return self.context_unit_forward(
            inputs["src_ids"],
            inputs["ctx_ids"],
            option,
            inputs["src_segments"],
            inputs["ctx_segments"],
            inputs["src_pad_mask"],
            inputs["ctx_pad_mask"],
        )


def decoder_input_segments(variant, length: int) -> torch.Tensor:
    """Segments for a decoder input of `length` tokens; generated positions are current."""
    _, segments = variant.decoder_inputs()
    segments = list(segments[:length]) + [1] * max(0, length - len(segments))
    return torch.tensor(segments, dtype=torch.long)
