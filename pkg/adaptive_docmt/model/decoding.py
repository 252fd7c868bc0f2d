from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F

from adaptive_docmt.corpus.batching import collate
from adaptive_docmt.corpus.variants import CURRENT_SEGMENT, ContextVariant
from adaptive_docmt.corpus.vocabulary import BOS_ID, EOS_ID, MASK_ID, PAD_ID
from adaptive_docmt.model.transformer import DocumentTransformer, EncoderOutput
from adaptive_docmt.utils.app_exception import ConfigurationError, DecodeError
from adaptive_docmt.utils.logger import logger

log = logger(__name__)

# never generated: they are structural or input-only
BLOCKED_IDS = (PAD_ID, BOS_ID, MASK_ID)


@dataclass
class Hypothesis:
    tokens: List[int]
    prefix_len: int = 0
    score: float = 0.0
    finished: bool = False
    segments: List[int] = field(default_factory=list)

    @property
    def current(self) -> List[int]:
        """Tokens after the forced context prefix: the current sentence only."""
        return self.tokens[self.prefix_len:]


def _decoder_input(hyp: Hypothesis) -> Tuple[List[int], List[int]]:
    first = hyp.segments[0] if hyp.segments else CURRENT_SEGMENT
    return [BOS_ID] + hyp.tokens, [first] + hyp.segments


def decode(
    model: DocumentTransformer,
    memory: EncoderOutput,
    beam: int = 1,
    forced_prefix: Sequence[int] = (),
    max_len: int = 64,
    depth: Optional[int] = None,
    prefix_segments: Optional[Sequence[int]] = None,
    vocab_limit: Optional[int] = None,
) -> Hypothesis:
    """
    Beam search over one encoded source; beam=1 is greedy decoding.

    Scores are summed log-probabilities without length normalisation. The
    forced prefix is emitted verbatim and not scored. Decoding stops at <eos>
    or when max_len tokens (prefix included) have been produced. Ids at or
    above vocab_limit are never generated.
    """
    if beam < 1:
        raise ConfigurationError(f"beam size must be >= 1, got {beam}")
    if max_len > model.config.max_positions:
        raise ConfigurationError(
            f"max_len {max_len} exceeds max_positions {model.config.max_positions}"
        )
    memory = memory.batched()
    if memory.length == 0 or bool(memory.pad_mask.all()):
        raise DecodeError("cannot decode from an empty encoder output")
    prefix = [int(t) for t in forced_prefix]
    if prefix_segments is None:
        prefix_segments = [CURRENT_SEGMENT] * len(prefix)
    if vocab_limit is not None and vocab_limit <= EOS_ID:
        raise ConfigurationError(f"vocab_limit {vocab_limit} leaves no token to generate")
    if len(prefix) > max_len:
        raise DecodeError(f"forced prefix of {len(prefix)} tokens exceeds max_len {max_len}")

    beams = [Hypothesis(list(prefix), len(prefix), 0.0, False, list(prefix_segments))]
    with torch.no_grad():
        while not all(h.finished for h in beams) and max(len(h.tokens) for h in beams) < max_len:
            alive = [h for h in beams if not h.finished]
            inputs = [_decoder_input(h) for h in alive]
            tgt_in = torch.tensor([i[0] for i in inputs], dtype=torch.long)
            segments = torch.tensor([i[1] for i in inputs], dtype=torch.long)
            expanded = EncoderOutput(
                memory.hidden.expand(len(alive), -1, -1),
                memory.pad_mask.expand(len(alive), -1),
            )
            logits = model.decode_logits(expanded, tgt_in, segments, depth=depth)[:, -1, :]
            log_probs = F.log_softmax(logits.to(torch.float64), dim=-1)
            log_probs[:, list(BLOCKED_IDS)] = float("-inf")
            if vocab_limit is not None:
                log_probs[:, vocab_limit:] = float("-inf")

            candidates = [h for h in beams if h.finished]
            top_scores, top_ids = log_probs.topk(min(beam, log_probs.size(-1)), dim=-1)
            for row, hyp in enumerate(alive):
                for score, token in zip(top_scores[row].tolist(), top_ids[row].tolist()):
                    if token == EOS_ID:
                        candidates.append(
                            Hypothesis(list(hyp.tokens), hyp.prefix_len, hyp.score + score, True,
                                       list(hyp.segments))
                        )
                    else:
                        candidates.append(
                            Hypothesis(hyp.tokens + [token], hyp.prefix_len, hyp.score + score, False,
                                       hyp.segments + [CURRENT_SEGMENT])
                        )
            order = sorted(range(len(candidates)), key=lambda i: (-candidates[i].score, i))
            beams = [candidates[i] for i in order[:beam]]

    best = max(range(len(beams)), key=lambda i: (beams[i].score, -i))
    return beams[best]


def decode_variant(
    model: DocumentTransformer,
    variant: ContextVariant,
    beam: int = 1,
    max_len: int = 64,
    memory: Optional[EncoderOutput] = None,
    vocab_limit: Optional[int] = None,
) -> Hypothesis:
    """
    Encode one context variant and decode it behind its forced target prefix.

    max_len bounds the current-sentence tokens; the prefix comes on top.
    vocab_limit is normally the size of the vocabulary the output is read with.
    """
    if memory is None:
        memory = model.encode_option(collate([variant]), variant.option)
    prefix = variant.forced_tgt_prefix
    return decode(
        model,
        memory,
        beam=beam,
        forced_prefix=prefix,
        max_len=min(len(prefix) + max_len, model.config.max_positions),
        depth=model.decoder_depth(variant.option),
        prefix_segments=variant.tgt_segments[: len(prefix)],
        vocab_limit=vocab_limit,
    )
