"""
Context variants: the concrete model inputs of every context option of one
source sentence.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from adaptive_docmt.corpus.document_corpus import DocumentCorpus
from adaptive_docmt.corpus.vocabulary import BOS_ID, EOS_ID, SEP_ID, Vocabulary
from adaptive_docmt.model.model_config import (
    CONCAT_DEPTH_DELTAS,
    CONCATENATE,
    CONTEXT_UNIT,
    VARIANT_OPTIONS,
)
from adaptive_docmt.utils.app_exception import ConfigurationError, EmptyInputError

PRE_SEGMENT, CURRENT_SEGMENT, POST_SEGMENT, SEPARATOR_SEGMENT = 0, 1, 2, 3

OPTION_NAMES = {
    CONCATENATE: ("non||source||non", "pre||source||non", "non||source||pos", "pre||source||pos"),
    CONTEXT_UNIT: ("previous", "next", "empty"),
}

# smallest option carrying the context a sentence was generated to need
NEEDS_TO_OPTION = {
    CONCATENATE: {"none": 0, "pre": 1, "pos": 2, "both": 3},
    CONTEXT_UNIT: {"none": 2, "pre": 0, "pos": 1},
}


@dataclass(frozen=True)
class ContextVariant:
    option: int
    src_ids: Tuple[int, ...]
    src_segments: Tuple[int, ...]
    tgt_ids: Tuple[int, ...]
    tgt_segments: Tuple[int, ...]
    tgt_loss_mask: Tuple[bool, ...]
    forced_tgt_prefix: Tuple[int, ...] = ()
    dec_depth_delta: int = 0
    # context-unit stream input; empty for the concatenate model
    ctx_ids: Tuple[int, ...] = ()
    ctx_segments: Tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.tgt_loss_mask) != len(self.tgt_ids):
            raise ConfigurationError("tgt_loss_mask and tgt_ids differ in length")
        if not any(self.tgt_loss_mask):
            raise EmptyInputError("variant scores no target position")
        if self.dec_depth_delta not in (0, 1, 2):
            raise ConfigurationError(f"dec_depth_delta {self.dec_depth_delta} not in 0..2")

    def decoder_inputs(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        """Teacher-forced decoder input `<bos> + tgt_ids[:-1]` and its segments."""
        first = self.tgt_segments[0] if self.tgt_segments else CURRENT_SEGMENT
        return (BOS_ID,) + self.tgt_ids[:-1], (first,) + self.tgt_segments[:-1]

    @property
    def current_target(self) -> Tuple[int, ...]:
        """Current-sentence target ids without the closing <eos>."""
        ids = [t for t, keep in zip(self.tgt_ids, self.tgt_loss_mask) if keep]
        return tuple(ids[:-1]) if ids and ids[-1] == EOS_ID else tuple(ids)


def check_variant_kind(variant_kind: str) -> str:
    if variant_kind not in VARIANT_OPTIONS:
        raise ConfigurationError(f"unknown variant kind '{variant_kind}'")
    return variant_kind


def _target_side(prefix: Sequence[int], current: Sequence[int]):
    prefix_ids = list(prefix) + [SEP_ID] if prefix else []
    tgt_ids = prefix_ids + list(current) + [EOS_ID]
    segments = (
        ([PRE_SEGMENT] * len(prefix) + [SEPARATOR_SEGMENT] if prefix else [])
        + [CURRENT_SEGMENT] * (len(current) + 1)
    )
    mask = [False] * len(prefix_ids) + [True] * (len(current) + 1)
    return tuple(prefix_ids), tuple(tgt_ids), tuple(segments), tuple(mask)


def build_variants(
    corpus: DocumentCorpus,
    vocabulary: Vocabulary,
    doc_idx: int,
    sent_idx: int,
    variant_kind: str,
    previous_translation: Optional[Sequence[str]] = None,
) -> List[ContextVariant]:
    """
    Build the N context variants of one sentence in fixed option order.

    Missing neighbours at document boundaries fall back to the empty context
    while keeping the option id. `previous_translation` replaces the gold
    previous target as forced decoder prefix at inference.
    """
    check_variant_kind(variant_kind)
    if not 0 <= doc_idx < len(corpus.documents):
        raise EmptyInputError(f"no document at index {doc_idx}")
    document = corpus.documents[doc_idx]
    if not 0 <= sent_idx < len(document):
        raise EmptyInputError(f"no sentence at index {sent_idx} in document {doc_idx}")

    pair = document[sent_idx]
    source = vocabulary.encode(pair.source)
    target = vocabulary.encode(pair.target)
    previous = document[sent_idx - 1] if sent_idx > 0 else None
    following = document[sent_idx + 1] if sent_idx + 1 < len(document) else None
    pre_source = vocabulary.encode(previous.source) if previous else []
    post_source = vocabulary.encode(following.source) if following else []
    if previous is None:
        pre_target = []
    elif previous_translation is not None:
        pre_target = vocabulary.encode(previous_translation)
    else:
        pre_target = vocabulary.encode(previous.target)

    if variant_kind == CONCATENATE:
        return [
            _concat_variant(option, source, target, pre_source, post_source, pre_target, previous is not None)
            for option in range(VARIANT_OPTIONS[CONCATENATE])
        ]
    return [
        _context_unit_variant(option, source, target, pre_source, post_source)
        for option in range(VARIANT_OPTIONS[CONTEXT_UNIT])
    ]


def _concat_variant(option, source, target, pre_source, post_source, pre_target, has_previous):
    use_pre = option in (1, 3) and bool(pre_source)
    use_post = option in (2, 3) and bool(post_source)
    src_ids, src_segments = [], []
    if use_pre:
        src_ids += pre_source + [SEP_ID]
        src_segments += [PRE_SEGMENT] * len(pre_source) + [SEPARATOR_SEGMENT]
    src_ids += source
    src_segments += [CURRENT_SEGMENT] * len(source)
    if use_post:
        src_ids += [SEP_ID] + post_source
        src_segments += [SEPARATOR_SEGMENT] + [POST_SEGMENT] * len(post_source)
    src_ids.append(EOS_ID)
    src_segments.append(CURRENT_SEGMENT)

    # post context stays on the source side; the target carries only the past
    prefix = pre_target if use_pre and has_previous else []
    forced, tgt_ids, tgt_segments, mask = _target_side(prefix, target)
    return ContextVariant(
        option=option,
        src_ids=tuple(src_ids),
        src_segments=tuple(src_segments),
        tgt_ids=tgt_ids,
        tgt_segments=tgt_segments,
        tgt_loss_mask=mask,
        forced_tgt_prefix=forced,
        dec_depth_delta=CONCAT_DEPTH_DELTAS[option],
    )


def _context_unit_variant(option, source, target, pre_source, post_source):
    src_ids = tuple(source) + (EOS_ID,)
    src_segments = (CURRENT_SEGMENT,) * len(src_ids)
    if option == 0 and pre_source:
        ctx_ids = tuple(pre_source) + (EOS_ID,)
        ctx_segments = (PRE_SEGMENT,) * len(ctx_ids)
    elif option == 1 and post_source:
        ctx_ids = tuple(post_source) + (EOS_ID,)
        ctx_segments = (POST_SEGMENT,) * len(ctx_ids)
    else:
        # empty context is the source sentence itself
        ctx_ids, ctx_segments = src_ids, src_segments
    _, tgt_ids, tgt_segments, mask = _target_side([], target)
    return ContextVariant(
        option=option,
        src_ids=src_ids,
        src_segments=src_segments,
        tgt_ids=tgt_ids,
        tgt_segments=tgt_segments,
        tgt_loss_mask=mask,
        ctx_ids=ctx_ids,
        ctx_segments=ctx_segments,
    )


def needed_option(needs: Optional[str], variant_kind: str) -> Optional[int]:
    """Option matching a generator label, or None when no single option suffices."""
    if needs is None:
        return None
    return NEEDS_TO_OPTION[check_variant_kind(variant_kind)].get(needs)
