from typing import Dict, List, Optional, Sequence

import torch

from adaptive_docmt.corpus.variants import CURRENT_SEGMENT, ContextVariant
from adaptive_docmt.corpus.vocabulary import PAD_ID


def pad_sequences(sequences: Sequence[Sequence[int]], value: int) -> torch.Tensor:
    width = max((len(seq) for seq in sequences), default=0)
    batch = torch.full((len(sequences), width), value, dtype=torch.long)
    for row, seq in enumerate(sequences):
        if seq:
            batch[row, : len(seq)] = torch.tensor(list(seq), dtype=torch.long)
    return batch


def pad_masks(sequences: Sequence[Sequence]) -> torch.Tensor:
    width = max((len(seq) for seq in sequences), default=0)
    mask = torch.ones((len(sequences), width), dtype=torch.bool)
    for row, seq in enumerate(sequences):
        mask[row, : len(seq)] = False
    return mask


def collate(variants: List[ContextVariant]) -> Dict[str, Optional[torch.Tensor]]:
    """
    Pad one option's variants of a batch into model inputs.

    Padding positions are True in the *_pad_mask tensors and never scored.
    """
    decoder = [v.decoder_inputs() for v in variants]
    batch = {
        "option": variants[0].option if variants else None,
        "src_ids": pad_sequences([v.src_ids for v in variants], PAD_ID),
        "src_segments": pad_sequences([v.src_segments for v in variants], CURRENT_SEGMENT),
        "src_pad_mask": pad_masks([v.src_ids for v in variants]),
        "tgt_in": pad_sequences([d[0] for d in decoder], PAD_ID),
        "tgt_in_segments": pad_sequences([d[1] for d in decoder], CURRENT_SEGMENT),
        "tgt_out": pad_sequences([v.tgt_ids for v in variants], PAD_ID),
        "tgt_pad_mask": pad_masks([v.tgt_ids for v in variants]),
        "loss_mask": pad_sequences([tuple(int(m) for m in v.tgt_loss_mask) for v in variants], 0).bool(),
        "ctx_ids": None,
        "ctx_segments": None,
        "ctx_pad_mask": None,
    }
    if variants and variants[0].ctx_ids:
        batch["ctx_ids"] = pad_sequences([v.ctx_ids for v in variants], PAD_ID)
        batch["ctx_segments"] = pad_sequences([v.ctx_segments for v in variants], CURRENT_SEGMENT)
        batch["ctx_pad_mask"] = pad_masks([v.ctx_ids for v in variants])
    return batch
