from dataclasses import replace
from typing import List, Tuple

import torch

from adaptive_docmt.corpus.variants import CURRENT_SEGMENT, ContextVariant
from adaptive_docmt.corpus.vocabulary import MASK_ID, RESERVED
from adaptive_docmt.utils.app_exception import ConfigurationError

MASK_REPLACE = 0.8
RANDOM_REPLACE = 0.1


def apply_source_mask(
    variant: ContextVariant,
    rng: torch.Generator,
    mask_rate: float,
    vocab_size: int,
) -> Tuple[ContextVariant, List[int], List[int]]:
    """
    BERT-style source masking over current-sentence tokens.

    Each eligible position is selected with probability mask_rate; a selected
    token becomes <mask> 80% of the time, a random task token 10% and stays
    unchanged 10%. The same number of draws is taken whatever the outcome,
    so the generator stream depends only on the eligible count.

    Returns the masked variant, the selected positions and their original ids.
    """
    if not 0.0 <= mask_rate < 1.0:
        raise ConfigurationError(f"mask_rate {mask_rate} must be in [0, 1)")
    first_task_id = len(RESERVED)
    eligible = [
        i for i, (token, segment) in enumerate(zip(variant.src_ids, variant.src_segments))
        if segment == CURRENT_SEGMENT and token >= first_task_id
    ]
    if not eligible or mask_rate == 0.0:
        return variant, [], []

    n = len(eligible)
    selected = torch.rand(n, generator=rng, dtype=torch.float64) < mask_rate
    action = torch.rand(n, generator=rng, dtype=torch.float64)
    random_ids = torch.randint(first_task_id, max(vocab_size, first_task_id + 1), (n,), generator=rng)

    src_ids = list(variant.src_ids)
    positions, originals = [], []
    for k, position in enumerate(eligible):
        if not selected[k]:
            continue
        positions.append(position)
        originals.append(src_ids[position])
        if action[k] < MASK_REPLACE:
            src_ids[position] = MASK_ID
        elif action[k] < MASK_REPLACE + RANDOM_REPLACE:
            src_ids[position] = int(random_ids[k])

    masked = replace(variant, src_ids=tuple(src_ids))
    if variant.ctx_ids == variant.src_ids:
        # self-context must not leak the masked tokens
        masked = replace(masked, ctx_ids=tuple(src_ids))
    return masked, positions, originals
