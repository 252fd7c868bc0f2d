"""Corpus-level BLEU-4 over pre-tokenised sentences."""
from dataclasses import dataclass
from typing import List, Sequence

from sacrebleu.metrics import BLEU

from adaptive_docmt.utils.app_exception import ConfigurationError, EmptyInputError

MAX_ORDER = 4


@dataclass
class BleuScore:
    score: float
    precisions: List[float]
    brevity_penalty: float
    hyp_len: int
    ref_len: int

    def record_fields(self):
        return {
            "bleu": self.score,
            "p1": self.precisions[0],
            "p2": self.precisions[1],
            "p3": self.precisions[2],
            "p4": self.precisions[3],
            "bp": self.brevity_penalty,
            "hyp_len": self.hyp_len,
            "ref_len": self.ref_len,
        }


def _scorer(smooth: bool) -> BLEU:
    # inputs are already tokenised: no sacrebleu tokenizer, no effective order
    if smooth:
        return BLEU(tokenize="none", smooth_method="add-k", smooth_value=1, max_ngram_order=MAX_ORDER)
    return BLEU(tokenize="none", smooth_method="none", max_ngram_order=MAX_ORDER)


def bleu_score(
    hypotheses: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    smooth: bool = False,
) -> BleuScore:
    """
    Clipped n-gram precisions for n = 1..4 and the brevity penalty, all
    accumulated over the corpus before the geometric mean is taken.
    """
    if len(hypotheses) != len(references):
        raise ConfigurationError(
            f"{len(hypotheses)} hypotheses do not pair with {len(references)} references"
        )
    if not hypotheses:
        raise EmptyInputError("cannot score an empty corpus")
    result = _scorer(smooth).corpus_score(
        [" ".join(hypothesis) for hypothesis in hypotheses],
        [[" ".join(reference) for reference in references]],
    )
    return BleuScore(
        score=float(result.score),
        precisions=[float(p) for p in result.precisions],
        brevity_penalty=float(result.bp),
        hyp_len=int(result.sys_len),
        ref_len=int(result.ref_len),
    )


def corpus_bleu(
    hypotheses: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    smooth: bool = False,
) -> float:
    """BLEU in [0, 100]; smooth enables add-one smoothing of the n > 1 precisions."""
    return bleu_score(hypotheses, references, smooth).score
