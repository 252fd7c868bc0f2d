"""
Scores against the synthetic generator's ground truth: token accuracy on the
words only context can disambiguate, overall token accuracy, and agreement of
selected options with the context each sentence was generated to need.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import torch

from adaptive_docmt.corpus.batching import collate
from adaptive_docmt.corpus.document_corpus import NEEDS, DocumentCorpus
from adaptive_docmt.corpus.synthetic import is_resolution_token
from adaptive_docmt.corpus.variants import build_variants, needed_option
from adaptive_docmt.corpus.vocabulary import Vocabulary
from adaptive_docmt.model.transformer import DocumentTransformer
from adaptive_docmt.predictor.context_predictor import PredictorHead, option_probs, pool
from adaptive_docmt.utils.app_exception import ConfigurationError, EmptyInputError
from adaptive_docmt.utils.logger import format_record


@dataclass
class SyntheticAccuracy:
    ambiguous_accuracy: float
    overall_accuracy: float
    ambiguous_tokens: int
    total_tokens: int
    agreement: Optional[float] = None
    agreement_by_needs: Dict[str, float] = field(default_factory=dict)

    def record_fields(self):
        fields = {
            "ambiguous_accuracy": self.ambiguous_accuracy,
            "overall_accuracy": self.overall_accuracy,
            "ambiguous_tokens": self.ambiguous_tokens,
            "total_tokens": self.total_tokens,
        }
        if self.agreement is not None:
            fields["agreement"] = self.agreement
            for needs, value in self.agreement_by_needs.items():
                fields[f"agreement_{needs}"] = value
        return fields

    def record(self) -> str:
        return format_record("synthetic_accuracy", **self.record_fields())


def _check_shape(documents: Sequence[Sequence], corpus: DocumentCorpus, what: str):
    if len(documents) != len(corpus.documents) or any(
        len(document) != len(reference) for document, reference in zip(documents, corpus.documents)
    ):
        raise ConfigurationError(f"{what} do not line up with the corpus documents")


def selection_agreement(
    options: Sequence[Sequence[int]], corpus: DocumentCorpus, variant_kind: str
) -> Dict[str, float]:
    """
    Share of sentences whose selected option is the one matching their label.

    Labels without a single sufficient option are left out. The result holds
    the overall rate under "all" and one rate per label present.
    """
    _check_shape(options, corpus, "selected options")
    hits = {needs: 0 for needs in NEEDS}
    counts = {needs: 0 for needs in NEEDS}
    for doc_idx, sent_idx, pair in corpus.sentences():
        target = needed_option(pair.needs, variant_kind)
        if target is None:
            continue
        counts[pair.needs] += 1
        hits[pair.needs] += int(options[doc_idx][sent_idx] == target)
    total = sum(counts.values())
    if total == 0:
        raise EmptyInputError("no labelled sentence has a matching option")
    rates = {"all": sum(hits.values()) / total}
    rates.update({needs: hits[needs] / counts[needs] for needs in NEEDS if counts[needs]})
    return rates


def synthetic_accuracy(
    hypotheses: Sequence[Sequence[Sequence[str]]],
    corpus: DocumentCorpus,
    options: Optional[Sequence[Sequence[int]]] = None,
    variant_kind: Optional[str] = None,
) -> SyntheticAccuracy:
    """Position-exact token accuracy against the reference targets, in percent."""
    if not corpus.has_labels:
        raise ConfigurationError("synthetic accuracy needs a corpus with context labels")
    _check_shape(hypotheses, corpus, "hypotheses")

    ambiguous = ambiguous_hits = total = total_hits = 0
    for doc_idx, sent_idx, pair in corpus.sentences():
        hypothesis = hypotheses[doc_idx][sent_idx]
        for position, token in enumerate(pair.target):
            hit = position < len(hypothesis) and hypothesis[position] == token
            total += 1
            total_hits += hit
            if is_resolution_token(token):
                ambiguous += 1
                ambiguous_hits += hit

    result = SyntheticAccuracy(
        ambiguous_accuracy=100.0 * ambiguous_hits / ambiguous if ambiguous else 100.0,
        overall_accuracy=100.0 * total_hits / total,
        ambiguous_tokens=ambiguous,
        total_tokens=total,
    )
    if options is not None:
        if variant_kind is None:
            raise ConfigurationError("selection agreement needs the model variant")
        rates = selection_agreement(options, corpus, variant_kind)
        result.agreement = 100.0 * rates.pop("all")
        result.agreement_by_needs = {needs: 100.0 * rate for needs, rate in rates.items()}
    return result


def needed_option_mass(
    model: DocumentTransformer,
    predictor: PredictorHead,
    corpus: DocumentCorpus,
    vocabulary: Vocabulary,
) -> float:
    """Mean predictor probability on each labelled sentence's matching option."""
    config = model.config
    empty = config.empty_option
    model.eval()
    masses: List[float] = []
    with torch.no_grad():
        for doc_idx, sent_idx, pair in corpus.sentences():
            target = needed_option(pair.needs, config.variant)
            if target is None:
                continue
            variant = build_variants(corpus, vocabulary, doc_idx, sent_idx, config.variant)[empty]
            pi = option_probs(pool(model.encode_option(collate([variant]), empty)), predictor)
            masses.append(float(pi[0, target]))
    if not masses:
        raise EmptyInputError("no labelled sentence has a matching option")
    return sum(masses) / len(masses)
