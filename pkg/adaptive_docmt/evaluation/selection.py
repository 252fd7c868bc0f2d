"""Statistics of the context predictor's option choices."""
from dataclasses import dataclass
from typing import List, Sequence

import torch

from adaptive_docmt.corpus.batching import collate
from adaptive_docmt.corpus.document_corpus import DocumentCorpus
from adaptive_docmt.corpus.variants import OPTION_NAMES, build_variants
from adaptive_docmt.corpus.vocabulary import Vocabulary
from adaptive_docmt.model.transformer import DocumentTransformer
from adaptive_docmt.predictor.context_predictor import PredictorHead, pool, select_option
from adaptive_docmt.utils.app_exception import ConfigurationError, EmptyInputError, OptionError
from adaptive_docmt.utils.logger import format_record


@dataclass
class SelectionStats:
    names: List[str]
    counts: List[int]

    def __post_init__(self):
        if len(self.names) != len(self.counts):
            raise ConfigurationError("every option needs a name and a count")

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def percentages(self) -> List[float]:
        """Counts as percentages, rounded to two decimals."""
        if self.total == 0:
            return [0.0] * len(self.counts)
        return [round(100.0 * count / self.total, 2) for count in self.counts]

    def format_table(self) -> str:
        width = max(len("context"), *(len(name) for name in self.names))
        lines = [f"{'context':<{width}}  {'num':>8}  {'percentage':>10}"]
        for name, count, percentage in zip(self.names, self.counts, self.percentages):
            lines.append(f"{name:<{width}}  {count:>8d}  {percentage:>9.2f}%")
        lines.append(f"{'total':<{width}}  {self.total:>8d}  {100.0:>9.2f}%")
        return "\n".join(lines)

    def records(self) -> List[str]:
        return [
            format_record("selection", option=option, name=name, num=count, percentage=percentage)
            for option, (name, count, percentage) in enumerate(zip(self.names, self.counts, self.percentages))
        ] + [format_record("selection_total", num=self.total)]


def stats_from_choices(choices: Sequence[int], variant_kind: str) -> SelectionStats:
    names = list(OPTION_NAMES[variant_kind])
    counts = [0] * len(names)
    for choice in choices:
        if not 0 <= choice < len(names):
            raise OptionError(choice, len(names))
        counts[choice] += 1
    return SelectionStats(names, counts)


def predict_options(
    model: DocumentTransformer,
    predictor: PredictorHead,
    corpus: DocumentCorpus,
    vocabulary: Vocabulary,
) -> List[int]:
    """argmax option of every corpus sentence, in corpus order."""
    config = model.config
    if predictor.n_options != config.n_options:
        raise ConfigurationError(
            f"predictor has {predictor.n_options} options, the {config.variant} model {config.n_options}"
        )
    empty = config.empty_option
    model.eval()
    choices = []
    with torch.no_grad():
        for doc_idx, sent_idx, _ in corpus.sentences():
            variant = build_variants(corpus, vocabulary, doc_idx, sent_idx, config.variant)[empty]
            memory = model.encode_option(collate([variant]), empty)
            choices.append(int(select_option(pool(memory), predictor)[0]))
    return choices


def selection_stats(
    corpus: DocumentCorpus,
    model: DocumentTransformer,
    predictor: PredictorHead,
    vocabulary: Vocabulary,
) -> SelectionStats:
    if corpus.sentence_count == 0:
        raise EmptyInputError("no sentences to select options for")
    return stats_from_choices(predict_options(model, predictor, corpus, vocabulary), model.config.variant)
