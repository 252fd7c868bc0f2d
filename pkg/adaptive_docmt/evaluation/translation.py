"""
Corpus translation in one of three context modes, with decode timing.

sentence  every sentence uses the empty-context option
full      every sentence uses the option carrying the most context
adaptive  the predictor picks the option per sentence

Sentences are translated one at a time in document order; the Concatenate
model's previous-target prefix is the hypothesis already produced for the
previous sentence.
"""
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import torch

from adaptive_docmt.corpus.batching import collate
from adaptive_docmt.corpus.document_corpus import DocumentCorpus
from adaptive_docmt.corpus.variants import build_variants
from adaptive_docmt.corpus.vocabulary import Vocabulary
from adaptive_docmt.model.decoding import decode_variant
from adaptive_docmt.model.transformer import DocumentTransformer
from adaptive_docmt.predictor.context_predictor import PredictorHead, pool, select_option
from adaptive_docmt.utils.app_exception import ApplicationException, ConfigurationError
from adaptive_docmt.utils.logger import format_record, logger

log = logger(__name__)

SENTENCE_MODE = "sentence"
FULL_MODE = "full"
ADAPTIVE_MODE = "adaptive"
MODES = (SENTENCE_MODE, FULL_MODE, ADAPTIVE_MODE)


@dataclass
class TimingRow:
    mode: str
    sentences: int = 0
    source_tokens: int = 0
    target_tokens: int = 0
    predictor_tokens: int = 0
    seconds: float = 0.0
    failures: int = 0

    @property
    def total_tokens(self) -> int:
        """Tokens of the translation pass: encoded source side plus decoded target side."""
        return self.source_tokens + self.target_tokens


@dataclass
class TimingReport:
    rows: List[TimingRow] = field(default_factory=list)

    def format_table(self) -> str:
        header = (
            f"{'mode':<10}  {'sentences':>9}  {'src_tokens':>10}  {'tgt_tokens':>10}  "
            f"{'all_tokens':>10}  {'pred_tokens':>11}  {'seconds':>10}"
        )
        lines = [header]
        for row in self.rows:
            lines.append(
                f"{row.mode:<10}  {row.sentences:>9d}  {row.source_tokens:>10d}  {row.target_tokens:>10d}  "
                f"{row.total_tokens:>10d}  {row.predictor_tokens:>11d}  {row.seconds:>10.3f}"
            )
        return "\n".join(lines)

    def records(self) -> List[str]:
        return [
            format_record(
                "timing",
                mode=row.mode,
                sentences=row.sentences,
                source_tokens=row.source_tokens,
                target_tokens=row.target_tokens,
                all_tokens=row.total_tokens,
                predictor_tokens=row.predictor_tokens,
                seconds=row.seconds,
                failures=row.failures,
            )
            for row in self.rows
        ]


@dataclass
class TranslationResult:
    hypotheses: List[List[List[str]]]
    options: List[List[int]]
    timing: TimingRow
    failures: List[Tuple[int, int, str]] = field(default_factory=list)

    @property
    def sentences(self) -> List[List[str]]:
        return [sentence for document in self.hypotheses for sentence in document]


def _encoded_tokens(variant) -> int:
    return len(variant.src_ids) + len(variant.ctx_ids)


def translate_corpus(
    corpus: DocumentCorpus,
    model: DocumentTransformer,
    vocabulary: Vocabulary,
    mode: str = ADAPTIVE_MODE,
    predictor: Optional[PredictorHead] = None,
    beam: int = 1,
    max_len: int = 64,
) -> TranslationResult:
    """
    Translate every sentence of the corpus.

    A sentence that fails to decode yields an empty hypothesis and a failure
    entry; the run continues. Wall time covers the decode loop only.
    """
    if mode not in MODES:
        raise ConfigurationError(f"unknown translation mode '{mode}', expected one of {MODES}")
    if mode == ADAPTIVE_MODE and predictor is None:
        raise ConfigurationError("adaptive translation needs a checkpoint with a context predictor")
    config = model.config
    model.eval()
    if predictor is not None:
        predictor.eval()

    row = TimingRow(mode)
    hypotheses, options, failures = [], [], []
    start = time.perf_counter()
    with torch.no_grad():
        for doc_idx, document in enumerate(corpus.documents):
            doc_hypotheses, doc_options = [], []
            previous: Optional[List[str]] = None
            for sent_idx in range(len(document)):
                option = config.full_option if mode == FULL_MODE else config.empty_option
                try:
                    variants = build_variants(
                        corpus, vocabulary, doc_idx, sent_idx, config.variant, previous_translation=previous
                    )
                    memory = None
                    if mode == ADAPTIVE_MODE:
                        empty = variants[config.empty_option]
                        row.predictor_tokens += _encoded_tokens(empty)
                        memory = model.encode_option(collate([empty]), config.empty_option)
                        option = int(select_option(pool(memory), predictor)[0])
                        if option != config.empty_option:
                            memory = None
                    variant = variants[option]
                    row.source_tokens += _encoded_tokens(variant)
                    hypothesis = decode_variant(
                        model, variant, beam=beam, max_len=max_len, memory=memory, vocab_limit=len(vocabulary)
                    )
                    tokens = vocabulary.decode(hypothesis.current)
                    row.target_tokens += len(hypothesis.tokens)
                except ApplicationException as error:
                    log.warning(f"document {doc_idx} sentence {sent_idx}: {error.message}")
                    failures.append((doc_idx, sent_idx, error.message))
                    tokens = []
                row.sentences += 1
                doc_hypotheses.append(tokens)
                doc_options.append(option)
                previous = tokens
            hypotheses.append(doc_hypotheses)
            options.append(doc_options)
    row.seconds = time.perf_counter() - start
    row.failures = len(failures)
    log.info(format_record("translate", mode=mode, sentences=row.sentences, failures=row.failures))
    return TranslationResult(hypotheses, options, row, failures)


def timing_report(
    corpus: DocumentCorpus,
    model: DocumentTransformer,
    vocabulary: Vocabulary,
    predictor: Optional[PredictorHead] = None,
    beam: int = 1,
    max_len: int = 64,
) -> TimingReport:
    """Sequential batch-size-one translation in every mode the checkpoint supports."""
    modes = MODES if predictor is not None else (SENTENCE_MODE, FULL_MODE)
    return TimingReport(
        [
            translate_corpus(corpus, model, vocabulary, mode, predictor, beam, max_len).timing
            for mode in modes
        ]
    )
