import pytest
import torch

from adaptive_docmt.corpus.document_corpus import DocumentCorpus
from adaptive_docmt.corpus.synthetic import generate_synthetic_corpus, oracle_translate
from adaptive_docmt.corpus.variants import needed_option
from adaptive_docmt.corpus.vocabulary import Vocabulary
from adaptive_docmt.evaluation.synthetic_accuracy import (
    needed_option_mass,
    selection_agreement,
    synthetic_accuracy,
)
from adaptive_docmt.evaluation.translation import (
    ADAPTIVE_MODE,
    FULL_MODE,
    SENTENCE_MODE,
    timing_report,
    translate_corpus,
)
from adaptive_docmt.model.model_config import CONCATENATE, CONTEXT_UNIT
from adaptive_docmt.predictor.context_predictor import PredictorHead
from adaptive_docmt.utils.app_exception import ConfigurationError, EmptyInputError
from adaptive_docmt.utils.logger import logger
from test_fixtures import (  # noqa F401
    pair,
    synthetic_corpus,
    synthetic_vocab,
    tiny_model,
    toy_corpus,
    toy_vocabulary,
)

log = logger(__name__)


def fitted_model(vocabulary, variant=CONCATENATE, **overrides):
    """Tiny model whose output ids all decode with the corpus vocabulary."""
    return tiny_model(variant, seed=3, vocab_size=len(vocabulary), **overrides)


def biased_predictor(n_options, favourite, d_model=8):
    predictor = PredictorHead(d_model, n_options).to(torch.float64)
    with torch.no_grad():
        predictor.b[favourite] = 10.0
    return predictor


def references(corpus):
    return [[list(p.target) for p in document] for document in corpus.documents]


def needed_options(corpus, variant):
    return [[needed_option(p.needs, variant) for p in document] for document in corpus.documents]


@pytest.mark.unit
class TestTranslateCorpus:
    @pytest.mark.parametrize("variant", [CONCATENATE, CONTEXT_UNIT])
    def test_sentence_mode(self, toy_corpus, toy_vocabulary, variant):
        model = fitted_model(toy_vocabulary, variant)
        result = translate_corpus(toy_corpus, model, toy_vocabulary, SENTENCE_MODE, max_len=6)
        assert [len(document) for document in result.hypotheses] == [3, 2]
        assert len(result.sentences) == toy_corpus.sentence_count
        assert result.options == [[model.config.empty_option] * 3, [model.config.empty_option] * 2]
        assert result.failures == []
        assert result.timing.sentences == 5
        assert result.timing.predictor_tokens == 0
        assert all(len(sentence) <= 6 for sentence in result.sentences)

    def test_full_mode(self, toy_corpus, toy_vocabulary):
        model = fitted_model(toy_vocabulary, CONTEXT_UNIT)
        result = translate_corpus(toy_corpus, model, toy_vocabulary, FULL_MODE, max_len=6)
        assert [option for document in result.options for option in document] == [0] * 5

    def test_deterministic(self, toy_corpus, toy_vocabulary):
        model = fitted_model(toy_vocabulary)
        first = translate_corpus(toy_corpus, model, toy_vocabulary, FULL_MODE, max_len=6)
        second = translate_corpus(toy_corpus, model, toy_vocabulary, FULL_MODE, max_len=6)
        assert first.hypotheses == second.hypotheses

    @pytest.mark.parametrize("variant", [CONCATENATE, CONTEXT_UNIT])
    def test_adaptive_on_empty_matches_sentence_mode(self, toy_corpus, toy_vocabulary, variant):
        model = fitted_model(toy_vocabulary, variant)
        predictor = biased_predictor(model.config.n_options, model.config.empty_option)
        adaptive = translate_corpus(toy_corpus, model, toy_vocabulary, ADAPTIVE_MODE, predictor, max_len=6)
        sentence = translate_corpus(toy_corpus, model, toy_vocabulary, SENTENCE_MODE, max_len=6)
        assert adaptive.hypotheses == sentence.hypotheses
        assert adaptive.timing.predictor_tokens == adaptive.timing.source_tokens

    def test_adaptive_encodes_no_more_than_full(self, toy_corpus, toy_vocabulary):
        model = fitted_model(toy_vocabulary)
        predictor = biased_predictor(4, 1)
        adaptive = translate_corpus(toy_corpus, model, toy_vocabulary, ADAPTIVE_MODE, predictor, max_len=6)
        full = translate_corpus(toy_corpus, model, toy_vocabulary, FULL_MODE, max_len=6)
        assert adaptive.options == [[1, 1, 1], [1, 1]]
        assert adaptive.timing.source_tokens <= full.timing.source_tokens

    def test_failures_do_not_stop_the_run(self, toy_corpus, toy_vocabulary):
        model = fitted_model(toy_vocabulary, max_positions=8)
        result = translate_corpus(toy_corpus, model, toy_vocabulary, FULL_MODE, max_len=4)
        assert result.timing.sentences == 5
        assert result.failures
        assert result.timing.failures == len(result.failures)
        for doc_idx, sent_idx, message in result.failures:
            assert result.hypotheses[doc_idx][sent_idx] == []
            assert message

    def test_model_vocabulary_larger_than_corpus_vocabulary(self, toy_corpus, toy_vocabulary):
        model = tiny_model(CONCATENATE, seed=3)
        with torch.no_grad():
            model.output_projection.bias[len(toy_vocabulary):] = 50.0
        assert model.config.vocab_size > len(toy_vocabulary)
        result = translate_corpus(toy_corpus, model, toy_vocabulary, SENTENCE_MODE, max_len=6)
        assert result.failures == []
        assert all(token in toy_vocabulary for sentence in result.sentences for token in sentence)

    @pytest.mark.parametrize("mode", [SENTENCE_MODE, ADAPTIVE_MODE])
    def test_unencodable_sentence_is_a_failure(self, mode):
        long_source = " ".join(f"w{i % 5}" for i in range(70))
        corpus = DocumentCorpus.from_lists(
            [[pair("le chat dort", "the cat sleeps"), pair(long_source, "x"), pair("il mange", "it eats")]]
        )
        vocabulary = Vocabulary.from_corpus(corpus)
        model = fitted_model(vocabulary)
        predictor = biased_predictor(4, model.config.empty_option)
        result = translate_corpus(corpus, model, vocabulary, mode, predictor, max_len=4)
        assert result.timing.sentences == 3
        assert [(doc_idx, sent_idx) for doc_idx, sent_idx, _ in result.failures] == [(0, 1)]
        assert "max_positions" in result.failures[0][2]
        assert result.hypotheses[0][1] == []
        assert result.options[0] == [model.config.empty_option] * 3

    def test_adaptive_needs_predictor(self, toy_corpus, toy_vocabulary):
        with pytest.raises(ConfigurationError):
            translate_corpus(toy_corpus, fitted_model(toy_vocabulary), toy_vocabulary, ADAPTIVE_MODE)

    def test_unknown_mode(self, toy_corpus, toy_vocabulary):
        with pytest.raises(ConfigurationError):
            translate_corpus(toy_corpus, fitted_model(toy_vocabulary), toy_vocabulary, "greedy")


@pytest.mark.unit
class TestTimingReport:
    def test_rows_per_mode(self, toy_corpus, toy_vocabulary):
        model = fitted_model(toy_vocabulary)
        report = timing_report(toy_corpus, model, toy_vocabulary, biased_predictor(4, 3), max_len=4)
        assert [row.mode for row in report.rows] == [SENTENCE_MODE, FULL_MODE, ADAPTIVE_MODE]
        assert all(row.total_tokens == row.source_tokens + row.target_tokens for row in report.rows)
        assert report.format_table().splitlines()[0].split()[0] == "mode"
        assert len(report.records()) == 3

    def test_without_predictor(self, toy_corpus, toy_vocabulary):
        report = timing_report(toy_corpus, fitted_model(toy_vocabulary), toy_vocabulary, max_len=4)
        assert [row.mode for row in report.rows] == [SENTENCE_MODE, FULL_MODE]


@pytest.mark.unit
class TestSyntheticAccuracy:
    def test_perfect_translation(self, synthetic_corpus):
        result = synthetic_accuracy(references(synthetic_corpus), synthetic_corpus)
        assert result.overall_accuracy == 100.0
        assert result.ambiguous_accuracy == 100.0
        assert result.total_tokens == sum(len(p.target) for _, _, p in synthetic_corpus.sentences())

    def test_context_free_oracle_is_at_chance(self):
        corpus = generate_synthetic_corpus(seed=12, n_docs=150, doc_len=10, vocab_size=64)
        hypotheses = [
            [oracle_translate([p.source for p in document], i, use_context=False) for i in range(len(document))]
            for document in corpus.documents
        ]
        result = synthetic_accuracy(hypotheses, corpus)
        log.info(f"context-free oracle: {result.record()}")
        assert 25.0 < result.ambiguous_accuracy < 50.0
        assert result.overall_accuracy > result.ambiguous_accuracy

    def test_empty_hypotheses_score_zero(self, synthetic_corpus):
        hypotheses = [[[] for _ in document] for document in synthetic_corpus.documents]
        assert synthetic_accuracy(hypotheses, synthetic_corpus).overall_accuracy == 0.0

    @pytest.mark.parametrize("variant", [CONCATENATE, CONTEXT_UNIT])
    def test_agreement_with_needed_options(self, synthetic_corpus, variant):
        options = [
            [option if option is not None else 0 for option in document]
            for document in needed_options(synthetic_corpus, variant)
        ]
        result = synthetic_accuracy(references(synthetic_corpus), synthetic_corpus, options, variant)
        assert result.agreement == 100.0
        assert "both" not in result.agreement_by_needs or variant == CONCATENATE

    def test_agreement_leaves_out_both_for_context_unit(self):
        corpus = DocumentCorpus.from_lists(
            [[pair("x0", "y0", "none"), pair("ab0", "rb0_0", "both"), pair("ap0", "rp0_0", "pre")]]
        )
        rates = selection_agreement([[2, 0, 1]], corpus, CONTEXT_UNIT)
        assert rates == {"all": 0.5, "none": 1.0, "pre": 0.0}

    def test_agreement_needs_variant(self, synthetic_corpus):
        options = [[0] * len(document) for document in synthetic_corpus.documents]
        with pytest.raises(ConfigurationError):
            synthetic_accuracy(references(synthetic_corpus), synthetic_corpus, options)

    def test_unlabelled_corpus(self):
        corpus = DocumentCorpus.from_lists([[pair("a b", "c d")]])
        with pytest.raises(ConfigurationError):
            synthetic_accuracy([[["c", "d"]]], corpus)

    def test_shape_mismatch(self, synthetic_corpus):
        with pytest.raises(ConfigurationError):
            synthetic_accuracy(references(synthetic_corpus)[:-1], synthetic_corpus)

    def test_no_matching_option(self):
        corpus = DocumentCorpus.from_lists([[pair("ab0", "rb0_0", "both")]])
        with pytest.raises(EmptyInputError):
            selection_agreement([[0]], corpus, CONTEXT_UNIT)


@pytest.mark.unit
class TestNeededOptionMass:
    @pytest.mark.parametrize("variant", [CONCATENATE, CONTEXT_UNIT])
    def test_zero_predictor_is_uniform(self, synthetic_corpus, synthetic_vocab, variant):
        model = tiny_model(variant)
        predictor = PredictorHead(8, model.config.n_options).to(torch.float64)
        mass = needed_option_mass(model, predictor, synthetic_corpus, synthetic_vocab)
        assert mass == pytest.approx(1.0 / model.config.n_options, abs=1e-12)

    def test_biased_predictor(self, synthetic_corpus, synthetic_vocab):
        model = tiny_model(CONCATENATE)
        predictor = biased_predictor(4, 0)
        mass = needed_option_mass(model, predictor, synthetic_corpus, synthetic_vocab)
        share_none = sum(p.needs == "none" for _, _, p in synthetic_corpus.sentences()) / synthetic_corpus.sentence_count
        assert mass == pytest.approx(share_none, abs=1e-3)
