import pytest
import torch

from adaptive_docmt.evaluation.selection import SelectionStats, selection_stats, stats_from_choices
from adaptive_docmt.model.model_config import CONCATENATE, CONTEXT_UNIT
from adaptive_docmt.predictor.context_predictor import PredictorHead
from adaptive_docmt.utils.app_exception import ConfigurationError, OptionError
from adaptive_docmt.utils.logger import parse_record
from test_fixtures import tiny_model, toy_corpus, toy_vocabulary  # noqa F401

REPORTED_COUNTS = [336, 578, 322, 1035]


def biased_predictor(n_options, favourite, d_model=8):
    predictor = PredictorHead(d_model, n_options).to(torch.float64)
    with torch.no_grad():
        predictor.b[favourite] = 10.0
    return predictor


@pytest.mark.unit
class TestSelectionStats:
    def test_percentages(self):
        stats = stats_from_choices([], CONCATENATE)
        stats = SelectionStats(stats.names, REPORTED_COUNTS)
        assert stats.total == 2271
        assert stats.percentages == [14.80, 25.45, 14.18, 45.57]

    def test_table(self):
        stats = SelectionStats(["non||source||non", "pre||source||non", "non||source||pos", "pre||source||pos"], REPORTED_COUNTS)
        lines = stats.format_table().splitlines()
        assert lines[0].split() == ["context", "num", "percentage"]
        assert lines[2].split() == ["pre||source||non", "578", "25.45%"]
        assert lines[-1].split() == ["total", "2271", "100.00%"]

    def test_records(self):
        records = SelectionStats(["previous", "next", "empty"], [1, 1, 2]).records()
        kind, fields = parse_record(records[2])
        assert kind == "selection"
        assert fields["name"] == "empty" and fields["num"] == "2"
        assert parse_record(records[-1]) == ("selection_total", {"num": "4"})

    def test_no_choices(self):
        stats = stats_from_choices([], CONTEXT_UNIT)
        assert stats.percentages == [0.0, 0.0, 0.0]

    def test_choice_out_of_range(self):
        with pytest.raises(OptionError):
            stats_from_choices([0, 3], CONTEXT_UNIT)

    def test_names_and_counts_must_pair(self):
        with pytest.raises(ConfigurationError):
            SelectionStats(["previous"], [1, 2])


@pytest.mark.unit
class TestPredictedSelection:
    @pytest.mark.parametrize("variant,favourite", [(CONCATENATE, 0), (CONTEXT_UNIT, 1)])
    def test_biased_predictor(self, toy_corpus, toy_vocabulary, variant, favourite):
        model = tiny_model(variant)
        stats = selection_stats(toy_corpus, model, biased_predictor(model.config.n_options, favourite), toy_vocabulary)
        assert stats.total == toy_corpus.sentence_count
        assert stats.counts[favourite] == toy_corpus.sentence_count
        assert stats.percentages[favourite] == 100.0

    def test_predictor_must_match_model(self, toy_corpus, toy_vocabulary):
        with pytest.raises(ConfigurationError):
            selection_stats(toy_corpus, tiny_model(CONCATENATE), biased_predictor(3, 0), toy_vocabulary)
