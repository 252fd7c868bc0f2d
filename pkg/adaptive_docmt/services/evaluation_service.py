from typing import Any, Dict, List

from adaptive_docmt.corpus.document_corpus import format_documents, read_corpus, read_documents
from adaptive_docmt.evaluation.bleu import bleu_score
from adaptive_docmt.evaluation.selection import selection_stats
from adaptive_docmt.evaluation.synthetic_accuracy import synthetic_accuracy
from adaptive_docmt.evaluation.translation import ADAPTIVE_MODE, timing_report, translate_corpus
from adaptive_docmt.model.checkpoint import build_model, build_predictor, load_checkpoint
from adaptive_docmt.operation import Operation
from adaptive_docmt.services.service import Service
from adaptive_docmt.utils.app_exception import ConfigurationError
from adaptive_docmt.utils.logger import format_record, logger, write_report_file

log = logger(__name__)

TRANSLATE_DEFAULTS = {
    "corpus": "",
    "checkpoint": "",
    "output": "",
    "mode": ADAPTIVE_MODE,
    "beam": 1,
    "max_len": 64,
}
BLEU_DEFAULTS = {"hypotheses": "", "references": "", "smooth": False}
STATS_DEFAULTS = {"corpus": "", "checkpoint": "", "variant": "", "output": ""}
TIMING_DEFAULTS = {"corpus": "", "checkpoint": "", "beam": 1, "max_len": 64, "output": ""}


def load_bundle(path: str):
    """Model, predictor (None when absent) and vocabulary of a checkpoint file."""
    checkpoint = load_checkpoint(path)
    model = build_model(checkpoint)
    predictor = build_predictor(checkpoint) if checkpoint.has_predictor else None
    return model, predictor, checkpoint.vocabulary


def translation_report(result, corpus, variant_kind: str) -> List[str]:
    """Record lines scoring a translation against the corpus targets."""
    references = [list(pair.target) for _, _, pair in corpus.sentences()]
    lines = [
        format_record(
            "translate", mode=result.timing.mode, sentences=result.timing.sentences,
            failures=result.timing.failures,
        ),
        format_record("bleu", **bleu_score(result.sentences, references).record_fields()),
    ]
    if corpus.has_labels:
        accuracy = synthetic_accuracy(result.hypotheses, corpus, result.options, variant_kind)
        lines.append(accuracy.record())
    return lines


class EvaluationService(Service):
    def execute(self, operation: Operation) -> str:
        handlers = {
            "translate": self.translate,
            "bleu": self.bleu,
            "stats": self.stats,
            "timing": self.timing,
        }
        handler = handlers.get(operation.command)
        if handler is None:
            raise ConfigurationError(f"unsupported evaluation command '{operation.command}'")
        return handler(operation.params)

    def translate(self, params: Dict[str, Any]) -> str:
        model, predictor, vocabulary = load_bundle(params["checkpoint"])
        corpus = read_corpus(params["corpus"])
        result = translate_corpus(
            corpus, model, vocabulary, params["mode"], predictor, params["beam"], params["max_len"]
        )
        write_report_file(params["output"], format_documents(result.hypotheses))
        return "\n".join(translation_report(result, corpus, model.config.variant))

    def bleu(self, params: Dict[str, Any]) -> str:
        hypotheses = read_documents(params["hypotheses"])
        corpus = read_corpus(params["references"])
        if [len(document) for document in hypotheses] != [len(document) for document in corpus.documents]:
            raise ConfigurationError("hypotheses and references differ in document structure")
        score = bleu_score(
            [sentence for document in hypotheses for sentence in document],
            [list(pair.target) for _, _, pair in corpus.sentences()],
            smooth=params["smooth"],
        )
        return "\n".join([f"BLEU = {score.score:.2f}", format_record("bleu", **score.record_fields())])

    def stats(self, params: Dict[str, Any]) -> str:
        model, predictor, vocabulary = load_bundle(params["checkpoint"])
        variant = params["variant"].replace("-", "_")
        if variant and variant != model.config.variant:
            raise ConfigurationError(
                f"checkpoint holds a {model.config.variant} model, not {variant}"
            )
        if predictor is None:
            raise ConfigurationError("selection statistics need a checkpoint with a context predictor")
        stats = selection_stats(read_corpus(params["corpus"]), model, predictor, vocabulary)
        report = "\n".join([stats.format_table(), *stats.records()])
        if params["output"]:
            write_report_file(params["output"], report)
        return report

    def timing(self, params: Dict[str, Any]) -> str:
        model, predictor, vocabulary = load_bundle(params["checkpoint"])
        report = timing_report(
            read_corpus(params["corpus"]), model, vocabulary, predictor, params["beam"], params["max_len"]
        )
        text = "\n".join([report.format_table(), *report.records()])
        if params["output"]:
            write_report_file(params["output"], text)
        return text
