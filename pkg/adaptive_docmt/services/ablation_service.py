"""
Ablation suite: finetune from one shared pretrained checkpoint with each
premium removed in turn, then score adaptive translation of a test corpus.
"""
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

from adaptive_docmt.corpus.document_corpus import read_corpus
from adaptive_docmt.evaluation.bleu import corpus_bleu
from adaptive_docmt.evaluation.synthetic_accuracy import synthetic_accuracy
from adaptive_docmt.evaluation.translation import ADAPTIVE_MODE, translate_corpus
from adaptive_docmt.model.checkpoint import build_model, build_predictor, load_checkpoint
from adaptive_docmt.operation import Operation
from adaptive_docmt.services.service import Service
from adaptive_docmt.services.training_service import DOCUMENT_KEYS, OPTIMIZER_KEYS, pick
from adaptive_docmt.training.train_config import DOC_FINETUNE, TRAIN_DEFAULTS, TrainConfig
from adaptive_docmt.training.trainer import finetune_document
from adaptive_docmt.utils.app_exception import ApplicationException, ConfigurationError
from adaptive_docmt.utils.logger import format_record, logger, write_report_file

log = logger(__name__)

ABLATION_KEYS = tuple(key for key in DOCUMENT_KEYS if not key.startswith("no_"))
REMOVAL_KEYS = ("no_uni", "no_div", "no_doc_tips")

ABLATE_DEFAULTS = {
    **pick(TRAIN_DEFAULTS, OPTIMIZER_KEYS + ABLATION_KEYS + REMOVAL_KEYS),
    "corpus": "",
    "test_corpus": "",
    "pretrained": "",
    "cumulative": False,
    "beam": 1,
    "max_len": 64,
    "output": "",
}

# removal rows in report order; each switch names the TrainConfig flag it sets
ABLATION_ROWS = (
    ("full", ()),
    ("w/o L_uni", ("no_uni",)),
    ("w/o L_div", ("no_div",)),
    ("w/o Doc tips", ("no_doc_tips",)),
)


def ablation_plan(cumulative: bool = False, removals: Sequence[str] = ()) -> List[tuple]:
    """
    (row name, flags) pairs in report order; the cumulative reading keeps
    earlier removals on.

    removals names the rows to run beside "full" by their switch
    (no_uni, no_div, no_doc_tips); none given runs every row.
    """
    unknown = set(removals) - set(REMOVAL_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown ablation removals {sorted(unknown)}")
    selected = [
        (name, switches) for name, switches in ABLATION_ROWS
        if not switches or not removals or set(switches) & set(removals)
    ]
    if not cumulative:
        return [(name, dict.fromkeys(switches, True)) for name, switches in selected]
    plan, removed = [], {}
    for name, switches in selected:
        removed.update(dict.fromkeys(switches, True))
        plan.append((name, dict(removed)))
    return plan


@dataclass
class AblationRow:
    name: str
    bleu: Optional[float] = None
    ambiguous_accuracy: Optional[float] = None
    agreement: Optional[float] = None
    error: Optional[str] = None

    @property
    def status(self) -> str:
        return "ok" if self.error is None else "failed"


@dataclass
class AblationTable:
    rows: List[AblationRow]

    def format_table(self) -> str:
        width = max(len("system"), *(len(row.name) for row in self.rows))

        def cell(value):
            return f"{value:>8.2f}" if value is not None else f"{'-':>8}"

        lines = [f"{'system':<{width}}  {'BLEU':>8}  {'amb_acc':>8}  {'agree':>8}  status"]
        for row in self.rows:
            lines.append(
                f"{row.name:<{width}}  {cell(row.bleu)}  {cell(row.ambiguous_accuracy)}  "
                f"{cell(row.agreement)}  {row.status}"
            )
        return "\n".join(lines)

    def records(self) -> List[str]:
        records = []
        for row in self.rows:
            fields = {"system": row.name.replace(" ", "_"), "status": row.status}
            for key in ("bleu", "ambiguous_accuracy", "agreement"):
                if getattr(row, key) is not None:
                    fields[key] = getattr(row, key)
            records.append(format_record("ablation", **fields))
        return records


def run_row(name, flags, train_corpus, test_corpus, pretrained, train_values, beam, max_len) -> AblationRow:
    config = TrainConfig({**train_values, **flags, "stage": DOC_FINETUNE})
    checkpoint = finetune_document(train_corpus, pretrained, config)
    model = build_model(checkpoint)
    predictor = build_predictor(checkpoint)
    result = translate_corpus(
        test_corpus, model, checkpoint.vocabulary, ADAPTIVE_MODE, predictor, beam, max_len
    )
    references = [list(pair.target) for _, _, pair in test_corpus.sentences()]
    row = AblationRow(name, bleu=corpus_bleu(result.sentences, references))
    if test_corpus.has_labels:
        accuracy = synthetic_accuracy(result.hypotheses, test_corpus, result.options, model.config.variant)
        row.ambiguous_accuracy = accuracy.ambiguous_accuracy
        row.agreement = accuracy.agreement
    return row


def ablation_suite(params: Dict[str, Any]) -> AblationTable:
    """
    One finetune + adaptive evaluation per ablation row, in report order.

    A failing row is reported as failed; the remaining rows still run.
    """
    train_corpus = read_corpus(params["corpus"])
    test_corpus = read_corpus(params["test_corpus"] or params["corpus"])
    pretrained = load_checkpoint(params["pretrained"])
    train_values = pick(params, OPTIMIZER_KEYS + ABLATION_KEYS)

    rows = []
    removals = [key for key in REMOVAL_KEYS if params.get(key)]
    for name, flags in ablation_plan(params["cumulative"], removals):
        log.info(format_record("ablation_start", system=name.replace(" ", "_"), **flags))
        try:
            rows.append(
                run_row(name, flags, train_corpus, test_corpus, pretrained, train_values,
                        params["beam"], params["max_len"])
            )
        except ApplicationException as error:
            log.error(f"ablation row '{name}' failed: {error}")
            rows.append(AblationRow(name, error=error.message))
    return AblationTable(rows)


class AblationService(Service):
    def execute(self, operation: Operation) -> str:
        table = ablation_suite(operation.params)
        report = "\n".join([table.format_table(), *table.records()])
        if operation.params["output"]:
            write_report_file(operation.params["output"], report)
        return report
