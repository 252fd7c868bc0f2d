from dataclasses import dataclass
from typing import Any, Callable, Dict, Tuple

from adaptive_docmt.operation import Operation
from adaptive_docmt.services.ablation_service import ABLATE_DEFAULTS, AblationService
from adaptive_docmt.services.corpus_service import GEN_CORPUS_DEFAULTS, CorpusService
from adaptive_docmt.services.evaluation_service import (
    BLEU_DEFAULTS,
    STATS_DEFAULTS,
    TIMING_DEFAULTS,
    TRANSLATE_DEFAULTS,
    EvaluationService,
)
from adaptive_docmt.services.service import Service
from adaptive_docmt.services.training_service import (
    FINETUNE_DEFAULTS,
    GRADCHECK_DEFAULTS,
    PRETRAIN_DEFAULTS,
    TrainingService,
)
from adaptive_docmt.utils.app_exception import ConfigurationError
from adaptive_docmt.utils.logger import format_record, logger

log = logger(__name__)


@dataclass(frozen=True)
class Command:
    name: str
    help: str
    defaults: Dict[str, Any]
    required: Tuple[str, ...]
    service: Callable[[], Service]


COMMANDS: Dict[str, Command] = {
    command.name: command
    for command in (
        Command("gen-corpus", "generate a labelled synthetic corpus",
                GEN_CORPUS_DEFAULTS, ("output",), CorpusService),
        Command("pretrain", "sentence-level pretraining",
                PRETRAIN_DEFAULTS, ("corpus", "checkpoint"), TrainingService),
        Command("finetune", "joint document-level finetuning of model and predictor",
                FINETUNE_DEFAULTS, ("corpus", "pretrained", "checkpoint"), TrainingService),
        Command("translate", "translate a corpus in sentence, full or adaptive mode",
                TRANSLATE_DEFAULTS, ("corpus", "checkpoint", "output"), EvaluationService),
        Command("bleu", "corpus BLEU of a hypotheses file against a corpus",
                BLEU_DEFAULTS, ("hypotheses", "references"), EvaluationService),
        Command("stats", "statistics of the predictor's option choices",
                STATS_DEFAULTS, ("corpus", "checkpoint"), EvaluationService),
        Command("timing", "decode time and token counts per context mode",
                TIMING_DEFAULTS, ("corpus", "checkpoint"), EvaluationService),
        Command("gradcheck", "finite-difference check of the training gradients",
                GRADCHECK_DEFAULTS, (), TrainingService),
        Command("ablate", "finetune and evaluate the ablation rows",
                ABLATE_DEFAULTS, ("corpus", "pretrained"), AblationService),
    )
}


def get_command(name: str) -> Command:
    command = COMMANDS.get(name)
    if command is None:
        raise ConfigurationError(f"unknown command '{name}', expected one of {sorted(COMMANDS)}")
    return command


class CommandService(Service):
    """Checks the resolved parameters of a command and hands it to its service."""

    def execute(self, operation: Operation) -> str:
        command = get_command(operation.command)
        missing = [key for key in command.required if not operation.params.get(key)]
        if missing:
            flags = ", ".join("--" + key.replace("_", "-") for key in missing)
            raise ConfigurationError(f"{operation.command} requires {flags}")
        log.info(format_record("config", command=operation.command, **operation.params))
        return command.service().execute(operation)
