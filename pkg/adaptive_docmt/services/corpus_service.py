from adaptive_docmt.corpus.document_corpus import write_corpus
from adaptive_docmt.corpus.synthetic import (
    GENERATOR_DEFAULTS,
    GeneratorConfig,
    generate_from_config,
    label_mix,
    synthetic_vocabulary,
)
from adaptive_docmt.corpus.vocabulary import write_vocabulary
from adaptive_docmt.operation import Operation
from adaptive_docmt.services.service import Service
from adaptive_docmt.utils.logger import format_record, logger

log = logger(__name__)

GEN_CORPUS_DEFAULTS = {**GENERATOR_DEFAULTS, "output": "", "vocabulary": ""}


class CorpusService(Service):
    """Writes a labelled synthetic corpus and, optionally, its full vocabulary."""

    def execute(self, operation: Operation) -> str:
        params = operation.params
        config = GeneratorConfig({key: params[key] for key in GENERATOR_DEFAULTS})
        corpus = generate_from_config(config)
        write_corpus(corpus, params["output"])
        if params.get("vocabulary"):
            write_vocabulary(synthetic_vocabulary(config), params["vocabulary"])

        mix = label_mix(corpus)
        return format_record(
            "corpus",
            path=params["output"],
            documents=len(corpus),
            sentences=corpus.sentence_count,
            **{f"mix_{needs}": round(share, 4) for needs, share in mix.items()},
        )
