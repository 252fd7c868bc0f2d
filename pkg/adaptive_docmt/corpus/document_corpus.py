from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

from adaptive_docmt.utils.app_exception import EmptyInputError, ParseError
from adaptive_docmt.utils.logger import logger

log = logger(__name__)

FIELD_SEPARATOR = " ||| "
NEEDS = ("none", "pre", "pos", "both")


@dataclass(frozen=True)
class SentencePair:
    source: Tuple[str, ...]
    target: Tuple[str, ...]
    # context the generator made this sentence depend on; evaluation only
    needs: Optional[str] = None


@dataclass(frozen=True)
class DocumentCorpus:
    documents: Tuple[Tuple[SentencePair, ...], ...]

    def __post_init__(self):
        for index, document in enumerate(self.documents):
            if len(document) == 0:
                raise EmptyInputError(f"document {index} is empty")

    @classmethod
    def from_lists(cls, documents: Sequence[Sequence[SentencePair]]) -> "DocumentCorpus":
        return cls(tuple(tuple(document) for document in documents))

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def sentence_count(self) -> int:
        return sum(len(document) for document in self.documents)

    @property
    def has_labels(self) -> bool:
        return all(pair.needs is not None for _, _, pair in self.sentences())

    def sentences(self) -> Iterator[Tuple[int, int, SentencePair]]:
        for doc_idx, document in enumerate(self.documents):
            for sent_idx, pair in enumerate(document):
                yield doc_idx, sent_idx, pair

    def pair(self, doc_idx: int, sent_idx: int) -> SentencePair:
        return self.documents[doc_idx][sent_idx]


def parse_line(line: str, line_number: int) -> SentencePair:
    fields = line.split("|||")
    if len(fields) not in (2, 3):
        raise ParseError("expected 'source ||| target' or 'source ||| target ||| needs'", line_number)
    source, target = tuple(fields[0].split()), tuple(fields[1].split())
    if not source or not target:
        raise ParseError("source and target must both be non-empty", line_number)
    needs = None
    if len(fields) == 3:
        needs = fields[2].strip()
        if needs not in NEEDS:
            raise ParseError(f"unknown context label '{needs}', expected one of {NEEDS}", line_number)
    return SentencePair(source, target, needs)


def read_corpus(path: str) -> DocumentCorpus:
    """
    Read a corpus file: one `source ||| target` pair per line, documents
    separated by a single blank line.
    """
    documents: List[List[SentencePair]] = []
    current: List[SentencePair] = []
    with open(path, "r", encoding="utf-8") as file:
        for line_number, raw in enumerate(file, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if not current:
                    raise ParseError("empty document", line_number)
                documents.append(current)
                current = []
                continue
            current.append(parse_line(line, line_number))
    if current:
        documents.append(current)
    if not documents:
        raise ParseError("corpus contains no documents", 0)
    log.debug(f"read {len(documents)} documents from {path}")
    return DocumentCorpus.from_lists(documents)


def format_pair(pair: SentencePair) -> str:
    line = " ".join(pair.source) + FIELD_SEPARATOR + " ".join(pair.target)
    if pair.needs is not None:
        line += FIELD_SEPARATOR + pair.needs
    return line


def format_corpus(corpus: DocumentCorpus) -> str:
    blocks = ["\n".join(format_pair(pair) for pair in document) for document in corpus.documents]
    return "\n\n".join(blocks) + "\n"


def write_corpus(corpus: DocumentCorpus, path: str):
    with open(path, "w", encoding="utf-8") as file:
        file.write(format_corpus(corpus))


# an empty hypothesis cannot be a blank line, that would end its document
EMPTY_SENTENCE = "<eos>"


def format_documents(documents: Sequence[Sequence[Sequence[str]]]) -> str:
    """Hypotheses one sentence per line, documents blank-line separated."""
    blocks = [
        "\n".join(" ".join(sentence) if sentence else EMPTY_SENTENCE for sentence in document)
        for document in documents
    ]
    return "\n\n".join(blocks) + "\n"


def read_documents(path: str) -> List[List[List[str]]]:
    documents, current = [], []
    with open(path, "r", encoding="utf-8") as file:
        for line_number, raw in enumerate(file, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if not current:
                    raise ParseError("empty document", line_number)
                documents.append(current)
                current = []
            else:
                current.append([] if line.strip() == EMPTY_SENTENCE else line.split())
    if current:
        documents.append(current)
    return documents
