"""
Synthetic context-dependent parallel corpus.

Source sentences are bags of content words translated one-to-one. Some carry
an ambiguous word whose translation is fixed by a marker in the previous
sentence (`ap*`), in the next sentence (`an*`) or in both (`ab*`). The word
family tells which context is needed, the marker value in the context tells
which translation is right, so a context-free translator is at chance on
ambiguous words.
"""
import random
import re
from typing import Any, Dict, List, Optional, Sequence

from adaptive_docmt.corpus.document_corpus import NEEDS, DocumentCorpus, SentencePair
from adaptive_docmt.corpus.vocabulary import RESERVED, Vocabulary
from adaptive_docmt.utils.app_exception import ConfigurationError
from adaptive_docmt.utils.logger import logger

log = logger(__name__)

GENERATOR_DEFAULTS: Dict[str, Any] = {
    "seed": 7,
    "n_docs": 200,
    "doc_len": 10,
    "fractions": [0.15, 0.25, 0.15, 0.45],
    "vocab_size": 64,
    "n_ambiguous": 2,
    "min_len": 3,
    "max_len": 6,
}

N_MARKER_VALUES = 2
MIN_CONTENT_WORDS = 4

AMBIGUOUS_RE = re.compile(r"^a([pnb])(\d+)$")
RESOLUTION_RE = re.compile(r"^r([pnb])(\d+)_(\d+)$")
CONTENT_RE = re.compile(r"^x(\d+)$")
MARKER_RE = re.compile(r"^([pq])x(\d+)$")

FAMILY_NEEDS = {"p": "pre", "n": "pos", "b": "both"}
NEEDS_FAMILY = {needs: family for family, needs in FAMILY_NEEDS.items()}


class GeneratorConfig:
    def __init__(self, data: Optional[Dict[str, Any]] = None):
        data = {**GENERATOR_DEFAULTS, **(data or {})}
        self.seed = int(data.get("seed"))
        self.n_docs = int(data.get("n_docs"))
        self.doc_len = int(data.get("doc_len"))
        self.fractions = [float(f) for f in data.get("fractions")]
        self.vocab_size = int(data.get("vocab_size"))
        self.n_ambiguous = int(data.get("n_ambiguous"))
        self.min_len = int(data.get("min_len"))
        self.max_len = int(data.get("max_len"))
        self.validate()

    def validate(self):
        if self.n_docs < 1 or self.doc_len < 1:
            raise ConfigurationError("n_docs and doc_len must be positive")
        if len(self.fractions) != len(NEEDS):
            raise ConfigurationError(f"fractions needs {len(NEEDS)} entries ordered {NEEDS}")
        if any(f < 0 for f in self.fractions) or sum(self.fractions) <= 0:
            raise ConfigurationError("fractions must be non-negative with a positive sum")
        if self.n_ambiguous < 1:
            raise ConfigurationError("n_ambiguous must be positive")
        if not 1 <= self.min_len <= self.max_len:
            raise ConfigurationError("sentence lengths need 1 <= min_len <= max_len")
        if self.n_content < MIN_CONTENT_WORDS:
            raise ConfigurationError(
                f"vocab_size {self.vocab_size} leaves {self.n_content} content words; "
                f"need at least {self.minimum_vocab_size()}"
            )

    @property
    def task_symbols(self) -> int:
        markers = 2 * 2 * N_MARKER_VALUES
        ambiguous_sources = 3 * self.n_ambiguous
        resolutions = self.n_ambiguous * (2 * N_MARKER_VALUES + N_MARKER_VALUES ** 2)
        return markers + ambiguous_sources + resolutions

    @property
    def n_content(self) -> int:
        return (self.vocab_size - len(RESERVED) - self.task_symbols) // 2

    def minimum_vocab_size(self) -> int:
        return len(RESERVED) + self.task_symbols + 2 * MIN_CONTENT_WORDS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "n_docs": self.n_docs,
            "doc_len": self.doc_len,
            "fractions": list(self.fractions),
            "vocab_size": self.vocab_size,
            "n_ambiguous": self.n_ambiguous,
            "min_len": self.min_len,
            "max_len": self.max_len,
        }


def synthetic_vocabulary(config: GeneratorConfig) -> Vocabulary:
    """Every symbol the generator can emit, in a fixed order."""
    tokens = []
    for i in range(config.n_content):
        tokens += [f"x{i}", f"y{i}"]
    for side in ("p", "q"):
        for j in range(N_MARKER_VALUES):
            tokens += [f"{side}x{j}", f"{side}y{j}"]
    for k in range(config.n_ambiguous):
        for family in ("p", "n", "b"):
            tokens.append(f"a{family}{k}")
            for value in range(N_MARKER_VALUES ** (2 if family == "b" else 1)):
                tokens.append(resolution_token(family, k, value))
    return Vocabulary(tokens)


def resolution_token(family: str, index: int, value: int) -> str:
    return f"r{family}{index}_{value}"


def translate_token(token: str, pre_value: Optional[int], post_value: Optional[int]) -> str:
    """Word-level translation; ambiguous words use the context marker values."""
    match = CONTENT_RE.match(token)
    if match:
        return f"y{match.group(1)}"
    match = MARKER_RE.match(token)
    if match:
        return f"{match.group(1)}y{match.group(2)}"
    match = AMBIGUOUS_RE.match(token)
    if match:
        family, index = match.group(1), int(match.group(2))
        pre, post = pre_value or 0, post_value or 0
        value = {"p": pre, "n": post, "b": pre * N_MARKER_VALUES + post}[family]
        return resolution_token(family, index, value)
    return token


def marker_value(sentence: Optional[Sequence[str]], side: str) -> Optional[int]:
    if not sentence:
        return None
    for token in sentence:
        match = MARKER_RE.match(token)
        if match and match.group(1) == side:
            return int(match.group(2))
    return None


def oracle_translate(
    sources: Sequence[Sequence[str]], sent_idx: int, use_context: bool = True
) -> List[str]:
    """
    Rule-based inverse of the generator grammar.

    With use_context the previous sentence's `px` marker and the next
    sentence's `qx` marker resolve ambiguous words; without it every ambiguous
    word gets its first translation.
    """
    pre_value = post_value = None
    if use_context:
        if sent_idx > 0:
            pre_value = marker_value(sources[sent_idx - 1], "p")
        if sent_idx + 1 < len(sources):
            post_value = marker_value(sources[sent_idx + 1], "q")
    return [translate_token(token, pre_value, post_value) for token in sources[sent_idx]]


def is_resolution_token(token: str) -> bool:
    return RESOLUTION_RE.match(token) is not None


def _sample_labels(rng: random.Random, doc_len: int, fractions: Sequence[float]) -> List[str]:
    labels = []
    for i in range(doc_len):
        feasible = [
            (needs, weight) for needs, weight in zip(NEEDS, fractions)
            if not (needs in ("pre", "both") and i == 0)
            and not (needs in ("pos", "both") and i == doc_len - 1)
        ]
        total = sum(weight for _, weight in feasible)
        if total <= 0:
            labels.append("none")
            continue
        draw, acc = rng.random() * total, 0.0
        choice = feasible[-1][0]
        for needs, weight in feasible:
            acc += weight
            if draw < acc:
                choice = needs
                break
        labels.append(choice)
    return labels


def _insert(rng: random.Random, tokens: List[str], token: str):
    tokens.insert(rng.randint(0, len(tokens)), token)


def generate_document(rng: random.Random, config: GeneratorConfig) -> List[SentencePair]:
    labels = _sample_labels(rng, config.doc_len, config.fractions)
    # marker value a sentence's needed neighbours carry for it
    pre_values = [rng.randrange(N_MARKER_VALUES) if needs in ("pre", "both") else None for needs in labels]
    post_values = [rng.randrange(N_MARKER_VALUES) if needs in ("pos", "both") else None for needs in labels]

    sources = []
    for i, needs in enumerate(labels):
        length = rng.randint(config.min_len, config.max_len)
        tokens = [f"x{rng.randrange(config.n_content)}" for _ in range(length)]
        if needs != "none":
            _insert(rng, tokens, f"a{NEEDS_FAMILY[needs]}{rng.randrange(config.n_ambiguous)}")
        if i + 1 < len(labels) and pre_values[i + 1] is not None:
            _insert(rng, tokens, f"px{pre_values[i + 1]}")
        if i > 0 and post_values[i - 1] is not None:
            _insert(rng, tokens, f"qx{post_values[i - 1]}")
        sources.append(tokens)

    return [
        SentencePair(tuple(sources[i]), tuple(oracle_translate(sources, i)), labels[i])
        for i in range(len(sources))
    ]


def generate_synthetic_corpus(
    seed: int,
    n_docs: int,
    doc_len: int,
    vocab_size: int,
    fractions: Sequence[float] = GENERATOR_DEFAULTS["fractions"],
    **options,
) -> DocumentCorpus:
    config = GeneratorConfig(
        {
            **options,
            "seed": seed,
            "n_docs": n_docs,
            "doc_len": doc_len,
            "vocab_size": vocab_size,
            "fractions": list(fractions),
        }
    )
    return generate_from_config(config)


def generate_from_config(config: GeneratorConfig) -> DocumentCorpus:
    rng = random.Random(config.seed)
    documents = [generate_document(rng, config) for _ in range(config.n_docs)]
    log.info(
        f"generated {config.n_docs} documents x {config.doc_len} sentences, "
        f"{config.n_content} content words"
    )
    return DocumentCorpus.from_lists(documents)


def label_mix(corpus: DocumentCorpus) -> Dict[str, float]:
    counts = {needs: 0 for needs in NEEDS}
    for _, _, pair in corpus.sentences():
        if pair.needs is not None:
            counts[pair.needs] += 1
    total = max(sum(counts.values()), 1)
    return {needs: count / total for needs, count in counts.items()}
