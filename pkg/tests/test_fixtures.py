import pytest

from adaptive_docmt.corpus.document_corpus import DocumentCorpus, SentencePair
from adaptive_docmt.corpus.synthetic import GeneratorConfig, generate_from_config, synthetic_vocabulary
from adaptive_docmt.corpus.vocabulary import Vocabulary
from adaptive_docmt.model.model_config import CONCATENATE, ModelConfig
from adaptive_docmt.model.model_factory import model_factory
from adaptive_docmt.training.train_config import TrainConfig
from adaptive_docmt.utils.logger import logger

log = logger(__name__)

TINY_MODEL = {
    "d_model": 8,
    "n_heads": 2,
    "ffn_dim": 16,
    "enc_layers": 2,
    "dec_layers": 3,
    "vocab_size": 48,
    "max_positions": 64,
    "dropout": 0.0,
    "dtype": "float64",
}

TINY_TRAIN = {
    "lr": 1e-2,
    "warmup_steps": 4,
    "batch_size": 3,
    "max_steps": 4,
    "log_every": 1,
    "seed": 11,
    "predictor_warmup": 1,
}


def tiny_config(variant: str = CONCATENATE, **overrides) -> ModelConfig:
    return ModelConfig({**TINY_MODEL, "variant": variant, **overrides})


def tiny_model(variant: str = CONCATENATE, seed: int = 0, **overrides):
    model = model_factory.build(tiny_config(variant, **overrides), seed=seed)
    model.eval()
    return model


def train_config(**overrides) -> TrainConfig:
    return TrainConfig({**TINY_TRAIN, **overrides})


def pair(source: str, target: str, needs=None) -> SentencePair:
    return SentencePair(tuple(source.split()), tuple(target.split()), needs)


def toy_documents() -> DocumentCorpus:
    return DocumentCorpus.from_lists(
        [
            [
                pair("le chat dort", "the cat sleeps", "none"),
                pair("il mange", "it eats", "pre"),
                pair("le chien court", "the dog runs", "none"),
            ],
            [
                pair("bonjour", "hello", "none"),
                pair("elle lit un livre", "she reads a book", "pos"),
            ],
        ]
    )


@pytest.fixture
def toy_corpus() -> DocumentCorpus:
    return toy_documents()


@pytest.fixture
def toy_vocabulary(toy_corpus) -> Vocabulary:
    return Vocabulary.from_corpus(toy_corpus)


SMALL_GENERATOR = {"seed": 3, "n_docs": 4, "doc_len": 4, "vocab_size": 48, "min_len": 2, "max_len": 3}


@pytest.fixture
def synthetic_corpus() -> DocumentCorpus:
    return generate_from_config(GeneratorConfig(SMALL_GENERATOR))


@pytest.fixture
def synthetic_vocab() -> Vocabulary:
    return synthetic_vocabulary(GeneratorConfig(SMALL_GENERATOR))

