from typing import Dict, Iterable, List, Sequence

from adaptive_docmt.utils.app_exception import ParseError, VocabularyError

PAD, BOS, EOS, SEP, MASK, UNK = "<pad>", "<bos>", "<eos>", "<sep>", "<mask>", "<unk>"
RESERVED = (PAD, BOS, EOS, SEP, MASK, UNK)
PAD_ID, BOS_ID, EOS_ID, SEP_ID, MASK_ID, UNK_ID = range(len(RESERVED))


class Vocabulary:
    """Joint source/target token <-> id map; ids 0..5 are the reserved block."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.id_to_token: List[str] = list(RESERVED)
        self.token_to_id: Dict[str, int] = {token: i for i, token in enumerate(RESERVED)}
        for token in tokens:
            self.add(token)

    def add(self, token: str) -> int:
        if not token or any(ch.isspace() for ch in token):
            raise VocabularyError(f"invalid vocabulary token '{token}'")
        if token in self.token_to_id:
            if token in RESERVED:
                return self.token_to_id[token]
            raise VocabularyError(f"duplicate vocabulary token '{token}'")
        self.token_to_id[token] = len(self.id_to_token)
        self.id_to_token.append(token)
        return self.token_to_id[token]

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token

    @property
    def task_tokens(self) -> List[str]:
        return self.id_to_token[len(RESERVED):]

    def encode(self, tokens: Sequence[str], strict: bool = False) -> List[int]:
        ids = []
        for token in tokens:
            token_id = self.token_to_id.get(token)
            if token_id is None:
                if strict:
                    raise VocabularyError(f"unknown token '{token}'")
                token_id = UNK_ID
            ids.append(token_id)
        return ids

    def decode(self, ids: Sequence[int]) -> List[str]:
        tokens = []
        for token_id in ids:
            token_id = int(token_id)
            if not 0 <= token_id < len(self.id_to_token):
                raise VocabularyError(f"id {token_id} outside vocabulary of size {len(self)}")
            tokens.append(self.id_to_token[token_id])
        return tokens

    @classmethod
    def from_corpus(cls, corpus) -> "Vocabulary":
        """Tokens in order of first appearance, sources before targets per pair."""
        vocabulary = cls()
        for document in corpus.documents:
            for pair in document:
                for token in (*pair.source, *pair.target):
                    if token not in vocabulary:
                        vocabulary.add(token)
        return vocabulary


def write_vocabulary(vocabulary: Vocabulary, path: str):
    """One token per line; line number = id after the reserved block."""
    with open(path, "w", encoding="utf-8") as file:
        for token in vocabulary.task_tokens:
            file.write(token + "\n")


def read_vocabulary(path: str) -> Vocabulary:
    vocabulary = Vocabulary()
    with open(path, "r", encoding="utf-8") as file:
        for line_number, line in enumerate(file, start=1):
            token = line.rstrip("\n")
            try:
                vocabulary.add(token)
            except VocabularyError as error:
                raise ParseError(error.message, line_number)
    return vocabulary
