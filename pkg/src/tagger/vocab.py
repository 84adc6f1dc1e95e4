import logging
from collections import Counter

from lmeos.errors import TaggerError

logger = logging.getLogger(__name__)

PAD = "<pad>"
OOV = "<oov>"
PAD_ID = 0
OOV_ID = 1
RESERVED = (PAD, OOV)


class Vocabulary:
    """Dense token ids; 0 is padding and 1 stands in for every unseen token."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if tokens[:2] != list(RESERVED):
            raise TaggerError(f"Vocabulary must start with {PAD} and {OOV}", code="BAD_VOCABULARY")
        self.tokens = tokens
        self.index = {token: i for i, token in enumerate(tokens)}
        if len(self.index) != len(tokens):
            raise TaggerError("Vocabulary has duplicate tokens", code="BAD_VOCABULARY")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __repr__(self):
        return f"Vocabulary(size={len(self)})"

    def id_of(self, token):
        return self.index.get(token, OOV_ID)

    def encode(self, tokens):
        return [self.id_of(token) for token in tokens]


def build_vocab(examples, max_size, min_frequency=1):
    """Keep the ``max_size - 2`` most frequent tokens; ties go to the smaller string."""
    if max_size < len(RESERVED):
        raise TaggerError(f"max_size must be at least {len(RESERVED)}, got {max_size}",
                          code="INVALID_HYPERPARAMS")

    counts = Counter()
    seen = 0
    for example in examples:
        seen += 1
        counts.update(example.tokens)
    if not seen:
        raise TaggerError("Cannot build a vocabulary from zero examples", code="EMPTY_CORPUS")

    ranked = sorted(
        (token for token, count in counts.items()
         if count >= min_frequency and token not in RESERVED),
        key=lambda token: (-counts[token], token),
    )
    kept = ranked[:max_size - len(RESERVED)]
    if len(kept) < len(ranked):
        logger.info("Vocabulary capped at %d tokens, %d evicted", max_size, len(ranked) - len(kept))
    return Vocabulary([*RESERVED, *kept])
