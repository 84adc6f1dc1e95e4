import enum
import logging
from collections import Counter
from dataclasses import dataclass, field

from .text import Rejection, Sentence, filter_sentence, split_sentences

logger = logging.getLogger(__name__)


class Tag(enum.Enum):
    """Per-token label; EOS marks a valid end of segment."""

    O = "O"
    EOS = "eos"


class Variant(enum.Enum):
    FULL = "full"
    TRUNCATED = "truncated"
    LOOKAHEAD = "lookahead"


@dataclass(frozen=True)
class TrainingExample:
    tokens: tuple
    tags: tuple
    variant: Variant

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.tags)} tags"
            )
        if not self.tokens:
            raise ValueError("TrainingExample must have at least one token")

    @property
    def input_text(self):
        return " ".join(self.tokens)

    @property
    def output_text(self):
        return " ".join(tag.value for tag in self.tags)

    def to_dict(self):
        return {
            "tokens": list(self.tokens),
            "tags": [tag.value for tag in self.tags],
            "variant": self.variant.value,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            tokens=tuple(data["tokens"]),
            tags=tuple(Tag(value) for value in data["tags"]),
            variant=Variant(data["variant"]),
        )


@dataclass
class CorpusStats:
    documents: int = 0
    sentences_kept: int = 0
    rejected: Counter = field(default_factory=Counter)
    examples: Counter = field(default_factory=Counter)

    @property
    def sentences_rejected(self):
        return sum(self.rejected.values())

    def to_dict(self):
        return {
            "documents": self.documents,
            "sentences_kept": self.sentences_kept,
            "sentences_rejected": self.sentences_rejected,
            "rejected": {reason.value: count for reason, count in sorted(
                self.rejected.items(), key=lambda item: item[0].value
            )},
            "examples": {variant.value: self.examples.get(variant, 0) for variant in Variant},
        }


def make_v2_examples(sentence):
    """Build the sentence-end row and its last-word-deleted counter-case.

    Returns ``(full, truncated)``; ``truncated`` is ``None`` for one-token
    sentences because deleting the only word leaves nothing to tag.
    """
    tokens = tuple(sentence.tokens)
    full = TrainingExample(
        tokens=tokens,
        tags=(Tag.O,) * (len(tokens) - 1) + (Tag.EOS,),
        variant=Variant.FULL,
    )
    if len(tokens) == 1:
        return full, None
    truncated = TrainingExample(
        tokens=tokens[:-1],
        tags=(Tag.O,) * (len(tokens) - 1),
        variant=Variant.TRUNCATED,
    )
    return full, truncated


def make_v3_examples(sentence, next_sentence):
    """Build the one-word look-ahead row: sentence + first word of the next one.

    Document-final sentences (``next_sentence is None``) yield no row rather
    than a sentinel successor.
    """
    if next_sentence is None:
        return []
    tokens = tuple(sentence.tokens) + (next_sentence.tokens[0],)
    tags = (Tag.O,) * (len(sentence.tokens) - 1) + (Tag.EOS, Tag.O)
    return [TrainingExample(tokens=tokens, tags=tags, variant=Variant.LOOKAHEAD)]


def sentences_from_document(doc, stats=None):
    """Split and filter one document; returns accepted sentences in order."""
    sentences = []
    for index, piece in enumerate(split_sentences(doc, keep_unterminated=True)):
        result = filter_sentence(piece, doc_id=doc.doc_id, index_in_doc=index)
        if isinstance(result, Rejection):
            if stats is not None:
                stats.rejected[result.reason] += 1
            continue
        sentences.append(result)
    if stats is not None:
        stats.documents += 1
        stats.sentences_kept += len(sentences)
    return sentences


def examples_from_sentences(sentences, lookahead=False):
    """Yield v2 rows (and v3 rows when ``lookahead``) for one document's sentences.

    A look-ahead row needs the immediately following piece of the same
    document to have been accepted.
    """
    for position, sentence in enumerate(sentences):
        full, truncated = make_v2_examples(sentence)
        yield full
        if truncated is not None:
            yield truncated
        if lookahead:
            following = None
            if position + 1 < len(sentences):
                candidate = sentences[position + 1]
                if (
                    candidate.doc_id == sentence.doc_id
                    and candidate.index_in_doc == sentence.index_in_doc + 1
                ):
                    following = candidate
            yield from make_v3_examples(sentence, following)


def build_examples(documents, lookahead=False):
    """Turn raw documents into training examples.

    Output is ordered by ``doc_id`` then sentence position, so the result does
    not depend on the order documents were read in.

    Returns:
        tuple: ``(examples, CorpusStats)``
    """
    stats = CorpusStats()
    examples = []
    for doc in sorted(documents, key=lambda doc: doc.doc_id):
        sentences = sentences_from_document(doc, stats)
        for example in examples_from_sentences(sentences, lookahead=lookahead):
            stats.examples[example.variant] += 1
            examples.append(example)

    logger.info(
        "Built %d examples from %d documents (%d sentences kept, %d rejected)",
        len(examples),
        stats.documents,
        stats.sentences_kept,
        stats.sentences_rejected,
    )
    return examples, stats
