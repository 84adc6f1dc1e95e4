"""Sentence splitting, filtering and spoken-form normalization.

The rules here stand in for a WFST normalizer: lowercase, strip punctuation,
spell out integers, keep word-internal apostrophes. They are deterministic and
idempotent on their own output.
"""

import enum
import logging
import re
import unicodedata
from dataclasses import dataclass

from num2words import num2words

logger = logging.getLogger(__name__)


ALLOWED_PUNCTUATION = frozenset(".,?'")
TYPOGRAPHIC_APOSTROPHES = {"’": "'", "‘": "'"}

# Lowercased, without the trailing period.
ABBREVIATIONS = frozenset({
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "etc", "inc",
    "ltd", "co", "corp", "mt", "fig", "gen", "gov", "sen", "rep", "rev",
    "capt", "col", "lt", "sgt", "e.g", "i.e", "a.m", "p.m", "u.s",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct",
    "nov", "dec",
})

# Words that usually start a sentence rather than continue a name.
SENTENCE_OPENERS = frozenset({
    "i", "i'm", "i'll", "it", "it's", "we", "they", "he", "she", "you", "the", "a", "an",
    "this", "that", "these", "those", "there", "then", "but", "and", "so", "yes", "no",
    "how", "what", "when", "where", "why", "who", "is", "are", "was", "were", "do",
    "did", "my", "our", "his", "her", "their", "its", "please", "after", "now",
})

LARGEST_SPELLED_INTEGER = 9999

_PARAGRAPH_BREAK = re.compile(r"\n\s*\n")
_BOUNDARY = re.compile(r"[.?!][\"')\]]*\s+(?=[A-Z0-9])")
_INITIAL = re.compile(r"^[A-Z]\.$")
_NUMBER = re.compile(
    r"(?P<grouped>\d{1,3}(?:,\d{3})+)(?!\d)"
    r"|(?P<ordinal>\d+)(?:st|nd|rd|th)(?![a-z])"
    r"|(?P<decimal>\d+\.\d+)"
    r"|(?P<integer>\d+)",
    re.IGNORECASE,
)
_NON_WORD = re.compile(r"[^\w']+")


class Terminal(enum.Enum):
    PERIOD = "."
    QUESTION = "?"


class RejectReason(enum.Enum):
    BAD_TERMINAL = "bad_terminal"
    FORBIDDEN_PUNCT = "forbidden_punct"
    EMPTY_AFTER_NORMALIZATION = "empty_after_normalization"


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    text: str


@dataclass(frozen=True)
class Sentence:
    """A filtered, normalized sentence with its provenance."""

    tokens: tuple
    terminal: Terminal
    doc_id: str = ""
    index_in_doc: int = 0

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("Sentence tokens must be non-empty")


@dataclass(frozen=True)
class Rejection:
    reason: RejectReason
    text: str


class EmptyNormalization(ValueError):
    """No spoken-form tokens are left after normalization."""


def _is_initial(word, following):
    """True for a capital letter plus period inside a name ("J. R. R. Tolkien").

    The pronoun "I" is never an initial. Otherwise the next word must be another
    initial or a capitalised word that does not usually open a sentence, so
    "Plan B. It worked." still splits.
    """
    if not _INITIAL.match(word) or word == "I.":
        return False
    if _INITIAL.match(following):
        return True
    return (following[:1].isupper()
            and following.strip("\"'(),.?!").lower() not in SENTENCE_OPENERS)


def _is_abbreviation(piece, rest=""):
    """True when the period ending ``piece`` belongs to an abbreviation or initial.

    ``rest`` is the text after the candidate boundary.
    """
    words = piece.split()
    if not words:
        return False
    word = words[-1].lstrip("(\"'")
    if not word.endswith("."):
        return False
    if word[:-1].lower() in ABBREVIATIONS:
        return True
    following = rest.split(maxsplit=1)[0] if rest.strip() else ""
    return _is_initial(word, following)


def split_sentences(doc, keep_unterminated=False):
    """Split a document into raw sentence strings.

    A boundary is placed after ``.``, ``?`` or ``!`` (plus any closing quotes or
    brackets) followed by whitespace and an uppercase letter or digit, unless the
    word before the period is a known abbreviation or an initial. Blank lines
    always end a piece.

    Only pieces ending in ``.`` or ``?`` are returned unless
    ``keep_unterminated`` is set, which the data pipeline uses to count those
    pieces as rejections.
    """
    pieces = []
    for paragraph in _PARAGRAPH_BREAK.split(doc.text):
        start = 0
        for match in _BOUNDARY.finditer(paragraph):
            candidate = paragraph[start:match.end()].strip()
            if paragraph[match.start()] == "." and _is_abbreviation(
                paragraph[start:match.start() + 1], paragraph[match.end():]
            ):
                continue
            if candidate:
                pieces.append(candidate)
            start = match.end()
        tail = paragraph[start:].strip()
        if tail:
            pieces.append(" ".join(tail.split()))

    pieces = [" ".join(piece.split()) for piece in pieces]
    if keep_unterminated:
        return pieces
    return [piece for piece in pieces if piece.endswith((".", "?"))]


def _forbidden_characters(text):
    found = []
    for char in text:
        if char in ALLOWED_PUNCTUATION or char in TYPOGRAPHIC_APOSTROPHES:
            continue
        category = unicodedata.category(char)
        if category.startswith("P") or category.startswith("S"):
            found.append(char)
    return found


def _words(text):
    return text.replace(",", " ").replace("-", " ")


def _spell_integer(value):
    if value > LARGEST_SPELLED_INTEGER:
        return " ".join(num2words(int(digit)) for digit in str(value))
    return _words(num2words(value))


def _spell_number(match):
    if match.group("grouped"):
        words = _spell_integer(int(match.group("grouped").replace(",", "")))
    elif match.group("ordinal"):
        value = int(match.group("ordinal"))
        if value <= LARGEST_SPELLED_INTEGER:
            words = _words(num2words(value, to="ordinal"))
        else:
            words = _spell_integer(value)
    elif match.group("decimal"):
        whole, fraction = match.group("decimal").split(".", 1)
        digits = " ".join(num2words(int(digit)) for digit in fraction)
        words = f"{_spell_integer(int(whole))} point {digits}"
    else:
        words = _spell_integer(int(match.group("integer")))
    return f" {words} "


def _clean_tokens(raw):
    # Apostrophes survive only between letters ("i'm", not "'90s" or "dogs'").
    for part in raw.split("_"):
        part = re.sub(r"'{2,}", "'", part.strip("'"))
        if part:
            yield part


def normalize_spoken(text):
    """Rewrite a sentence into lowercase spoken-form tokens.

    Raises:
        EmptyNormalization: if no tokens remain.
    """
    for typographic, plain in TYPOGRAPHIC_APOSTROPHES.items():
        text = text.replace(typographic, plain)
    text = _NUMBER.sub(_spell_number, text)
    text = text.lower()

    tokens = []
    for raw in _NON_WORD.split(text):
        tokens.extend(_clean_tokens(raw))
    if not tokens:
        raise EmptyNormalization(f"No spoken-form tokens in {text!r}")
    return tokens


def filter_sentence(text, doc_id="", index_in_doc=0):
    """Accept a raw sentence as a :class:`Sentence` or return a :class:`Rejection`."""
    text = text.strip()
    if not text or text[-1] not in ".?":
        return Rejection(RejectReason.BAD_TERMINAL, text)

    forbidden = _forbidden_characters(text)
    if forbidden:
        logger.debug("Rejected %r: forbidden punctuation %r", text, forbidden)
        return Rejection(RejectReason.FORBIDDEN_PUNCT, text)

    try:
        tokens = normalize_spoken(text)
    except EmptyNormalization:
        return Rejection(RejectReason.EMPTY_AFTER_NORMALIZATION, text)

    terminal = Terminal.QUESTION if text.endswith("?") else Terminal.PERIOD
    return Sentence(
        tokens=tuple(tokens),
        terminal=terminal,
        doc_id=doc_id,
        index_in_doc=index_in_doc,
    )
