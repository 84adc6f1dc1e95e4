"""Synthetic evaluation streams.

A stream is built from whole sentences: every word gets a seeded duration and
is followed by a short gap, except where a pause at least as long as the
silence threshold is injected. Pauses land at sentence ends (true boundaries)
and, to imitate speakers stopping to think, inside sentences (false ones).
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from endpoint.events import WordEvent, validate_stream
from lmeos.errors import FusionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchmarkConfig:
    word_ms: tuple = (200, 400)
    gap_ms: tuple = (50, 250)
    pause_ms: tuple = (600, 1400)
    mid_pause_prob: float = 0.3
    end_pause_prob: float = 0.9

    def validate(self):
        for name in ("word_ms", "gap_ms", "pause_ms"):
            low, high = getattr(self, name)
            if not 0 <= low <= high or (name == "word_ms" and low == 0):
                raise FusionError(f"{name} must be an increasing range, got {low}..{high}",
                                  code="INVALID_BENCHMARK")
        for name in ("mid_pause_prob", "end_pause_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise FusionError(f"{name} must be in [0, 1], got {value}",
                                  code="INVALID_BENCHMARK")
        if self.gap_ms[1] >= self.pause_ms[0]:
            raise FusionError("Pauses must be longer than ordinary gaps", code="INVALID_BENCHMARK")


@dataclass(frozen=True)
class BenchmarkStream:
    """Word events plus the reference boundaries (stream end excluded)."""

    stream_id: str
    events: tuple
    boundaries: tuple = field(default_factory=tuple)

    @property
    def tokens(self):
        return [event.word for event in self.events]

    def to_dict(self):
        return {
            "stream_id": self.stream_id,
            "events": [event.to_dict() for event in self.events],
            "boundaries": list(self.boundaries),
        }

    @classmethod
    def from_dict(cls, data):
        events = tuple(WordEvent.from_dict(e) for e in data["events"])
        return cls(stream_id=str(data["stream_id"]), events=events,
                   boundaries=tuple(int(b) for b in data["boundaries"]))


def _draw(rng, bounds):
    low, high = bounds
    return int(rng.integers(low, high + 1))


def synthesize_stream(stream_id, sentences, rng, config=None):
    """Lay ``sentences`` (token lists) out in time as one stream."""
    config = config or BenchmarkConfig()
    events = []
    boundaries = []
    clock = 0
    for position, tokens in enumerate(sentences):
        if not tokens:
            continue
        mid_gap = None
        if len(tokens) > 1 and rng.random() < config.mid_pause_prob:
            mid_gap = int(rng.integers(0, len(tokens) - 1))
        for j, word in enumerate(tokens):
            duration = _draw(rng, config.word_ms)
            events.append(WordEvent(word, clock, clock + duration))
            clock += duration
            if j == len(tokens) - 1:
                if position < len(sentences) - 1:
                    boundaries.append(len(events) - 1)
                pause = rng.random() < config.end_pause_prob
            else:
                pause = j == mid_gap
            clock += _draw(rng, config.pause_ms if pause else config.gap_ms)

    return BenchmarkStream(stream_id=stream_id, events=tuple(events),
                           boundaries=tuple(boundaries))


def build_suite(sentences, stream_count, sentences_per_stream=3, seed=0, config=None):
    """Draw ``stream_count`` streams of distinct sentences from ``sentences``."""
    config = config or BenchmarkConfig()
    config.validate()
    sentences = [list(s) for s in sentences if s]
    if len(sentences) < sentences_per_stream:
        raise FusionError(
            f"Need at least {sentences_per_stream} sentences, got {len(sentences)}",
            code="EMPTY_CORPUS",
        )
    rng = np.random.default_rng(seed)
    suite = []
    for n in range(stream_count):
        picks = rng.choice(len(sentences), size=sentences_per_stream, replace=False)
        chosen = [sentences[i] for i in picks]
        suite.append(synthesize_stream(f"s{n:04d}", chosen, rng, config))
    logger.info("Built %d benchmark streams from %d sentences", len(suite), len(sentences))
    return suite


def write_suite(path, suite):
    try:
        with Path(path).open("w", encoding="utf-8") as handle:
            for stream in suite:
                handle.write(json.dumps(stream.to_dict(), ensure_ascii=False) + "\n")
    except OSError as e:
        raise FusionError(f"Cannot write {path}: {e}", code="IO_ERROR") from e


def read_suite(path):
    """Read a benchmark suite; each stream is validated like any word-event file."""
    path = Path(path)
    suite = []
    try:
        with path.open(encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    stream = BenchmarkStream.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                    raise FusionError(f"{path}:{line_number}: bad benchmark stream ({e})",
                                      code="BAD_SUITE") from e
                validate_stream(stream.events)
                if any(not 0 <= b < len(stream.events) for b in stream.boundaries):
                    raise FusionError(f"{path}:{line_number}: boundary out of range",
                                      code="BAD_SUITE")
                suite.append(stream)
    except FileNotFoundError as e:
        raise FusionError(f"Suite file {path} does not exist", code="PATH_NOT_FOUND") from e
    except UnicodeDecodeError as e:
        raise FusionError(f"{path} is not valid UTF-8", code="BAD_ENCODING") from e
    except OSError as e:
        raise FusionError(f"Cannot read {path}: {e}", code="IO_ERROR") from e
    return suite
