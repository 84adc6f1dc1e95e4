import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from lmeos.errors import EndpointError

logger = logging.getLogger(__name__)

CSV_FIELDS = ["word", "start_ms", "end_ms"]


@dataclass(frozen=True)
class WordEvent:
    """A decoded word with its timing, in milliseconds from the stream origin."""

    word: str
    start_ms: int
    end_ms: int

    def to_dict(self):
        return {"word": self.word, "start_ms": self.start_ms, "end_ms": self.end_ms}

    @classmethod
    def from_dict(cls, data):
        return cls(word=str(data["word"]), start_ms=_milliseconds(data["start_ms"]),
                   end_ms=_milliseconds(data["end_ms"]))


def _milliseconds(value):
    """Whole milliseconds from a JSON number or CSV string; fractions are rejected."""
    if isinstance(value, bool):
        raise TypeError(f"expected milliseconds, got {value!r}")
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f"{value!r} is not a whole number of milliseconds")
    return int(value)


def check_event(index, event, previous=None):
    """Check one event against the stream contract, given the event before it."""
    if not 0 <= event.start_ms < event.end_ms:
        raise EndpointError(
            f"Event {index} ({event.word!r}) needs 0 <= start_ms < end_ms, "
            f"got {event.start_ms}..{event.end_ms}",
            code="INVALID_EVENT",
        )
    if previous is None:
        return
    if event.start_ms < previous.start_ms:
        raise EndpointError(
            f"Event {index} starts at {event.start_ms}ms, before event {index - 1} "
            f"({previous.start_ms}ms)",
            code="UNSORTED_STREAM",
        )
    if event.start_ms < previous.end_ms:
        raise EndpointError(
            f"Event {index} starts at {event.start_ms}ms while event {index - 1} "
            f"runs until {previous.end_ms}ms",
            code="OVERLAPPING_EVENTS",
        )


def validate_stream(events):
    """Check the ordering contract of a word-event stream.

    Raises:
        EndpointError: INVALID_EVENT, UNSORTED_STREAM or OVERLAPPING_EVENTS,
            naming the first offending position.
    """
    previous = None
    for index, event in enumerate(events):
        check_event(index, event, previous)
        previous = event


def _read_jsonl(handle, path):
    events = []
    for line_number, line in enumerate(handle, start=1):
        if not line.strip():
            continue
        try:
            events.append(WordEvent.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise EndpointError(f"{path}:{line_number}: bad word event ({e})",
                                code="BAD_EVENT_FILE") from e
    return events


def _read_csv(handle, path):
    reader = csv.DictReader(handle)
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != CSV_FIELDS:
        raise EndpointError(f"{path}: CSV header must be {','.join(CSV_FIELDS)}",
                            code="BAD_EVENT_FILE")
    events = []
    for row in reader:
        try:
            events.append(WordEvent.from_dict({k.strip(): v for k, v in row.items()}))
        except (KeyError, TypeError, ValueError) as e:
            raise EndpointError(f"{path}:{reader.line_num}: bad word event ({e})",
                                code="BAD_EVENT_FILE") from e
    return events


def read_events(path):
    """Read and validate a word-event file (``.csv`` or JSON Lines)."""
    path = Path(path)
    try:
        with path.open(encoding="utf-8", newline="") as handle:
            if path.suffix.lower() == ".csv":
                events = _read_csv(handle, path)
            else:
                events = _read_jsonl(handle, path)
    except FileNotFoundError as e:
        raise EndpointError(f"Word-event file {path} does not exist",
                            code="PATH_NOT_FOUND") from e
    except UnicodeDecodeError as e:
        raise EndpointError(f"{path} is not valid UTF-8", code="BAD_ENCODING") from e
    except OSError as e:
        raise EndpointError(f"Cannot read {path}: {e}", code="IO_ERROR") from e

    validate_stream(events)
    logger.debug("Read %d word events from %s", len(events), path)
    return events


def write_events(path, events):
    with Path(path).open("w", encoding="utf-8") as handle:
        for event in events:
            handle.write(json.dumps(event.to_dict(), ensure_ascii=False) + "\n")
