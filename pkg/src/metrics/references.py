"""Reading segmented streams for scoring.

Three layouts are understood:

* JSON Lines of streams: ``{"tokens": [...], "boundaries": [...]}`` per line
  (benchmark suites, which carry ``events`` instead of ``tokens``, also work);
* JSON Lines of segments as written by ``segment``: the whole file is one
  stream;
* plain text (``.txt``): one segment per line, the whole file is one stream.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from lmeos.errors import MetricsError

from .boundaries import BoundarySet, boundaries_from_segments

logger = logging.getLogger(__name__)

TEXT_SUFFIXES = {".txt", ".text"}


@dataclass(frozen=True)
class ScoredStream:
    tokens: tuple
    boundaries: BoundarySet
    source: str


def _stream_record(record, source):
    if "tokens" in record:
        tokens = [str(t) for t in record["tokens"]]
    else:
        tokens = [str(e["word"]) for e in record["events"]]
    try:
        boundaries = BoundarySet.create(record["boundaries"], len(tokens))
    except MetricsError as e:
        raise MetricsError(f"{source}: {e}", code=e.code) from e
    return ScoredStream(tuple(tokens), boundaries, source)


def _segments_stream(segments, path):
    tokens = [token for segment in segments for token in segment]
    return ScoredStream(tuple(tokens), boundaries_from_segments(segments, tokens), str(path))


def _read_jsonl(handle, path):
    streams = []
    segments = []
    for line_number, line in enumerate(handle, start=1):
        if not line.strip():
            continue
        source = f"{path}:{line_number}"
        try:
            record = json.loads(line)
            if "boundaries" in record:
                streams.append(_stream_record(record, source))
            else:
                segments.append([str(t) for t in record["tokens"]])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise MetricsError(f"{source}: bad stream or segment record ({e})",
                               code="BAD_REFERENCE") from e
        if streams and segments:
            raise MetricsError(f"{source}: file mixes stream and segment records",
                               code="BAD_REFERENCE")
    if segments:
        return [_segments_stream(segments, path)]
    return streams


def _read_text(handle, path):
    segments = [line.split() for line in handle if line.strip()]
    return [_segments_stream(segments, path)] if segments else []


def read_streams(path):
    """Read every stream in ``path``, in file order."""
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as handle:
            if path.suffix.lower() in TEXT_SUFFIXES:
                streams = _read_text(handle, path)
            else:
                streams = _read_jsonl(handle, path)
    except FileNotFoundError as e:
        raise MetricsError(f"{path} does not exist", code="PATH_NOT_FOUND") from e
    except UnicodeDecodeError as e:
        raise MetricsError(f"{path} is not valid UTF-8", code="BAD_ENCODING") from e
    except OSError as e:
        raise MetricsError(f"Cannot read {path}: {e}", code="IO_ERROR") from e
    logger.debug("Read %d streams from %s", len(streams), path)
    return streams
