import json
import logging
from pathlib import Path

from prometheus_client import REGISTRY, write_to_textfile

from lmeos.errors import FusionError

logger = logging.getLogger(__name__)

TRACE_HEADER = (f"{'fired_at':>10}  {'after':<11} {'kind':<12} {'lm':<12} {'p_eos':<13} "
                f"{'verdict':<10} {'decision':<12} latency")


def _open_for_write(path):
    try:
        return Path(path).open("w", encoding="utf-8")
    except OSError as e:
        raise FusionError(f"Cannot write {path}: {e}", code="IO_ERROR") from e


def write_segments(path, segments):
    """Write segments as JSON Lines, one object per segment."""
    with _open_for_write(path) as handle:
        for segment in segments:
            handle.write(json.dumps(segment.to_dict(), ensure_ascii=False) + "\n")
    logger.info("Wrote %d segments to %s", len(segments), path)


def write_trace(path, trace, policy=None):
    """Write the human-readable trace to ``path`` and the same entries as JSON to ``path.json``."""
    path = Path(path)
    with _open_for_write(path) as handle:
        if policy is not None:
            handle.write(f"# {policy.describe()}\n")
        handle.write(TRACE_HEADER + "\n")
        for entry in trace:
            handle.write(entry.to_line() + "\n")

    json_path = path.with_name(path.name + ".json")
    with _open_for_write(json_path) as handle:
        json.dump([entry.to_dict() for entry in trace], handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info("Wrote %d trace entries to %s and %s", len(trace), path, json_path)
    return json_path


def read_segments(path):
    """Read a segments file back as a list of dicts."""
    path = Path(path)
    records = []
    try:
        with path.open(encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    record["tokens"] = [str(t) for t in record["tokens"]]
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    raise FusionError(f"{path}:{line_number}: bad segment record ({e})",
                                      code="BAD_SEGMENT_FILE") from e
                records.append(record)
    except FileNotFoundError as e:
        raise FusionError(f"Segments file {path} does not exist", code="PATH_NOT_FOUND") from e
    except OSError as e:
        raise FusionError(f"Cannot read {path}: {e}", code="IO_ERROR") from e
    return records


def write_metrics(path):
    """Dump the process's Prometheus registry in the text exposition format."""
    try:
        write_to_textfile(str(path), REGISTRY)
    except OSError as e:
        raise FusionError(f"Cannot write metrics to {path}: {e}", code="IO_ERROR") from e
    logger.info("Wrote metrics to %s", path)
