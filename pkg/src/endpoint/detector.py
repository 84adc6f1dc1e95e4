"""Silence-timeout endpointing over word timings.

Candidates exist only at word boundaries. Silence before the first word never
produces one.
"""

import enum
from dataclasses import dataclass

from lmeos.errors import EndpointError

from .events import validate_stream


class CandidateKind(enum.Enum):
    TIMEOUT = "timeout"
    HARD_TIMEOUT = "hard_timeout"
    STREAM_END = "stream_end"


@dataclass(frozen=True)
class EndpointCandidate:
    after_token_index: int
    silence_ms: int
    fired_at_ms: int
    kind: CandidateKind
    gap_ms: int | None = None

    def to_dict(self):
        return {
            "after_token_index": self.after_token_index,
            "silence_ms": self.silence_ms,
            "fired_at_ms": self.fired_at_ms,
            "kind": self.kind.value,
            "gap_ms": self.gap_ms,
        }


def check_thresholds(silence_threshold_ms, hard_timeout_ms):
    if not 0 < silence_threshold_ms <= hard_timeout_ms:
        raise EndpointError(
            "Thresholds need 0 < silence_threshold_ms <= hard_timeout_ms, "
            f"got {silence_threshold_ms} and {hard_timeout_ms}",
            code="INVALID_THRESHOLD",
        )


def gap_candidates(index, event, next_event, silence_threshold_ms, hard_timeout_ms):
    """Candidates for the silence between token ``index`` and the following one."""
    gap = next_event.start_ms - event.end_ms
    found = []
    if gap >= silence_threshold_ms:
        found.append(EndpointCandidate(index, silence_threshold_ms,
                                       event.end_ms + silence_threshold_ms,
                                       CandidateKind.TIMEOUT, gap))
    if gap >= hard_timeout_ms:
        found.append(EndpointCandidate(index, hard_timeout_ms, event.end_ms + hard_timeout_ms,
                                       CandidateKind.HARD_TIMEOUT, gap))
    return found


def stream_end_candidate(index, event):
    return EndpointCandidate(index, 0, event.end_ms, CandidateKind.STREAM_END)


def detect_candidates(stream, silence_threshold_ms, hard_timeout_ms):
    """Endpoint candidates for a complete stream, in firing order."""
    check_thresholds(silence_threshold_ms, hard_timeout_ms)
    stream = list(stream)
    validate_stream(stream)

    candidates = []
    for index, (event, next_event) in enumerate(zip(stream, stream[1:])):
        candidates.extend(
            gap_candidates(index, event, next_event, silence_threshold_ms, hard_timeout_ms)
        )
    if stream:
        candidates.append(stream_end_candidate(len(stream) - 1, stream[-1]))
    return candidates
