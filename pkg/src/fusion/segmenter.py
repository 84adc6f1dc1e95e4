"""The hybrid segmentation state machine.

Silence timeouts propose boundaries; the policy's gate confirms or vetoes
them; a hard timeout closes any gap the gate kept open for too long; the end
of the stream closes whatever is still open. The language model runs over
the whole stream without resets, so its answers never depend on earlier
decisions.
"""

import logging
from dataclasses import replace

from prometheus_client import Counter

from endpoint.detector import (
    CandidateKind,
    EndpointCandidate,
    check_thresholds,
    gap_candidates,
    stream_end_candidate,
)
from endpoint.events import check_event
from lmeos.errors import FusionError

from .gates import get_gate
from .policies import Decision, Mode, Segment, TraceEntry

logger = logging.getLogger(__name__)

SEGMENT_DECISIONS = Counter(
    "lmeos_segment_decisions",
    "Segments emitted, by policy mode and boundary decision",
    ["mode", "decision"],
)
LM_VETOES = Counter(
    "lmeos_lm_vetoes",
    "Silence timeouts vetoed by the language model",
    ["mode"],
)


class Segmenter:
    """Incremental segmenter for one stream.

    Feed word events in order with :meth:`feed`, then call :meth:`finish`.
    Both return the segments they closed. A live caller can also move stream
    time forward with :meth:`advance` so that a silence closes its segment
    when the decision is due rather than when the next word arrives. One
    instance per stream; a model may be shared between instances.

    Args:
        policy: The :class:`~fusion.policies.Policy` to apply.
        model: Tagger for v2/v3.
        on_segment: Optional callable invoked with each segment as it closes.
    """

    def __init__(self, policy, model=None, on_segment=None):
        check_thresholds(policy.silence_threshold_ms, policy.hard_timeout_ms)
        self.policy = policy
        self.gate = get_gate(policy, model=model)
        self.on_segment = on_segment
        self.segments = []
        self.trace = []
        self._buffer = []
        self._previous = None
        self._count = 0
        self._vetoed = {}
        # candidate kind -> trace position, for the open gap's candidates decided by advance()
        self._live = {}
        self._clock_ms = None
        self._finished = False

    def feed(self, event):
        if self._finished:
            raise FusionError("Segmenter already finished", code="STREAM_FINISHED")
        check_event(self._count, event, self._previous)
        if self._clock_ms is not None and event.start_ms < self._clock_ms:
            raise FusionError(
                f"Event {self._count} starts at {event.start_ms}ms, before stream time "
                f"{self._clock_ms}ms",
                code="LATE_EVENT",
            )

        closed = []
        if self._previous is not None:
            for candidate in gap_candidates(
                self._count - 1,
                self._previous,
                event,
                self.policy.silence_threshold_ms,
                self.policy.hard_timeout_ms,
            ):
                if candidate.kind in self._live:
                    position = self._live[candidate.kind]
                    self.trace[position] = replace(self.trace[position], candidate=candidate)
                    continue
                segment = self._handle(candidate, event)
                if segment is not None:
                    closed.append(segment)
        self._live = {}

        self.gate.observe(event)
        self._buffer.append(event)
        self._previous = event
        self._count += 1
        return closed

    def next_deadline_ms(self):
        """Stream time at which :meth:`advance` would next decide something, or ``None``."""
        if self._finished or self._previous is None:
            return None
        if CandidateKind.TIMEOUT not in self._live:
            return self.gate.due_ms(self._open_candidate(CandidateKind.TIMEOUT))
        if CandidateKind.HARD_TIMEOUT not in self._live and self._count - 1 in self._vetoed:
            return self._open_candidate(CandidateKind.HARD_TIMEOUT).fired_at_ms
        return None

    def advance(self, now_ms):
        """Decide the open gap's candidates that are due at stream time ``now_ms``.

        The caller guarantees that no word starts before ``now_ms``. Trace
        entries written here carry ``gap_ms=None`` until the gap ends.
        """
        if self._finished or self._previous is None:
            return []
        self._clock_ms = max(now_ms, self._clock_ms or 0)
        closed = []
        for kind in (CandidateKind.TIMEOUT, CandidateKind.HARD_TIMEOUT):
            if kind in self._live:
                continue
            candidate = self._open_candidate(kind)
            if kind == CandidateKind.TIMEOUT:
                due = self.gate.due_ms(candidate)
            elif self._count - 1 in self._vetoed:
                due = candidate.fired_at_ms
            else:
                # superseded; recorded when the gap ends
                break
            if now_ms < due:
                break
            self._live[kind] = len(self.trace)
            segment = self._handle(candidate, None)
            if segment is not None:
                closed.append(segment)
        return closed

    def finish(self):
        if self._finished:
            return []
        self._finished = True
        if self._previous is None:
            return []
        candidate = stream_end_candidate(self._count - 1, self._previous)
        if not self._buffer:
            # advance() already closed the last segment
            self._record(candidate, None, None, "superseded", None, candidate.fired_at_ms)
            return []
        p_eos = self.gate.final_p_eos()
        segment = self._close(candidate.after_token_index, Decision.STREAM_END, p_eos,
                              candidate.fired_at_ms)
        self._record(candidate, "final" if p_eos is not None else None, p_eos, "emit",
                     Decision.STREAM_END, candidate.fired_at_ms)
        return [segment]

    def _open_candidate(self, kind):
        """Candidate of ``kind`` for the gap after the last word; its length is not known yet."""
        silence = (self.policy.silence_threshold_ms if kind == CandidateKind.TIMEOUT
                   else self.policy.hard_timeout_ms)
        return EndpointCandidate(self._count - 1, silence, self._previous.end_ms + silence, kind)

    def _handle(self, candidate, next_event):
        index = candidate.after_token_index
        if candidate.kind == CandidateKind.TIMEOUT:
            assessment = self.gate.assess(candidate, next_event)
            if assessment.accept:
                decision = Decision.VAD_ONLY if self.policy.mode == Mode.V1 else Decision.LM_CONFIRMED
                self._record(candidate, assessment.source, assessment.p_eos, "emit", decision,
                             assessment.decided_at_ms)
                return self._close(index, decision, assessment.p_eos, assessment.decided_at_ms)
            self._vetoed[index] = assessment.p_eos
            LM_VETOES.labels(mode=self.policy.mode.value).inc()
            self._record(candidate, assessment.source, assessment.p_eos, "veto", None,
                         assessment.decided_at_ms)
            return None

        # HARD_TIMEOUT: only closes a gap the gate left open.
        if index not in self._vetoed:
            self._record(candidate, None, None, "superseded", None, candidate.fired_at_ms)
            return None
        p_eos = self._vetoed.pop(index)
        self._record(candidate, "reused", p_eos, "emit", Decision.HARD_TIMEOUT,
                     candidate.fired_at_ms)
        return self._close(index, Decision.HARD_TIMEOUT, p_eos, candidate.fired_at_ms)

    def _close(self, boundary_index, decision, p_eos, fired_at_ms):
        segment = Segment(
            events=tuple(self._buffer),
            boundary_index=boundary_index,
            decision=decision,
            p_eos=p_eos,
            fired_at_ms=fired_at_ms,
        )
        self._buffer = []
        self._vetoed = {k: v for k, v in self._vetoed.items() if k > boundary_index}
        self.segments.append(segment)
        SEGMENT_DECISIONS.labels(mode=self.policy.mode.value, decision=decision.value).inc()
        logger.debug("Segment closed after token %d (%s, latency %dms)", boundary_index,
                     decision.value, segment.latency_ms)
        if self.on_segment is not None:
            self.on_segment(segment)
        return segment

    def _record(self, candidate, lm_source, p_eos, verdict, decision, decided_at_ms):
        self.trace.append(TraceEntry(
            candidate=candidate,
            lm_source=lm_source,
            p_eos=p_eos,
            verdict=verdict,
            decision=decision,
            decided_at_ms=decided_at_ms,
        ))


def segment(stream, policy, model=None):
    """Segment a complete stream. Returns ``(segments, trace)``."""
    segmenter = Segmenter(policy, model=model)
    for event in stream:
        segmenter.feed(event)
    segmenter.finish()
    return segmenter.segments, segmenter.trace


def compare_policies(stream, policies, model_v2=None, model_v3=None):
    """Run several policies over the same stream, keyed by mode."""
    models = {Mode.V1: None, Mode.V2: model_v2, Mode.V3: model_v3}
    stream = tuple(stream)
    results = {}
    for policy in policies:
        if policy.mode in results:
            raise FusionError(f"Policy mode {policy.mode.value} given twice",
                              code="DUPLICATE_POLICY")
        results[policy.mode], _ = segment(stream, policy, model=models[policy.mode])
    return results
