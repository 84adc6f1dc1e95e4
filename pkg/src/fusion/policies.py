import enum
from dataclasses import dataclass

from lmeos.errors import FusionError


class Mode(enum.Enum):
    V1 = "v1"  # silence timeout only
    V2 = "v2"  # timeout confirmed by the causal LM-EOS tagger
    V3 = "v3"  # timeout confirmed by the one-word look-ahead tagger


class Decision(enum.Enum):
    VAD_ONLY = "VAD_ONLY"
    LM_CONFIRMED = "LM_CONFIRMED"
    HARD_TIMEOUT = "HARD_TIMEOUT"
    STREAM_END = "STREAM_END"


@dataclass(frozen=True)
class Policy:
    mode: Mode = Mode.V1
    silence_threshold_ms: int = 500
    hard_timeout_ms: int = 2000
    lm_threshold: float = 0.5
    lookahead_wait_ms: int | None = None

    def __post_init__(self):
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(self.mode))
        if self.lookahead_wait_ms is None:
            object.__setattr__(self, "lookahead_wait_ms",
                               self.hard_timeout_ms - self.silence_threshold_ms)
        self.validate()

    def validate(self):
        if not 0 < self.silence_threshold_ms <= self.hard_timeout_ms:
            raise FusionError(
                "Policy needs 0 < silence_threshold_ms <= hard_timeout_ms, got "
                f"{self.silence_threshold_ms} and {self.hard_timeout_ms}",
                code="INVALID_POLICY",
            )
        if not 0.0 <= self.lm_threshold <= 1.0:
            raise FusionError(f"lm_threshold must be in [0, 1], got {self.lm_threshold}",
                              code="INVALID_POLICY")
        if not 0 <= self.lookahead_wait_ms <= self.hard_timeout_ms - self.silence_threshold_ms:
            raise FusionError(
                "lookahead_wait_ms must be in [0, hard_timeout_ms - silence_threshold_ms], "
                f"got {self.lookahead_wait_ms}",
                code="INVALID_POLICY",
            )

    def describe(self):
        text = (f"{self.mode.value} silence={self.silence_threshold_ms}ms "
                f"hard={self.hard_timeout_ms}ms")
        if self.mode != Mode.V1:
            text += f" tau={self.lm_threshold}"
        if self.mode == Mode.V3:
            text += f" wait={self.lookahead_wait_ms}ms"
        return text


@dataclass(frozen=True)
class Segment:
    events: tuple
    boundary_index: int
    decision: Decision
    p_eos: float | None
    fired_at_ms: int

    @property
    def tokens(self):
        return [event.word for event in self.events]

    @property
    def start_ms(self):
        return self.events[0].start_ms

    @property
    def end_ms(self):
        return self.events[-1].end_ms

    @property
    def latency_ms(self):
        return self.fired_at_ms - self.end_ms

    def to_dict(self):
        return {
            "tokens": self.tokens,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "boundary_index": self.boundary_index,
            "decision": self.decision.value,
            "p_eos": self.p_eos,
            "latency_ms": self.latency_ms,
        }


@dataclass(frozen=True)
class TraceEntry:
    """What the segmenter did with one endpoint candidate."""

    candidate: object
    lm_source: str | None
    p_eos: float | None
    verdict: str
    decision: Decision | None
    decided_at_ms: int

    @property
    def latency_ms(self):
        # fired_at - silence is the end of the token before the gap
        token_end = self.candidate.fired_at_ms - self.candidate.silence_ms
        return self.decided_at_ms - token_end

    def to_dict(self):
        return {
            **self.candidate.to_dict(),
            "lm_source": self.lm_source,
            "p_eos": self.p_eos,
            "verdict": self.verdict,
            "decision": self.decision.value if self.decision else None,
            "decided_at_ms": self.decided_at_ms,
            "latency_ms": self.latency_ms,
        }

    def to_line(self):
        c = self.candidate
        p = "-" if self.p_eos is None else f"{self.p_eos:.4f}"
        source = self.lm_source or "-"
        decision = self.decision.value if self.decision else "-"
        return (f"{c.fired_at_ms:>8}ms  after={c.after_token_index:<5} {c.kind.value:<12} "
                f"lm={source:<9} p_eos={p:<7} {self.verdict:<10} {decision:<12} "
                f"latency={self.latency_ms}ms")
