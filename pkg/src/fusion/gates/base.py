import logging
from dataclasses import dataclass

from django.utils.module_loading import import_string

from lmeos.errors import FusionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Assessment:
    """A gate's answer for one TIMEOUT candidate."""

    accept: bool
    p_eos: float | None
    source: str | None
    decided_at_ms: int


class BaseGate:
    """Base class for the second opinion a policy applies to silence timeouts.

    The segmenter feeds every word to :meth:`observe` in stream order and asks
    :meth:`assess` about each TIMEOUT candidate before the word after the gap is
    observed. A gate never sees the decisions it influences, so its answers
    depend only on the stream.

    Args:
        policy: The :class:`~fusion.policies.Policy` being applied.
        model: A :class:`~tagger.model.TaggerModel`, or ``None`` for gates
            that do not use one.
    """

    #: ``None`` if no model is used, otherwise the look-ahead flag the model must have.
    model_lookahead = None

    def __init__(self, policy, model=None):
        self.policy = policy
        self.model = None
        self.state = None
        if self.model_lookahead is None:
            return
        if model is None:
            raise FusionError(f"--model is required for mode {policy.mode.value}",
                              code="MODEL_REQUIRED")
        if model.lookahead != self.model_lookahead:
            kind = "a look-ahead" if self.model_lookahead else "a no-look-ahead"
            raise FusionError(
                f"Mode {policy.mode.value} needs {kind} model, got {model!r}",
                code="MODEL_MODE_MISMATCH",
            )
        self.model = model
        self.state = model.begin_stream()

    def observe(self, event):
        """Take the next word of the stream."""

    def assess(self, candidate, next_event):
        """Decide whether ``candidate`` ends a segment.

        Args:
            candidate: A TIMEOUT :class:`~endpoint.detector.EndpointCandidate`.
            next_event: The word after the gap (it has not been observed yet).

        Returns:
            An :class:`Assessment`.
        """
        raise NotImplementedError(f"{self.__class__.__name__} must implement assess()")

    def due_ms(self, candidate):
        """Earliest stream time at which ``candidate`` can be decided without the next word."""
        return candidate.fired_at_ms

    def final_p_eos(self):
        """Probability reported with the stream-end segment, if the gate has one."""
        return None

    def confirm(self, p_eos, source, decided_at_ms):
        return Assessment(
            accept=p_eos >= self.policy.lm_threshold,
            p_eos=p_eos,
            source=source,
            decided_at_ms=decided_at_ms,
        )


def get_gate(policy, model=None):
    """Load and instantiate the gate registered for ``policy.mode``."""
    from .registry import POLICY_GATES

    try:
        backend_path = POLICY_GATES[policy.mode.value]
    except KeyError as e:
        raise FusionError(f"No gate registered for mode {policy.mode.value}",
                          code="INVALID_POLICY") from e
    klass = import_string(backend_path)
    logger.debug("Using %s for %s", klass.__name__, policy.describe())
    return klass(policy, model=model)
