from .base import Assessment, BaseGate


class AcousticGate(BaseGate):
    """Accepts every silence timeout (VAD-only segmentation)."""

    def assess(self, candidate, next_event):
        return Assessment(accept=True, p_eos=None, source=None,
                          decided_at_ms=candidate.fired_at_ms)
