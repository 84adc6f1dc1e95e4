from .base import BaseGate


class LanguageModelGate(BaseGate):
    """Confirms a timeout when the causal tagger says the last word ends a sentence.

    The probability is the one produced when that word was consumed; the
    recurrent state is causal, so recomputing at candidate time would not
    change it.
    """

    model_lookahead = False

    def __init__(self, policy, model=None):
        super().__init__(policy, model=model)
        self.last_prediction = None

    def observe(self, event):
        self.last_prediction = self.model.consume(self.state, event.word)

    def assess(self, candidate, next_event):
        return self.confirm(self.last_prediction.p_eos, "causal", candidate.fired_at_ms)

    def final_p_eos(self):
        return self.last_prediction.p_eos if self.last_prediction else None
