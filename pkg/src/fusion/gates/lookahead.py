from .base import BaseGate


class LookaheadGate(BaseGate):
    """Waits for the next word before asking the look-ahead tagger.

    The next word counts as arrived at its ``start_ms``. If it arrives within
    ``lookahead_wait_ms`` of the timeout, the delayed prediction for the last
    word is used and the decision is taken on arrival. Otherwise the decision
    is taken at the deadline with the flush prediction (PAD as successor).
    """

    model_lookahead = True

    def observe(self, event):
        self.model.consume(self.state, event.word)

    def assess(self, candidate, next_event):
        deadline = candidate.fired_at_ms + self.policy.lookahead_wait_ms
        if next_event is not None and next_event.start_ms <= deadline:
            ahead = self.state.copy()
            prediction = self.model.consume(ahead, next_event.word)
            decided_at = max(candidate.fired_at_ms, next_event.start_ms)
            return self.confirm(prediction.p_eos, "lookahead", decided_at)
        prediction = self.model.peek_flush(self.state)
        return self.confirm(prediction.p_eos, "flush", deadline)

    def due_ms(self, candidate):
        # a word starting exactly at the deadline still counts as arrived
        return candidate.fired_at_ms + self.policy.lookahead_wait_ms + 1

    def final_p_eos(self):
        prediction = self.model.flush(self.state)
        return prediction.p_eos if prediction else None
