"""The LM-EOS tagger model and its streaming interface."""

import logging
import math
import zlib
from dataclasses import asdict, dataclass, fields, replace
from functools import cached_property

import numpy as np
from django.conf import settings

from lmeos.errors import TaggerError

from . import network
from .vocab import PAD_ID

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Hyperparams:
    embed_dim: int = 32
    hidden_dim: int = 64
    vocab_size: int = 5000
    min_frequency: int = 1
    learning_rate: float = 0.5
    max_epochs: int = 200
    patience: int | None = 5
    clip_norm: float | None = 5.0
    init_scale: float = 0.1
    heldout_fraction: float = 0.1

    @classmethod
    def from_settings(cls, **overrides):
        base = cls(
            embed_dim=settings.LMEOS_EMBED_DIM,
            hidden_dim=settings.LMEOS_HIDDEN_DIM,
            vocab_size=settings.LMEOS_VOCAB_SIZE,
            min_frequency=settings.LMEOS_MIN_FREQUENCY,
            learning_rate=settings.LMEOS_LEARNING_RATE,
            max_epochs=settings.LMEOS_MAX_EPOCHS,
            patience=settings.LMEOS_PATIENCE,
            clip_norm=settings.LMEOS_CLIP_NORM,
            init_scale=settings.LMEOS_INIT_SCALE,
            heldout_fraction=settings.LMEOS_HELDOUT_FRACTION,
        )
        return replace(base, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def to_dict(self):
        return asdict(self)

    def validate(self):
        problems = []
        for name in ("embed_dim", "hidden_dim", "max_epochs", "min_frequency"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive")
        if self.vocab_size < 2:
            problems.append("vocab_size must be at least 2")
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            problems.append("learning_rate must be a finite number >= 0")
        if self.patience is not None and self.patience < 1:
            problems.append("patience must be positive (or None to disable early stopping)")
        if self.clip_norm is not None and not self.clip_norm > 0:
            problems.append("clip_norm must be positive")
        if not self.init_scale > 0:
            problems.append("init_scale must be positive")
        if not 0.0 <= self.heldout_fraction < 1.0:
            problems.append("heldout_fraction must be in [0, 1)")
        if problems:
            raise TaggerError("; ".join(problems), code="INVALID_HYPERPARAMS")
        return self


@dataclass(frozen=True)
class EosPrediction:
    token_index: int
    token: str
    p_eos: float


@dataclass
class TaggerState:
    """Recurrent state of one in-progress stream. Single owner, never shared."""

    model_fingerprint: int
    h: np.ndarray
    c: np.ndarray
    tokens_consumed: int = 0
    pending_token: str | None = None
    closed: bool = False

    def copy(self):
        return replace(self, h=self.h.copy(), c=self.c.copy())


@dataclass(frozen=True, eq=False)
class TaggerModel:
    vocab: object
    params: network.Parameters
    hyperparams: Hyperparams
    lookahead: bool = False
    seed: int = 0

    def __post_init__(self):
        expected = network.Parameters.shapes(len(self.vocab), self.hyperparams.embed_dim,
                                             self.hyperparams.hidden_dim)
        for name in network.PARAMETER_ORDER:
            shape = getattr(self.params, name).shape
            if shape != expected[name]:
                raise TaggerError(f"Parameter {name} has shape {shape}, expected {expected[name]}",
                                  code="DIMENSION_MISMATCH")

    def __repr__(self):
        return (f"TaggerModel(vocab={len(self.vocab)}, embed={self.hyperparams.embed_dim}, "
                f"hidden={self.hyperparams.hidden_dim}, lookahead={self.lookahead})")

    @cached_property
    def fingerprint(self):
        checksum = zlib.crc32("\n".join(self.vocab.tokens).encode("utf-8"))
        for array in self.params.arrays():
            checksum = zlib.crc32(np.ascontiguousarray(array).tobytes(), checksum)
        return (id(self) << 32) | checksum

    # Streaming

    def begin_stream(self):
        h, c = network.zero_state(self.params)
        return TaggerState(model_fingerprint=self.fingerprint, h=h, c=c)

    def _check(self, state):
        if state.model_fingerprint != self.fingerprint:
            raise TaggerError("Stream state was created by a different model", code="UNKNOWN_STATE")

    def _advance(self, state, token_id):
        h, c, probs = network.step(self.params, token_id, state.h, state.c)
        state.h, state.c = h, c
        return float(probs[network.EOS_CLASS])

    def consume(self, state, token):
        """Feed one token.

        Without look-ahead the prediction is for the token just consumed. With
        look-ahead it is for the previous token, and nothing comes back for the
        first one.
        """
        self._check(state)
        if state.closed:
            raise TaggerError("Stream was flushed; start a new stream", code="STREAM_CLOSED")
        p_eos = self._advance(state, self.vocab.id_of(token))
        state.tokens_consumed += 1

        if not self.lookahead:
            return EosPrediction(state.tokens_consumed - 1, token, p_eos)

        previous = state.pending_token
        state.pending_token = token
        if previous is None:
            return None
        return EosPrediction(state.tokens_consumed - 2, previous, p_eos)

    def flush(self, state):
        """Emit the pending look-ahead prediction, feeding PAD as its successor."""
        self._check(state)
        if not self.lookahead or state.pending_token is None:
            return None
        p_eos = self._advance(state, PAD_ID)
        prediction = EosPrediction(state.tokens_consumed - 1, state.pending_token, p_eos)
        state.pending_token = None
        state.closed = True
        return prediction

    def peek_flush(self, state):
        """What :meth:`flush` would return, leaving ``state`` untouched."""
        return self.flush(state.copy())

    # Batch

    def predict(self, tokens):
        """Predictions for every token of a complete sequence, in order."""
        tokens = list(tokens)
        if not tokens:
            return []
        ids = network.network_input(self.vocab.encode(tokens), self.lookahead, PAD_ID)
        probs = network.forward(self.params, ids)["probs"]
        offset = network.read_offset(self.lookahead)
        return [
            EosPrediction(index, token, float(probs[index + offset, network.EOS_CLASS]))
            for index, token in enumerate(tokens)
        ]


def round_to_float32(params):
    """Round parameters through float32 so a saved model loads back bit-exactly."""
    return params.astype(np.float32).astype(np.float64)


def initialize(vocab, hyperparams, lookahead=False, seed=0):
    """An untrained model with seeded uniform(-init_scale, init_scale) parameters."""
    hyperparams.validate()
    rng = np.random.default_rng(seed)
    params = network.Parameters.uniform(
        rng, len(vocab), hyperparams.embed_dim, hyperparams.hidden_dim, hyperparams.init_scale
    )
    return TaggerModel(
        vocab=vocab,
        params=round_to_float32(params),
        hyperparams=hyperparams,
        lookahead=lookahead,
        seed=seed,
    )
