"""Training and evaluation for the LM-EOS tagger.

The recipe is plain per-sequence SGD on the mean per-token cross-entropy with
global-norm clipping, seeded shuffling and early stopping on held-out EOS F1.
Everything runs single-threaded in float64, so a seed fixes the result.
"""

import csv
import logging
import math
from dataclasses import astuple, dataclass, field, fields

import numpy as np

from corpus.examples import Tag
from lmeos.errors import TaggerError

from . import network
from .model import TaggerModel, initialize, round_to_float32
from .vocab import PAD_ID

logger = logging.getLogger(__name__)

TAG_IDS = {Tag.O: 0, Tag.EOS: network.EOS_CLASS}


@dataclass(frozen=True)
class Evaluation:
    loss: float
    accuracy: float
    eos_precision: float
    eos_recall: float
    eos_f1: float
    tokens: int

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    heldout_accuracy: float | None
    heldout_eos_f1: float | None


@dataclass
class TrainingLog:
    epochs: list = field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False

    @property
    def losses(self):
        return [record.train_loss for record in self.epochs]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow([f.name for f in fields(EpochRecord)])
            for record in self.epochs:
                writer.writerow(["" if value is None else repr(value) for value in astuple(record)])


@dataclass(frozen=True)
class EncodedExample:
    token_ids: np.ndarray
    tag_ids: np.ndarray


def encode_examples(examples, vocab, lookahead):
    encoded = []
    for example in examples:
        encoded.append(EncodedExample(
            token_ids=network.network_input(vocab.encode(example.tokens), lookahead, PAD_ID),
            tag_ids=np.array([TAG_IDS[tag] for tag in example.tags], dtype=np.int64),
        ))
    return encoded


def _f1(true_positives, predicted, gold):
    precision = true_positives / predicted if predicted else 1.0
    recall = true_positives / gold if gold else 1.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def _evaluate_encoded(params, encoded, lookahead, threshold=0.5):
    offset = network.read_offset(lookahead)
    total_loss = 0.0
    correct = tokens = 0
    true_positives = predicted = gold = 0
    for item in encoded:
        probs = network.forward(params, item.token_ids)["probs"]
        total_loss += network.sequence_loss(probs, item.tag_ids, lookahead)
        p_eos = probs[offset:offset + len(item.tag_ids), network.EOS_CLASS]
        guess = p_eos >= threshold
        truth = item.tag_ids == network.EOS_CLASS
        correct += int(np.sum(guess == truth))
        tokens += len(truth)
        true_positives += int(np.sum(guess & truth))
        predicted += int(np.sum(guess))
        gold += int(np.sum(truth))

    precision, recall, f1 = _f1(true_positives, predicted, gold)
    return Evaluation(
        loss=total_loss / len(encoded) if encoded else 0.0,
        accuracy=correct / tokens if tokens else 1.0,
        eos_precision=precision,
        eos_recall=recall,
        eos_f1=f1,
        tokens=tokens,
    )


def evaluate(model, examples, threshold=0.5):
    """Loss, per-token accuracy and EOS precision/recall/F1 of a model on examples.

    A token counts as EOS when ``p_eos >= threshold``.
    """
    encoded = encode_examples(examples, model.vocab, model.lookahead)
    return _evaluate_encoded(model.params, encoded, model.lookahead, threshold)


def split_heldout(examples, fraction, rng):
    """Seeded held-out split; at least one example always stays in training."""
    count = min(int(round(len(examples) * fraction)), len(examples) - 1)
    if count <= 0:
        return list(examples), []
    order = rng.permutation(len(examples))
    heldout_ids = set(order[:count].tolist())
    train = [ex for i, ex in enumerate(examples) if i not in heldout_ids]
    heldout = [ex for i, ex in enumerate(examples) if i in heldout_ids]
    return train, heldout


def train(examples, vocab, hyperparams, seed=0, lookahead=False, heldout=None, initial=None):
    """Train a tagger and return ``(model, TrainingLog)``.

    Args:
        examples: TrainingExample sequence.
        vocab: Vocabulary used to encode tokens.
        hyperparams: Hyperparams; ``patience=None`` disables early stopping.
        seed: fixes initialization, the held-out split and the shuffles.
        lookahead: train a one-word-delay model (``tokens + [PAD]`` input).
        heldout: explicit held-out examples. When omitted and early stopping is
            on, a ``heldout_fraction`` share of ``examples`` is held out.
        initial: optional starting model (warm start).

    Raises:
        TaggerError: EMPTY_CORPUS, INVALID_HYPERPARAMS, DIMENSION_MISMATCH or
            NONFINITE_LOSS.
    """
    hyperparams.validate()
    examples = list(examples)
    if not examples:
        raise TaggerError("No training examples", code="EMPTY_CORPUS")

    rng = np.random.default_rng(seed)
    if heldout is None and hyperparams.patience is not None:
        examples, heldout = split_heldout(examples, hyperparams.heldout_fraction, rng)
    heldout = list(heldout or [])

    if initial is None:
        initial = initialize(vocab, hyperparams, lookahead=lookahead, seed=seed)
    elif (
        len(initial.vocab) != len(vocab)
        or initial.hyperparams.embed_dim != hyperparams.embed_dim
        or initial.hyperparams.hidden_dim != hyperparams.hidden_dim
    ):
        raise TaggerError(
            f"Starting model {initial!r} does not match vocab size {len(vocab)}, "
            f"embed {hyperparams.embed_dim}, hidden {hyperparams.hidden_dim}",
            code="DIMENSION_MISMATCH",
        )
    params = initial.params.copy()

    train_set = encode_examples(examples, vocab, lookahead)
    heldout_set = encode_examples(heldout, vocab, lookahead)
    logger.info(
        "Training on %d examples (%d held out), vocab %d, embed %d, hidden %d, lookahead=%s",
        len(train_set), len(heldout_set), len(vocab), hyperparams.embed_dim,
        hyperparams.hidden_dim, lookahead,
    )

    log = TrainingLog()
    best_params, best_f1, stale = None, -math.inf, 0
    for epoch in range(1, hyperparams.max_epochs + 1):
        for position in rng.permutation(len(train_set)):
            item = train_set[position]
            loss, grads = network.loss_and_gradients(params, item.token_ids, item.tag_ids,
                                                     lookahead)
            if not math.isfinite(loss):
                raise TaggerError(
                    f"Non-finite loss {loss} at epoch {epoch} on training example {position}",
                    code="NONFINITE_LOSS",
                )
            network.sgd_update(params, grads, hyperparams.learning_rate, hyperparams.clip_norm)

        train_eval = _evaluate_encoded(params, train_set, lookahead)
        if not math.isfinite(train_eval.loss) or not params.all_finite():
            raise TaggerError(f"Non-finite loss {train_eval.loss} after epoch {epoch}",
                              code="NONFINITE_LOSS")
        heldout_eval = _evaluate_encoded(params, heldout_set, lookahead) if heldout_set else None
        record = EpochRecord(
            epoch=epoch,
            train_loss=train_eval.loss,
            train_accuracy=train_eval.accuracy,
            heldout_accuracy=heldout_eval.accuracy if heldout_eval else None,
            heldout_eos_f1=heldout_eval.eos_f1 if heldout_eval else None,
        )
        log.epochs.append(record)
        logger.debug("Epoch %d: %s", epoch, record)

        if hyperparams.patience is None or heldout_eval is None:
            continue
        # Ties keep the later epoch but do not count as an improvement.
        stale = 0 if heldout_eval.eos_f1 > best_f1 else stale + 1
        if heldout_eval.eos_f1 >= best_f1:
            best_f1 = heldout_eval.eos_f1
            best_params = params.copy()
            log.best_epoch = epoch
        if stale >= hyperparams.patience:
            log.stopped_early = True
            logger.info("Early stop after epoch %d; best epoch %d (EOS F1 %.4f)",
                        epoch, log.best_epoch, best_f1)
            break

    if best_params is not None:
        params = best_params
    else:
        log.best_epoch = len(log.epochs)

    model = TaggerModel(
        vocab=vocab,
        params=round_to_float32(params),
        hyperparams=hyperparams,
        lookahead=lookahead,
        seed=seed,
    )
    final = log.epochs[log.best_epoch - 1] if log.epochs else None
    logger.info("Finished training: %d epochs, kept epoch %s (%s)", len(log.epochs),
                log.best_epoch, final)
    return model, log
