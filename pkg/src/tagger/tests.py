import csv
import json
import struct
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from corpus.examples import Tag, TrainingExample, Variant, build_examples, make_v2_examples
from corpus.io import write_examples
from corpus.text import RawDocument, Sentence, Terminal
from lmeos.errors import TaggerError

from . import network
from .model import Hyperparams, initialize
from .serialization import dumps, load, loads, save
from .training import evaluate, train
from .vocab import OOV_ID, PAD, OOV, Vocabulary, build_vocab

TABLE_DOCUMENT = RawDocument(
    doc_id="doc1",
    text="How is the weather in Seattle? I’m new in town. Wake me up at noon tomorrow.",
)
SAMPLE_TOKENS = ["how", "is", "the", "weather", "in", "seattle"]


def example(*tokens):
    return TrainingExample(tokens=tokens, tags=(Tag.O,) * len(tokens), variant=Variant.TRUNCATED)


def tiny_hyperparams(**overrides):
    values = dict(embed_dim=8, hidden_dim=16, vocab_size=100, learning_rate=0.5,
                  max_epochs=300, patience=None, clip_norm=5.0)
    values.update(overrides)
    return Hyperparams(**values)


def table_examples(lookahead=False):
    examples, _ = build_examples([TABLE_DOCUMENT], lookahead=lookahead)
    return examples


def overfit_corpus(count=50, seed=0):
    """Short sentences whose final word never appears anywhere else."""
    rng = np.random.default_rng(seed)
    subjects = ["i", "we", "they", "you", "people", "friends"]
    verbs = ["like", "see", "want", "need", "love", "find", "keep"]
    determiners = ["the", "a", "my", "some", "our"]
    nouns = ["house", "car", "dog", "book", "song", "game", "plan", "idea"]
    finals = ["today", "now", "there", "again", "too", "tonight", "already", "soon"]
    sentences = set()
    while len(sentences) < count:
        words = [rng.choice(subjects), rng.choice(verbs), rng.choice(determiners),
                 rng.choice(nouns)]
        if rng.random() < 0.5:
            words.insert(3, "old")
        words.append(rng.choice(finals))
        sentences.add(tuple(str(word) for word in words))
    examples = []
    for tokens in sorted(sentences):
        full, truncated = make_v2_examples(Sentence(tokens=tokens, terminal=Terminal.PERIOD))
        examples.extend([full, truncated])
    return examples


class TrainedModelMixin:
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        examples = table_examples()
        cls.vocab = build_vocab(examples, max_size=100)
        cls.model, cls.log = train(examples, cls.vocab, tiny_hyperparams(), seed=7)
        lookahead_examples = table_examples(lookahead=True)
        cls.lookahead_vocab = build_vocab(lookahead_examples, max_size=100)
        cls.lookahead_model, _ = train(lookahead_examples, cls.lookahead_vocab,
                                       tiny_hyperparams(), seed=7, lookahead=True)


class VocabularyTests(SimpleTestCase):
    def test_most_frequent_tokens_are_kept(self):
        examples = [example("a", "a", "a", "b", "b", "c")]
        vocab = build_vocab(examples, max_size=4)
        self.assertEqual(vocab.tokens, [PAD, OOV, "a", "b"])
        self.assertEqual(vocab.id_of("c"), OOV_ID)

    def test_min_frequency_can_exclude_everything(self):
        vocab = build_vocab([example("a")], max_size=10, min_frequency=2)
        self.assertEqual(vocab.tokens, [PAD, OOV])

    def test_ties_break_lexicographically(self):
        vocab = build_vocab([example("zeta", "alpha")], max_size=10)
        self.assertLess(vocab.id_of("alpha"), vocab.id_of("zeta"))

    def test_ids_are_dense(self):
        vocab = build_vocab(table_examples(), max_size=100)
        self.assertEqual(sorted(vocab.index.values()), list(range(len(vocab))))

    def test_empty_corpus(self):
        with self.assertRaises(TaggerError) as ctx:
            build_vocab([], max_size=10)
        self.assertEqual(ctx.exception.code, "EMPTY_CORPUS")

    def test_reserved_tokens_required(self):
        with self.assertRaises(TaggerError):
            Vocabulary(["a", "b"])


class NetworkTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(1)
        self.params = network.Parameters.uniform(self.rng, 5, 3, 4, scale=0.5)

    def numeric_gradient(self, token_ids, tag_ids, lookahead, eps=1e-6):
        def loss():
            probs = network.forward(self.params, token_ids)["probs"]
            return network.sequence_loss(probs, tag_ids, lookahead)

        numeric = []
        for array in self.params.arrays():
            grad = np.zeros_like(array)
            for index in np.ndindex(array.shape):
                original = array[index]
                array[index] = original + eps
                plus = loss()
                array[index] = original - eps
                minus = loss()
                array[index] = original
                grad[index] = (plus - minus) / (2 * eps)
            numeric.append(grad)
        return np.concatenate([g.ravel() for g in numeric])

    def analytic_gradient(self, token_ids, tag_ids, lookahead):
        _, grads = network.loss_and_gradients(self.params, token_ids, tag_ids, lookahead)
        parts = [grads.dense_E(self.params.vocab_size), grads.W, grads.b, grads.U, grads.c_out]
        return np.concatenate([g.ravel() for g in parts])

    def assert_gradients_match(self, token_ids, tag_ids, lookahead):
        analytic = self.analytic_gradient(token_ids, tag_ids, lookahead)
        numeric = self.numeric_gradient(token_ids, tag_ids, lookahead)
        relative = np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic + numeric)
        self.assertLess(relative, 1e-4)

    def test_gradients_match_finite_differences(self):
        self.assert_gradients_match(np.array([2, 3, 2]), np.array([0, 0, 1]), lookahead=False)

    def test_lookahead_gradients_match_finite_differences(self):
        self.assert_gradients_match(np.array([4, 2, 3, 0]), np.array([0, 1, 0]), lookahead=True)

    def test_softmax_is_normalized(self):
        h, c = network.zero_state(self.params)
        for token_id in [1, 2, 3, 4, 0]:
            h, c, probs = network.step(self.params, token_id, h, c)
            self.assertAlmostEqual(float(probs.sum()), 1.0, delta=1e-6)
            self.assertTrue(0.0 <= probs[1] <= 1.0)

    def test_step_does_not_mutate_inputs(self):
        h, c = np.ones(4) * 0.1, np.ones(4) * 0.2
        network.step(self.params, 2, h, c)
        np.testing.assert_array_equal(h, np.ones(4) * 0.1)
        np.testing.assert_array_equal(c, np.ones(4) * 0.2)

    def test_clipping_bounds_the_update(self):
        _, grads = network.loss_and_gradients(self.params, np.array([1, 2]), np.array([0, 1]),
                                              lookahead=False)
        grads.scale(1000.0)
        before = self.params.copy()
        network.sgd_update(self.params, grads, learning_rate=1.0, clip_norm=5.0)
        moved = np.sqrt(sum(np.sum((a - b) ** 2)
                            for a, b in zip(self.params.arrays(), before.arrays())))
        self.assertAlmostEqual(moved, 5.0, places=6)


class StreamingTests(TrainedModelMixin, SimpleTestCase):
    def test_begin_stream(self):
        state = self.lookahead_model.begin_stream()
        self.assertEqual(state.tokens_consumed, 0)
        self.assertIsNone(state.pending_token)
        self.assertFalse(state.h.any())

    def test_streams_are_independent(self):
        first = self.model.begin_stream()
        second = self.model.begin_stream()
        self.model.consume(first, "how")
        self.assertEqual(second.tokens_consumed, 0)
        self.assertFalse(second.h.any())

    def test_one_prediction_per_token_without_lookahead(self):
        state = self.model.begin_stream()
        predictions = [self.model.consume(state, token) for token in SAMPLE_TOKENS]
        self.assertEqual([p.token_index for p in predictions], list(range(6)))
        self.assertIsNone(self.model.flush(state))
        p_eos = [p.p_eos for p in predictions]
        self.assertEqual(int(np.argmax(p_eos)), 5)
        for p in p_eos:
            self.assertTrue(0.0 <= p <= 1.0)

    def test_lookahead_delay_bookkeeping(self):
        model = self.lookahead_model
        state = model.begin_stream()
        self.assertIsNone(model.consume(state, "how"))
        second = model.consume(state, "is")
        self.assertEqual((second.token_index, second.token), (0, "how"))
        issued = 1
        for n, token in enumerate(SAMPLE_TOKENS[2:], start=3):
            self.assertIsNotNone(model.consume(state, token))
            issued += 1
            self.assertEqual(issued, max(0, n - 1))
        self.assertEqual(state.pending_token, "seattle")
        final = model.flush(state)
        self.assertEqual((final.token_index, final.token), (5, "seattle"))
        self.assertIsNone(model.flush(state))

    def test_flush_on_empty_stream(self):
        self.assertIsNone(self.lookahead_model.flush(self.lookahead_model.begin_stream()))

    def test_consuming_after_flush_fails(self):
        model = self.lookahead_model
        state = model.begin_stream()
        model.consume(state, "how")
        model.flush(state)
        with self.assertRaises(TaggerError) as ctx:
            model.consume(state, "is")
        self.assertEqual(ctx.exception.code, "STREAM_CLOSED")

    def test_peek_flush_leaves_state_alone(self):
        model = self.lookahead_model
        state = model.begin_stream()
        for token in SAMPLE_TOKENS:
            model.consume(state, token)
        peeked = model.peek_flush(state)
        self.assertEqual(state.pending_token, "seattle")
        self.assertEqual(model.flush(state), peeked)

    def test_state_from_another_model_is_rejected(self):
        state = self.model.begin_stream()
        with self.assertRaises(TaggerError) as ctx:
            self.lookahead_model.consume(state, "how")
        self.assertEqual(ctx.exception.code, "UNKNOWN_STATE")

    def test_streaming_matches_batch(self):
        tokens = SAMPLE_TOKENS + ["unseen", "i'm", "new"]
        for model in (self.model, self.lookahead_model):
            with self.subTest(lookahead=model.lookahead):
                state = model.begin_stream()
                streamed = [model.consume(state, token) for token in tokens]
                streamed.append(model.flush(state))
                streamed = [p for p in streamed if p is not None]
                batch = model.predict(tokens)
                self.assertEqual([p.token_index for p in streamed],
                                 [p.token_index for p in batch])
                np.testing.assert_allclose([p.p_eos for p in streamed],
                                           [p.p_eos for p in batch], rtol=0, atol=1e-9)

    def test_lookahead_model_sees_the_next_word(self):
        predictions = self.lookahead_model.predict(["how", "is", "the", "weather", "in",
                                                    "seattle", "i'm"])
        p_eos = [p.p_eos for p in predictions]
        self.assertEqual(int(np.argmax(p_eos)), 5)


class TrainingTests(SimpleTestCase):
    def test_same_seed_gives_identical_loss_curves(self):
        examples = table_examples()
        vocab = build_vocab(examples, max_size=100)
        hp = tiny_hyperparams(max_epochs=5)
        first_model, first = train(examples, vocab, hp, seed=3)
        second_model, second = train(examples, vocab, hp, seed=3)
        self.assertEqual(first.losses, second.losses)
        for a, b in zip(first_model.params.arrays(), second_model.params.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_zero_learning_rate_leaves_loss_unchanged(self):
        examples = table_examples()
        vocab = build_vocab(examples, max_size=100)
        _, log = train(examples, vocab, tiny_hyperparams(learning_rate=0.0, max_epochs=4), seed=1)
        for loss in log.losses[1:]:
            self.assertAlmostEqual(loss, log.losses[0], delta=1e-12)

    def test_overfits_a_small_corpus(self):
        examples = overfit_corpus()
        vocab = build_vocab(examples, max_size=5000)
        hp = Hyperparams(embed_dim=32, hidden_dim=64, learning_rate=0.5, max_epochs=200,
                         patience=None)
        model, log = train(examples, vocab, hp, seed=13)
        self.assertLessEqual(len(log.epochs), 200)
        self.assertGreaterEqual(evaluate(model, examples).accuracy, 0.99)

    def test_early_stopping_keeps_the_best_epoch(self):
        examples = table_examples()
        vocab = build_vocab(examples, max_size=100)
        hp = tiny_hyperparams(max_epochs=60, patience=3)
        _, log = train(examples, vocab, hp, seed=5, heldout=examples)
        scores = [record.heldout_eos_f1 for record in log.epochs]
        best = max(scores)
        last_best = max(i for i, score in enumerate(scores, start=1) if score == best)
        self.assertEqual(log.best_epoch, last_best)
        if len(log.epochs) < 60:
            self.assertTrue(log.stopped_early)

    def test_invalid_hyperparams(self):
        with self.assertRaises(TaggerError) as ctx:
            tiny_hyperparams(hidden_dim=0).validate()
        self.assertEqual(ctx.exception.code, "INVALID_HYPERPARAMS")

    def test_nonfinite_loss_aborts(self):
        examples = table_examples()
        vocab = build_vocab(examples, max_size=100)
        hp = tiny_hyperparams(max_epochs=2)
        broken = initialize(vocab, hp, seed=0)
        broken.params.W[0, 0] = np.nan
        with self.assertRaises(TaggerError) as ctx:
            train(examples, vocab, hp, initial=broken)
        self.assertEqual(ctx.exception.code, "NONFINITE_LOSS")

    def test_starting_model_must_match(self):
        examples = table_examples()
        vocab = build_vocab(examples, max_size=100)
        other = initialize(vocab, tiny_hyperparams(hidden_dim=4))
        with self.assertRaises(TaggerError) as ctx:
            train(examples, vocab, tiny_hyperparams(max_epochs=1), initial=other)
        self.assertEqual(ctx.exception.code, "DIMENSION_MISMATCH")

    def test_log_writes_csv(self):
        examples = table_examples()
        vocab = build_vocab(examples, max_size=100)
        _, log = train(examples, vocab, tiny_hyperparams(max_epochs=2), seed=1)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "log.csv"
            log.write_csv(path)
            with open(path, newline="", encoding="utf-8") as handle:
                rows = list(csv.DictReader(handle))
        self.assertEqual([row["epoch"] for row in rows], ["1", "2"])
        self.assertEqual(rows[0]["heldout_eos_f1"], "")


class SerializationTests(TrainedModelMixin, SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "model.bin"

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_bit_exact(self):
        for model in (self.model, self.lookahead_model):
            with self.subTest(lookahead=model.lookahead):
                save(model, self.path)
                loaded = load(self.path)
                for a, b in zip(model.params.arrays(), loaded.params.arrays()):
                    self.assertEqual(a.tobytes(), b.tobytes())
                self.assertEqual(loaded.vocab, model.vocab)
                self.assertEqual(loaded.hyperparams, model.hyperparams)
                self.assertEqual(loaded.lookahead, model.lookahead)
                self.assertEqual(loaded.seed, model.seed)
                self.assertEqual(loaded.predict(SAMPLE_TOKENS), model.predict(SAMPLE_TOKENS))

    def test_untrained_model_round_trips(self):
        model = initialize(self.vocab, tiny_hyperparams(), seed=4)
        for a, b in zip(model.params.arrays(), loads(dumps(model)).params.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_truncated_file(self):
        self.path.write_bytes(dumps(self.model)[:-10])
        with self.assertRaises(TaggerError) as ctx:
            load(self.path)
        self.assertEqual(ctx.exception.code, "CHECKSUM_MISMATCH")

    def test_file_cut_inside_the_header(self):
        data = dumps(self.model)
        for size in (0, 1, 3, 5, 6, 8):
            with self.subTest(size=size), self.assertRaises(TaggerError) as ctx:
                loads(data[:size])
            self.assertEqual(ctx.exception.code, "CHECKSUM_MISMATCH")

    def test_flipped_byte(self):
        data = bytearray(dumps(self.model))
        data[-20] ^= 0xFF
        with self.assertRaises(TaggerError) as ctx:
            loads(bytes(data))
        self.assertEqual(ctx.exception.code, "CHECKSUM_MISMATCH")

    def test_wrong_magic(self):
        self.path.write_bytes(b"NOTMDL" + dumps(self.model)[6:])
        with self.assertRaises(TaggerError) as ctx:
            load(self.path)
        self.assertEqual(ctx.exception.code, "BAD_MAGIC")

    def test_unsupported_version(self):
        data = dumps(self.model)
        data = data[:6] + struct.pack("<H", 99) + data[8:]
        with self.assertRaises(TaggerError) as ctx:
            loads(data)
        self.assertEqual(ctx.exception.code, "VERSION_UNSUPPORTED")

    def test_missing_file(self):
        with self.assertRaises(TaggerError) as ctx:
            load(self.path)
        self.assertEqual(ctx.exception.code, "IO_ERROR")


class TrainCommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.examples = self.root / "examples.jsonl"
        write_examples(self.examples, table_examples(lookahead=True))

    def tearDown(self):
        self.tmp.cleanup()

    def test_writes_model_and_log(self):
        out = self.root / "v3.model"
        stdout = StringIO()
        call_command("train", str(self.examples), str(out), lookahead=True, max_epochs=3,
                     hidden_dim=8, embed_dim=4, report_format="json", stdout=stdout)
        summary = json.loads(stdout.getvalue())
        self.assertEqual(summary["epochs"], 3)
        self.assertTrue(load(out).lookahead)
        with open(self.root / "v3.model.log.csv", newline="", encoding="utf-8") as handle:
            self.assertEqual(len(list(csv.reader(handle))), 4)

    def test_missing_examples_file(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("train", str(self.root / "missing.jsonl"), str(self.root / "m.bin"),
                         stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 1)

    def test_invalid_hyperparams_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("train", str(self.examples), str(self.root / "m.bin"), hidden_dim=0,
                         stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 1)
