import json
import math
import random
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, tag

from corpus.examples import Tag, TrainingExample, Variant, build_examples, sentences_from_document
from corpus.text import RawDocument
from endpoint.detector import detect_candidates
from endpoint.events import WordEvent, write_events
from endpoint.replay import replay
from lmeos.errors import EndpointError, FusionError
from tagger.model import Hyperparams, initialize
from tagger.serialization import save
from tagger.training import train
from tagger.vocab import build_vocab

from .benchmark import BenchmarkConfig, build_suite, read_suite, synthesize_stream, write_suite
from .gates import POLICY_GATES, AcousticGate, LanguageModelGate, LookaheadGate, get_gate
from .io import read_segments, write_segments, write_trace
from .policies import Decision, Mode, Policy
from .segmenter import Segmenter, compare_policies, segment

DEMO_DOCUMENTS = [
    RawDocument(
        doc_id="doc1",
        text="How is the weather in Seattle? I’m new in town. Wake me up at noon tomorrow.",
    ),
    RawDocument(doc_id="doc2", text="Wake me up at noon. How are you?"),
]

WORDS = ["how", "is", "the", "weather", "in", "seattle", "i'm", "new", "town", "wake"]


def demo_stream():
    """how is the weather in <600ms> seattle <600ms> i'm new in town"""
    pauses = {4: 600, 5: 600}
    events, clock = [], 0
    for index, word in enumerate("how is the weather in seattle i'm new in town".split()):
        events.append(WordEvent(word, clock, clock + 250))
        clock += 250 + pauses.get(index, 100)
    return events


def timed(*spans):
    return [WordEvent(WORDS[i % len(WORDS)], start, end) for i, (start, end) in enumerate(spans)]


def random_stream(rng, max_words=12):
    events, clock = [], rng.randint(0, 300)
    for _ in range(rng.randint(1, max_words)):
        duration = rng.randint(80, 400)
        events.append(WordEvent(rng.choice(WORDS), clock, clock + duration))
        clock += duration + rng.choice([
            rng.randint(0, 400), 500, rng.randint(500, 1999), 2000, rng.randint(2000, 3500),
        ])
    return events


def boundaries(segments):
    return {s.boundary_index for s in segments[:-1]}


def tokens_of(segments):
    return [token for s in segments for token in s.tokens]


def untrained_model(lookahead, seed=1):
    example = TrainingExample(tokens=tuple(WORDS), tags=(Tag.O,) * len(WORDS),
                              variant=Variant.TRUNCATED)
    vocab = build_vocab([example], max_size=100)
    hyperparams = Hyperparams(embed_dim=4, hidden_dim=8, vocab_size=100, init_scale=1.0)
    return initialize(vocab, hyperparams, lookahead=lookahead, seed=seed)


def demo_models():
    hyperparams = Hyperparams(embed_dim=8, hidden_dim=16, vocab_size=100, learning_rate=0.5,
                              max_epochs=300, patience=None, clip_norm=5.0)
    models = {}
    for lookahead in (False, True):
        examples, _ = build_examples(DEMO_DOCUMENTS, lookahead=lookahead)
        vocab = build_vocab(examples, max_size=100)
        models[lookahead], _ = train(examples, vocab, hyperparams, seed=7, lookahead=lookahead)
    return models[False], models[True]


class PolicyTests(SimpleTestCase):
    def test_defaults(self):
        policy = Policy()
        self.assertEqual((policy.silence_threshold_ms, policy.hard_timeout_ms), (500, 2000))
        self.assertEqual(policy.lookahead_wait_ms, 1500)

    def test_mode_from_string(self):
        self.assertEqual(Policy(mode="v3").mode, Mode.V3)

    def test_invalid_policies(self):
        cases = [
            dict(lm_threshold=1.5),
            dict(lm_threshold=-0.1),
            dict(silence_threshold_ms=2500),
            dict(silence_threshold_ms=0),
            dict(lookahead_wait_ms=1600),
        ]
        for kwargs in cases:
            with self.subTest(**kwargs), self.assertRaises(FusionError) as ctx:
                Policy(**kwargs)
            self.assertEqual(ctx.exception.code, "INVALID_POLICY")


class GateTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.causal = untrained_model(lookahead=False)
        cls.lookahead = untrained_model(lookahead=True)

    def test_registry_covers_every_mode(self):
        self.assertEqual(set(POLICY_GATES), {mode.value for mode in Mode})

    def test_gate_per_mode(self):
        self.assertIsInstance(get_gate(Policy(mode=Mode.V1)), AcousticGate)
        self.assertIsInstance(get_gate(Policy(mode=Mode.V2), self.causal), LanguageModelGate)
        self.assertIsInstance(get_gate(Policy(mode=Mode.V3), self.lookahead), LookaheadGate)

    def test_model_required(self):
        for mode in (Mode.V2, Mode.V3):
            with self.subTest(mode=mode), self.assertRaises(FusionError) as ctx:
                get_gate(Policy(mode=mode))
            self.assertEqual(ctx.exception.code, "MODEL_REQUIRED")

    def test_model_mode_mismatch(self):
        for mode, model in ((Mode.V2, self.lookahead), (Mode.V3, self.causal)):
            with self.subTest(mode=mode), self.assertRaises(FusionError) as ctx:
                get_gate(Policy(mode=mode), model)
            self.assertEqual(ctx.exception.code, "MODEL_MODE_MISMATCH")


class AcousticSegmentationTests(SimpleTestCase):
    def test_scripted_stream(self):
        segments, trace = segment(demo_stream(), Policy(mode=Mode.V1))
        self.assertEqual([s.decision for s in segments],
                         [Decision.VAD_ONLY, Decision.VAD_ONLY, Decision.STREAM_END])
        self.assertEqual([" ".join(s.tokens) for s in segments],
                         ["how is the weather in", "seattle", "i'm new in town"])
        self.assertEqual([s.latency_ms for s in segments], [500, 500, 0])
        self.assertEqual(len(trace), 3)

    def test_no_gaps_gives_one_segment(self):
        stream = timed((0, 200), (250, 400), (450, 700))
        segments, _ = segment(stream, Policy())
        self.assertEqual(len(segments), 1)
        self.assertEqual(segments[0].decision, Decision.STREAM_END)
        self.assertIsNone(segments[0].p_eos)

    def test_empty_stream(self):
        self.assertEqual(segment([], Policy()), ([], []))

    def test_gap_at_threshold_is_a_boundary(self):
        segments, _ = segment(timed((0, 200), (700, 900)), Policy())
        self.assertEqual(boundaries(segments), {0})

    def test_hard_timeout_on_closed_gap_is_superseded(self):
        stream = timed((0, 300), (2800, 3000))
        _, trace = segment(stream, Policy())
        self.assertEqual([entry.verdict for entry in trace], ["emit", "superseded", "emit"])
        self.assertEqual(len(trace), len(detect_candidates(stream, 500, 2000)))

    def test_trace_files(self):
        segments, trace = segment(demo_stream(), Policy())
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "trace.txt"
            json_path = write_trace(path, trace, policy=Policy())
            lines = path.read_text(encoding="utf-8").splitlines()
            entries = json.loads(json_path.read_text(encoding="utf-8"))
            write_segments(Path(tmp) / "segments.jsonl", segments)
            records = read_segments(Path(tmp) / "segments.jsonl")
        self.assertEqual(len(lines), 2 + len(trace))
        self.assertEqual([e["verdict"] for e in entries], ["emit", "emit", "emit"])
        self.assertEqual(records, [s.to_dict() for s in segments])

    def test_feed_after_finish(self):
        segmenter = Segmenter(Policy())
        segmenter.feed(WordEvent("a", 0, 100))
        segmenter.finish()
        with self.assertRaises(FusionError) as ctx:
            segmenter.feed(WordEvent("b", 200, 300))
        self.assertEqual(ctx.exception.code, "STREAM_FINISHED")

    def test_unsorted_stream(self):
        segmenter = Segmenter(Policy())
        segmenter.feed(WordEvent("a", 500, 600))
        with self.assertRaises(EndpointError):
            segmenter.feed(WordEvent("b", 100, 200))

    def test_feed_returns_closed_segments(self):
        segmenter = Segmenter(Policy())
        self.assertEqual(segmenter.feed(WordEvent("a", 0, 100)), [])
        closed = segmenter.feed(WordEvent("b", 900, 1000))
        self.assertEqual([s.tokens for s in closed], [["a"]])
        self.assertEqual([s.tokens for s in segmenter.finish()], [["b"]])


class LookaheadTimingTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.model = untrained_model(lookahead=True)

    def test_next_word_within_wait_uses_lookahead(self):
        policy = Policy(mode=Mode.V3, lm_threshold=0.0)
        segments, trace = segment(timed((0, 300), (1200, 1500)), policy, self.model)
        self.assertEqual((trace[0].lm_source, trace[0].decided_at_ms), ("lookahead", 1200))
        self.assertEqual(segments[0].latency_ms, 900)

    def test_late_word_uses_flush_at_deadline(self):
        policy = Policy(mode=Mode.V3, lm_threshold=0.0, lookahead_wait_ms=300)
        segments, trace = segment(timed((0, 300), (1200, 1500)), policy, self.model)
        self.assertEqual((trace[0].lm_source, trace[0].decided_at_ms), ("flush", 1100))
        self.assertEqual(segments[0].latency_ms, 800)
        self.assertEqual(segments[0].decision, Decision.LM_CONFIRMED)

    def test_vetoed_long_gap_closes_at_hard_timeout(self):
        policy = Policy(mode=Mode.V3, lm_threshold=1.0)
        segments, trace = segment(timed((0, 300), (2800, 3000)), policy, self.model)
        self.assertEqual([s.decision for s in segments],
                         [Decision.HARD_TIMEOUT, Decision.STREAM_END])
        self.assertEqual(segments[0].latency_ms, 2000)
        self.assertEqual(segments[0].p_eos, trace[0].p_eos)
        self.assertEqual([(e.lm_source, e.verdict) for e in trace],
                         [("flush", "veto"), ("reused", "emit"), ("final", "emit")])

    def test_stream_end_carries_flush_probability(self):
        segments, _ = segment(timed((0, 300), (400, 600)), Policy(mode=Mode.V3), self.model)
        self.assertIsNotNone(segments[-1].p_eos)


class StepClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now

    def sleep(self, seconds):
        self.now += seconds


def live_segment(stream, policy, model=None):
    """Drive a segmenter through replay so silences are decided between words."""
    segmenter = Segmenter(policy, model=model)
    for event in replay(stream, math.inf, timer=segmenter):
        segmenter.feed(event)
    segmenter.finish()
    return segmenter.segments, segmenter.trace


class LiveSegmentationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.models = {Mode.V2: untrained_model(lookahead=False),
                      Mode.V3: untrained_model(lookahead=True)}

    def test_timeout_closes_before_the_next_word(self):
        segmenter = Segmenter(Policy())
        self.assertEqual(segmenter.feed(WordEvent("hello", 0, 300)), [])
        self.assertEqual(segmenter.next_deadline_ms(), 800)
        self.assertEqual(segmenter.advance(799), [])
        closed = segmenter.advance(800)
        self.assertEqual([(s.tokens, s.decision, s.latency_ms) for s in closed],
                         [(["hello"], Decision.VAD_ONLY, 500)])
        self.assertIsNone(segmenter.next_deadline_ms())
        self.assertEqual(segmenter.feed(WordEvent("again", 10300, 10600)), [])
        self.assertEqual(len(segmenter.finish()), 1)
        self.assertEqual(segmenter.trace[0].candidate.gap_ms, 10000)

    def test_replay_emits_on_time(self):
        clock = StepClock()
        emitted = []
        segmenter = Segmenter(Policy(), on_segment=lambda s: emitted.append(
            (s.tokens, round(clock.now, 6))))
        stream = timed((0, 300), (10300, 10600))
        for event in replay(stream, 1.0, clock=clock, sleep=clock.sleep, timer=segmenter):
            segmenter.feed(event)
        segmenter.finish()
        self.assertEqual(emitted, [(["how"], 0.8), (["is"], 10.3)])

    def test_lookahead_waits_for_the_deadline(self):
        policy = Policy(mode=Mode.V3, lm_threshold=0.0)
        segmenter = Segmenter(policy, model=self.models[Mode.V3])
        segmenter.feed(WordEvent("how", 0, 300))
        self.assertEqual(segmenter.next_deadline_ms(), 2301)
        self.assertEqual(segmenter.advance(2300), [])
        closed = segmenter.advance(2301)
        self.assertEqual([(s.decision, s.latency_ms) for s in closed],
                         [(Decision.LM_CONFIRMED, 2000)])
        self.assertEqual(segmenter.trace[0].lm_source, "flush")

    def test_veto_then_hard_timeout(self):
        segmenter = Segmenter(Policy(mode=Mode.V2, lm_threshold=1.0), model=self.models[Mode.V2])
        segmenter.feed(WordEvent("how", 0, 300))
        self.assertEqual(segmenter.advance(800), [])
        self.assertEqual(segmenter.next_deadline_ms(), 2300)
        closed = segmenter.advance(2300)
        self.assertEqual([(s.decision, s.latency_ms) for s in closed],
                         [(Decision.HARD_TIMEOUT, 2000)])
        self.assertEqual([(e.verdict, e.candidate.gap_ms) for e in segmenter.trace],
                         [("veto", None), ("emit", None)])
        segmenter.feed(WordEvent("is", 5000, 5300))
        self.assertEqual([e.candidate.gap_ms for e in segmenter.trace], [4700, 4700])

    def test_finish_after_last_segment_closed(self):
        segmenter = Segmenter(Policy())
        segmenter.feed(WordEvent("hello", 0, 300))
        segmenter.advance(800)
        self.assertEqual(segmenter.finish(), [])
        self.assertEqual([s.decision for s in segmenter.segments], [Decision.VAD_ONLY])
        self.assertEqual([e.verdict for e in segmenter.trace], ["emit", "superseded"])

    def test_word_before_stream_time(self):
        segmenter = Segmenter(Policy())
        segmenter.feed(WordEvent("hello", 0, 300))
        segmenter.advance(900)
        with self.assertRaises(FusionError) as ctx:
            segmenter.feed(WordEvent("late", 850, 950))
        self.assertEqual(ctx.exception.code, "LATE_EVENT")


class SegmentationLawTests(SimpleTestCase):
    thresholds = (0.0, 0.3, 0.5, 0.7, 1.0)

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.models = {Mode.V2: untrained_model(lookahead=False),
                      Mode.V3: untrained_model(lookahead=True)}
        rng = random.Random(2024)
        cls.streams = [random_stream(rng) for _ in range(1000)]

    def run_policy(self, stream, mode, tau=0.5):
        policy = Policy(mode=mode, lm_threshold=tau)
        return segment(stream, policy, self.models.get(mode))

    def test_partition_and_latency(self):
        for n, stream in enumerate(self.streams):
            for mode in Mode:
                segments, _ = self.run_policy(stream, mode)
                with self.subTest(stream=n, mode=mode):
                    self.assertEqual(tokens_of(segments), [e.word for e in stream])
                    self.assertTrue(all(0 <= s.latency_ms <= 2000 for s in segments))
                    if mode == Mode.V1:
                        self.assertTrue(all(s.latency_ms == 500 for s in segments
                                            if s.decision == Decision.VAD_ONLY))

    def test_language_model_only_vetoes(self):
        for n, stream in enumerate(self.streams):
            reference = boundaries(self.run_policy(stream, Mode.V1)[0])
            for mode in (Mode.V2, Mode.V3):
                previous = None
                for tau in self.thresholds:
                    found = boundaries(self.run_policy(stream, mode, tau)[0])
                    with self.subTest(stream=n, mode=mode, tau=tau):
                        self.assertLessEqual(found, reference)
                        if tau == 0.0:
                            self.assertEqual(found, reference)
                        if previous is not None:
                            self.assertLessEqual(found, previous)
                    previous = found

    def test_total_veto_leaves_hard_timeouts(self):
        for stream in self.streams:
            for mode in (Mode.V2, Mode.V3):
                segments, _ = self.run_policy(stream, mode, tau=1.0)
                self.assertTrue(all(s.decision in (Decision.HARD_TIMEOUT, Decision.STREAM_END)
                                    for s in segments))

    def test_deterministic(self):
        for stream in self.streams[:50]:
            for mode in Mode:
                first_segments, first_trace = self.run_policy(stream, mode)
                second_segments, second_trace = self.run_policy(stream, mode)
                self.assertEqual([s.to_dict() for s in first_segments],
                                 [s.to_dict() for s in second_segments])
                self.assertEqual([t.to_dict() for t in first_trace],
                                 [t.to_dict() for t in second_trace])

    def test_live_replay_matches_batch(self):
        for n, stream in enumerate(self.streams[:300]):
            for mode in Mode:
                for tau in (0.0, 0.5, 1.0):
                    policy = Policy(mode=mode, lm_threshold=tau)
                    model = self.models.get(mode)
                    batch_segments, batch_trace = segment(stream, policy, model)
                    live_segments, live_trace = live_segment(stream, policy, model)
                    with self.subTest(stream=n, mode=mode, tau=tau):
                        self.assertEqual([s.to_dict() for s in live_segments],
                                         [s.to_dict() for s in batch_segments])
                        self.assertEqual([t.to_dict() for t in live_trace],
                                         [t.to_dict() for t in batch_trace])

    def test_one_trace_entry_per_candidate(self):
        for stream in self.streams[:100]:
            for mode in Mode:
                _, trace = self.run_policy(stream, mode)
                self.assertEqual(len(trace), len(detect_candidates(stream, 500, 2000)))


class ComparePoliciesTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.causal = untrained_model(lookahead=False)
        cls.lookahead = untrained_model(lookahead=True)

    def test_single_policy_matches_segment(self):
        stream = demo_stream()
        results = compare_policies(stream, [Policy()])
        self.assertEqual([s.to_dict() for s in results[Mode.V1]],
                         [s.to_dict() for s in segment(stream, Policy())[0]])

    def test_no_gaps_gives_one_segment_everywhere(self):
        stream = timed((0, 200), (250, 400), (450, 700))
        policies = [Policy(mode=mode) for mode in Mode]
        results = compare_policies(stream, policies, self.causal, self.lookahead)
        for mode, segments in results.items():
            self.assertEqual([s.decision for s in segments], [Decision.STREAM_END], mode)

    def test_duplicate_modes(self):
        with self.assertRaises(FusionError) as ctx:
            compare_policies(demo_stream(), [Policy(), Policy(silence_threshold_ms=400)])
        self.assertEqual(ctx.exception.code, "DUPLICATE_POLICY")

    def test_synthetic_suite_subset(self):
        sentences = [WORDS[:4], WORDS[4:7], WORDS[7:], WORDS[2:6]]
        suite = build_suite(sentences, 20, sentences_per_stream=3, seed=5)
        policies = [Policy(), Policy(mode=Mode.V2)]
        for stream in suite:
            results = compare_policies(stream.events, policies, model_v2=self.causal)
            self.assertLessEqual(boundaries(results[Mode.V2]), boundaries(results[Mode.V1]))


class DemoStreamTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.causal, cls.lookahead = demo_models()

    def test_language_model_vetoes_the_thinking_pause(self):
        for mode, model in ((Mode.V2, self.causal), (Mode.V3, self.lookahead)):
            segments, trace = segment(demo_stream(), Policy(mode=mode), model)
            with self.subTest(mode=mode):
                self.assertEqual([" ".join(s.tokens) for s in segments],
                                 ["how is the weather in seattle", "i'm new in town"])
                self.assertEqual(segments[0].decision, Decision.LM_CONFIRMED)
                self.assertEqual(trace[0].verdict, "veto")
                self.assertLess(trace[0].p_eos, 0.5)

    def test_zero_threshold_matches_acoustic(self):
        v1, _ = segment(demo_stream(), Policy())
        v2, _ = segment(demo_stream(), Policy(mode=Mode.V2, lm_threshold=0.0), self.causal)
        self.assertEqual(boundaries(v2), boundaries(v1))


class BenchmarkTests(SimpleTestCase):
    sentences = [["how", "is", "the", "weather"], ["i'm", "new", "in", "town"], ["wake"],
                 ["in", "seattle"]]

    def test_reference_boundaries_are_sentence_ends(self):
        stream = synthesize_stream("s", self.sentences, np.random.default_rng(0))
        self.assertEqual(stream.boundaries, (3, 7, 8))
        self.assertEqual(stream.tokens, [w for s in self.sentences for w in s])

    def test_pauses_only_where_configured(self):
        config = BenchmarkConfig(mid_pause_prob=0.0, end_pause_prob=1.0)
        suite = build_suite(self.sentences, 30, sentences_per_stream=3, seed=1, config=config)
        for stream in suite:
            segments, _ = segment(stream.events, Policy())
            self.assertEqual(boundaries(segments), set(stream.boundaries))

    def test_seeded(self):
        first = build_suite(self.sentences, 5, seed=3)
        second = build_suite(self.sentences, 5, seed=3)
        self.assertEqual([s.to_dict() for s in first], [s.to_dict() for s in second])

    def test_suite_file(self):
        suite = build_suite(self.sentences, 4, seed=3)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "suite.jsonl"
            write_suite(path, suite)
            self.assertEqual(read_suite(path), suite)

    def test_invalid_config(self):
        with self.assertRaises(FusionError) as ctx:
            build_suite(self.sentences, 2, config=BenchmarkConfig(mid_pause_prob=2.0))
        self.assertEqual(ctx.exception.code, "INVALID_BENCHMARK")

    def test_not_enough_sentences(self):
        with self.assertRaises(FusionError):
            build_suite(self.sentences[:2], 2, sentences_per_stream=3)


class SegmentCommandTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls.tmp.name)
        causal, lookahead = demo_models()
        cls.causal_path = cls.root / "v2.model"
        cls.lookahead_path = cls.root / "v3.model"
        save(causal, cls.causal_path)
        save(lookahead, cls.lookahead_path)
        cls.stream_path = cls.root / "stream.jsonl"
        write_events(cls.stream_path, demo_stream())

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def run_command(self, name, *args, **options):
        stdout = StringIO()
        call_command(name, *args, stdout=stdout, stderr=StringIO(), **options)
        return stdout.getvalue()

    def segment_boundaries(self, **options):
        stdout = self.run_command("segment", str(self.stream_path), **options)
        records = [json.loads(line) for line in stdout.splitlines() if line.strip()]
        return [r["boundary_index"] for r in records], records

    def test_acoustic_policy(self):
        found, records = self.segment_boundaries(mode="v1")
        self.assertEqual(found, [4, 5, 9])
        self.assertEqual([r["decision"] for r in records],
                         ["VAD_ONLY", "VAD_ONLY", "STREAM_END"])

    def test_zero_threshold_matches_acoustic(self):
        v1, _ = self.segment_boundaries(mode="v1")
        v2, _ = self.segment_boundaries(mode="v2", model_path=str(self.causal_path),
                                        lm_threshold=0.0)
        self.assertEqual(v1, v2)

    def test_lookahead_policy(self):
        found, _ = self.segment_boundaries(mode="v3", model_path=str(self.lookahead_path))
        self.assertEqual(found, [5, 9])

    def test_realtime_replay(self):
        found, _ = self.segment_boundaries(mode="v1", realtime=float("inf"))
        self.assertEqual(found, [4, 5, 9])

    def test_outputs_and_summary(self):
        out = self.root / "segments.jsonl"
        trace = self.root / "trace.txt"
        metrics = self.root / "metrics.prom"
        stdout = self.run_command("segment", str(self.stream_path), mode="v2",
                                  model_path=str(self.causal_path), out=str(out),
                                  trace=str(trace), metrics_file=str(metrics),
                                  report_format="json")
        summary = json.loads(stdout)
        self.assertEqual(summary["segments"], 2)
        self.assertEqual(summary["vetoes"], 1)
        self.assertEqual(len(read_segments(out)), 2)
        self.assertTrue((self.root / "trace.txt.json").exists())
        self.assertIn("lmeos_segment_decisions_total", metrics.read_text(encoding="utf-8"))

    def test_config_file_with_flag_override(self):
        config = self.root / "run.env"
        config.write_text(f"MODE=v2\nMODEL_PATH={self.causal_path}\nLM_THRESHOLD=0.0\n",
                          encoding="utf-8")
        found, _ = self.segment_boundaries(config=str(config))
        self.assertEqual(found, [4, 5, 9])
        found, _ = self.segment_boundaries(config=str(config), lm_threshold=0.5)
        self.assertEqual(found, [5, 9])

    def test_missing_model(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command("segment", str(self.stream_path), mode="v2")
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("--model", str(ctx.exception))

    def test_model_mode_mismatch(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command("segment", str(self.stream_path), mode="v3",
                             model_path=str(self.causal_path))
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("MODEL_MODE_MISMATCH", str(ctx.exception))

    def test_missing_input(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command("segment", str(self.root / "nope.jsonl"), mode="v1")
        self.assertEqual(ctx.exception.returncode, 1)

    def test_compare_on_a_built_benchmark(self):
        corpus = self.root / "corpus.txt"
        corpus.write_text(DEMO_DOCUMENTS[0].text + "\n\n" + DEMO_DOCUMENTS[1].text,
                          encoding="utf-8")
        suite = self.root / "suite.jsonl"
        built = json.loads(self.run_command("build_benchmark", str(corpus), str(suite),
                                            streams=5, seed=2, report_format="json"))
        self.assertEqual(built["streams"], 5)
        self.assertEqual(built["boundaries"], 10)
        report = json.loads(self.run_command("compare", str(suite),
                                             model_v2=str(self.causal_path),
                                             model_v3=str(self.lookahead_path),
                                             report_format="json"))
        self.assertEqual(set(report["results"]), {"v1", "v2", "v3"})
        self.assertNotIn("gain", report["results"]["v1"])
        self.assertIn("gain", report["results"]["v3"])
        table = self.run_command("compare", str(suite), model_v2=str(self.causal_path))
        self.assertIn("F0.5-gain", table)


# Closed grammar for the end-to-end check. Sentences end in a place or a time
# word; a place is only sometimes final, so a causal tagger cannot confirm a
# pause after it while a look-ahead tagger can.
SUBJECTS = ["I", "We", "They"]
PLACES = ["Seattle", "Boston", "Paris", "Denver", "town"]
TIMES = ["today", "tomorrow", "tonight", "again"]
TEMPLATES = [
    "{subject} want to go to {place}",
    "{subject} will fly to {place}",
    "{subject} met my friends in {place}",
    "How is the weather in {place}",
]


def grammar_sentence(rng):
    template = TEMPLATES[rng.integers(len(TEMPLATES))]
    text = template.format(subject=SUBJECTS[rng.integers(len(SUBJECTS))],
                           place=PLACES[rng.integers(len(PLACES))])
    if rng.random() >= 0.3:
        text += " " + TIMES[rng.integers(len(TIMES))]
    return text + ("?" if text.startswith("How") else ".")


def grammar_documents(rng, count, per_document=5):
    return [
        RawDocument(doc_id=f"d{n:03d}",
                    text=" ".join(grammar_sentence(rng) for _ in range(per_document)))
        for n in range(count)
    ]


@tag("slow")
class EndToEndBenchmarkTests(SimpleTestCase):
    def test_lookahead_beats_causal_beats_acoustic(self):
        rng = np.random.default_rng(42)
        training = grammar_documents(rng, 60)
        heldout_docs = grammar_documents(rng, 8)
        evaluation = grammar_documents(rng, 40)
        hyperparams = Hyperparams(embed_dim=16, hidden_dim=32, vocab_size=200,
                                  learning_rate=0.5, max_epochs=30, patience=5)

        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            paths = {}
            for lookahead in (False, True):
                examples, _ = build_examples(training, lookahead=lookahead)
                heldout, _ = build_examples(heldout_docs, lookahead=lookahead)
                vocab = build_vocab(examples, max_size=200)
                model, _ = train(examples, vocab, hyperparams, seed=3, lookahead=lookahead,
                                 heldout=heldout)
                paths[lookahead] = root / f"lookahead-{lookahead}.model"
                save(model, paths[lookahead])

            suite_path = root / "suite.jsonl"
            sentences = [list(s.tokens) for doc in evaluation
                         for s in sentences_from_document(doc)]
            write_suite(suite_path, build_suite(sentences, 200, sentences_per_stream=3,
                                                seed=9))
            stdout = StringIO()
            call_command("compare", str(suite_path), model_v2=str(paths[False]),
                         model_v3=str(paths[True]), report_format="json", stdout=stdout)
        results = json.loads(stdout.getvalue())["results"]

        f = {mode: results[mode]["f05"] for mode in ("v1", "v2", "v3")}
        self.assertGreaterEqual(f["v2"], f["v1"] + 0.02, f)
        self.assertGreaterEqual(f["v3"], f["v2"], f)
        self.assertGreater(results["v3"]["gain"], 0)
