import json
import math
import random
import tempfile
import time
from pathlib import Path

from django.test import SimpleTestCase

from lmeos.errors import EndpointError

from .detector import CandidateKind, detect_candidates
from .events import WordEvent, read_events, write_events
from .replay import replay


def timed(*spans):
    return [WordEvent(f"w{i}", start, end) for i, (start, end) in enumerate(spans)]


def random_stream(rng, max_words=12):
    events = []
    clock = rng.randint(0, 500)
    for i in range(rng.randint(1, max_words)):
        duration = rng.randint(50, 400)
        events.append(WordEvent(f"w{i}", clock, clock + duration))
        clock += duration + rng.choice([0, rng.randint(0, 300), rng.randint(300, 2500)])
    return events


def brute_force_timeouts(stream, threshold):
    found = set()
    for i in range(len(stream) - 1):
        if stream[i + 1].start_ms - stream[i].end_ms >= threshold:
            found.add((i, stream[i].end_ms + threshold))
    return found


def timeouts(candidates):
    return {(c.after_token_index, c.fired_at_ms)
            for c in candidates if c.kind == CandidateKind.TIMEOUT}


class DetectCandidatesTests(SimpleTestCase):
    def test_gap_above_threshold_fires(self):
        candidates = detect_candidates(timed((0, 300), (900, 1200)), 500, 2000)
        first = candidates[0]
        self.assertEqual((first.after_token_index, first.kind, first.fired_at_ms),
                         (0, CandidateKind.TIMEOUT, 800))
        self.assertEqual(first.gap_ms, 600)
        self.assertEqual(candidates[-1].kind, CandidateKind.STREAM_END)
        self.assertEqual(len(candidates), 2)

    def test_gap_below_threshold_is_silent(self):
        candidates = detect_candidates(timed((0, 300), (600, 900)), 500, 2000)
        self.assertEqual([(c.after_token_index, c.kind) for c in candidates],
                         [(1, CandidateKind.STREAM_END)])

    def test_gap_equal_to_threshold_fires(self):
        candidates = detect_candidates(timed((0, 300), (800, 900)), 500, 2000)
        self.assertEqual(candidates[0].kind, CandidateKind.TIMEOUT)

    def test_long_gap_adds_hard_timeout(self):
        candidates = detect_candidates(timed((0, 300), (2500, 2700)), 500, 2000)
        self.assertEqual([(c.kind, c.fired_at_ms, c.silence_ms) for c in candidates], [
            (CandidateKind.TIMEOUT, 800, 500),
            (CandidateKind.HARD_TIMEOUT, 2300, 2000),
            (CandidateKind.STREAM_END, 2700, 0),
        ])

    def test_scripted_gaps_match_brute_force(self):
        gaps = [100, 600, 200, 700, 50, 499, 500, 1500, 2100]
        spans, clock = [], 0
        for gap in gaps + [0]:
            spans.append((clock, clock + 250))
            clock += 250 + gap
        stream = timed(*spans)
        candidates = detect_candidates(stream, 500, 2000)
        self.assertEqual(timeouts(candidates), brute_force_timeouts(stream, 500))
        self.assertEqual(len(timeouts(candidates)), 5)

    def test_random_streams_match_brute_force(self):
        rng = random.Random(20)
        for _ in range(1000):
            stream = random_stream(rng)
            threshold = rng.choice([200, 500, 800])
            hard = threshold + rng.choice([0, 700, 1500])
            candidates = detect_candidates(stream, threshold, hard)
            self.assertEqual(timeouts(candidates), brute_force_timeouts(stream, threshold))
            fired = [c.fired_at_ms for c in candidates]
            self.assertEqual(fired, sorted(fired))
            self.assertEqual(sum(c.kind == CandidateKind.STREAM_END for c in candidates), 1)
            for c in candidates:
                self.assertGreaterEqual(c.silence_ms, 0)
                self.assertGreaterEqual(c.fired_at_ms, stream[c.after_token_index].end_ms)

    def test_lower_threshold_never_removes_timeouts(self):
        rng = random.Random(21)
        for _ in range(300):
            stream = random_stream(rng)
            low, high = sorted(rng.sample(range(100, 2000, 50), 2))
            low_set = {i for i, _ in timeouts(detect_candidates(stream, low, 2000))}
            high_set = {i for i, _ in timeouts(detect_candidates(stream, high, 2000))}
            self.assertLessEqual(high_set, low_set)

    def test_empty_stream(self):
        self.assertEqual(detect_candidates([], 500, 2000), [])

    def test_invalid_streams(self):
        cases = {
            "UNSORTED_STREAM": timed((500, 600), (100, 200)),
            "OVERLAPPING_EVENTS": timed((0, 500), (400, 700)),
            "INVALID_EVENT": timed((300, 300)),
        }
        for code, stream in cases.items():
            with self.subTest(code=code):
                with self.assertRaises(EndpointError) as ctx:
                    detect_candidates(stream, 500, 2000)
                self.assertEqual(ctx.exception.code, code)

    def test_invalid_thresholds(self):
        for silence, hard in [(0, 2000), (600, 500)]:
            with self.assertRaises(EndpointError) as ctx:
                detect_candidates(timed((0, 1)), silence, hard)
            self.assertEqual(ctx.exception.code, "INVALID_THRESHOLD")


class ReadEventsTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_jsonl(self):
        stream = timed((0, 300), (900, 1200))
        path = self.root / "stream.jsonl"
        write_events(path, stream)
        self.assertEqual(read_events(path), stream)

    def test_csv(self):
        path = self.root / "stream.csv"
        path.write_text("word,start_ms,end_ms\nhello,0,300\nworld,900,1200\n", encoding="utf-8")
        self.assertEqual(read_events(path), [WordEvent("hello", 0, 300),
                                             WordEvent("world", 900, 1200)])

    def test_csv_needs_header(self):
        path = self.root / "stream.csv"
        path.write_text("hello,0,300\n", encoding="utf-8")
        with self.assertRaises(EndpointError) as ctx:
            read_events(path)
        self.assertEqual(ctx.exception.code, "BAD_EVENT_FILE")

    def test_fractional_milliseconds_are_rejected(self):
        cases = {
            "stream.jsonl": '{"word": "a", "start_ms": 1.7, "end_ms": 300}\n',
            "flag.jsonl": '{"word": "a", "start_ms": true, "end_ms": 300}\n',
            "stream.csv": "word,start_ms,end_ms\na,1.7,300\n",
        }
        for name, text in cases.items():
            path = self.root / name
            path.write_text(text, encoding="utf-8")
            with self.subTest(name=name), self.assertRaises(EndpointError) as ctx:
                read_events(path)
            self.assertEqual(ctx.exception.code, "BAD_EVENT_FILE")

    def test_whole_float_milliseconds_are_accepted(self):
        path = self.root / "stream.jsonl"
        path.write_text('{"word": "a", "start_ms": 0.0, "end_ms": 300.0}\n', encoding="utf-8")
        self.assertEqual(read_events(path), [WordEvent("a", 0, 300)])

    def test_bad_line_is_reported(self):
        path = self.root / "stream.jsonl"
        path.write_text(json.dumps({"word": "a", "start_ms": 0, "end_ms": 5}) + "\n{oops}\n",
                        encoding="utf-8")
        with self.assertRaises(EndpointError) as ctx:
            read_events(path)
        self.assertIn(":2:", str(ctx.exception))

    def test_file_order_is_validated(self):
        path = self.root / "stream.jsonl"
        write_events(path, timed((500, 600), (0, 100)))
        with self.assertRaises(EndpointError) as ctx:
            read_events(path)
        self.assertEqual(ctx.exception.code, "UNSORTED_STREAM")


class FakeClock:
    def __init__(self):
        self.now = 100.0
        self.sleeps = []

    def __call__(self):
        return self.now

    def sleep(self, seconds):
        self.sleeps.append(seconds)
        self.now += seconds


class ReplayTests(SimpleTestCase):
    def test_delays_scale_with_speed(self):
        clock = FakeClock()
        stream = timed((0, 100), (400, 500), (1000, 1100))
        delivered = []
        for event in replay(stream, speed_factor=2.0, clock=clock, sleep=clock.sleep):
            delivered.append((event.word, round(clock.now - 100.0, 6)))
        self.assertEqual(delivered, [("w0", 0.0), ("w1", 0.2), ("w2", 0.5)])

    def test_infinite_speed_never_sleeps(self):
        clock = FakeClock()
        stream = timed((0, 100), (400, 500))
        self.assertEqual(list(replay(stream, math.inf, clock=clock, sleep=clock.sleep)), stream)
        self.assertEqual(clock.sleeps, [])

    def test_empty_stream(self):
        self.assertEqual(list(replay([], 1.0)), [])

    def test_speed_must_be_positive(self):
        with self.assertRaises(EndpointError):
            list(replay(timed((0, 1)), 0))

    def test_real_time_delivery(self):
        stream = timed((0, 50), (60, 100), (120, 150))
        origin = time.monotonic()
        offsets = [(time.monotonic() - origin) * 1000 for _ in replay(stream, 1.0)]
        for offset, event in zip(offsets, stream):
            self.assertAlmostEqual(offset, event.start_ms, delta=20)
