import itertools
import json
import random
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from lmeos.errors import MetricsError

from .alignment import DELETION, INSERTION, MATCH, SUBSTITUTION, align_tokens, project_boundaries
from .boundaries import BoundarySet, boundaries_from_segments
from .references import read_streams
from .reports import read_baseline, render_table, report_row
from .scoring import SegmentationReport, f_beta, mean_gain, relative_gain, score

# (test set, model) -> (P, R, F0.5, gain over v1 in percent) from a reference run.
REFERENCE_RESULTS = {
    ("dictation", "v1"): (0.60, 0.81, 0.63, None),
    ("dictation", "v2"): (0.70, 0.78, 0.71, 12.7),
    ("dictation", "v3"): (0.71, 0.81, 0.73, 15.9),
    ("npr", "v1"): (0.76, 0.81, 0.77, None),
    ("npr", "v2"): (0.79, 0.83, 0.80, 3.9),
    ("npr", "v3"): (0.82, 0.82, 0.82, 6.5),
    ("parliament", "v1"): (0.59, 0.74, 0.61, None),
    ("parliament", "v2"): (0.63, 0.74, 0.65, 6.6),
    ("parliament", "v3"): (0.64, 0.77, 0.66, 8.2),
    ("earnings", "v1"): (0.69, 0.77, 0.70, None),
    ("earnings", "v2"): (0.73, 0.78, 0.74, 5.7),
    ("earnings", "v3"): (0.75, 0.79, 0.76, 8.5),
}

RANK = {MATCH: 0, SUBSTITUTION: 1, DELETION: 2, INSERTION: 3}


def alignments_within(hyp, ref, budget):
    """Every alignment of cost <= budget, as (cost, ops listed from the end)."""
    found = []
    ops = []

    def walk(i, j, cost):
        if cost > budget:
            return
        if i == 0 and j == 0:
            found.append((cost, tuple(ops)))
            return
        if i > 0 and j > 0:
            same = hyp[i - 1] == ref[j - 1]
            ops.append((i - 1, j - 1, MATCH if same else SUBSTITUTION))
            walk(i - 1, j - 1, cost + (0 if same else 1))
            ops.pop()
        if j > 0:
            ops.append((None, j - 1, DELETION))
            walk(i, j - 1, cost + 1)
            ops.pop()
        if i > 0:
            ops.append((i - 1, None, INSERTION))
            walk(i - 1, j, cost + 1)
            ops.pop()

    walk(len(hyp), len(ref), 0)
    return found


def oracle_alignment(hyp, ref, budget=None):
    budget = len(hyp) + len(ref) if budget is None else budget
    candidates = alignments_within(hyp, ref, budget)
    best = min(cost for cost, _ in candidates)
    optimal = [ops for cost, ops in candidates if cost == best]
    preferred = min(optimal, key=lambda ops: [RANK[op] for _, _, op in ops])
    return best, tuple(reversed(preferred))


class BoundarySetTests(SimpleTestCase):
    def test_two_segments(self):
        found = boundaries_from_segments([["a", "b"], ["c", "d"]], ["a", "b", "c", "d"])
        self.assertEqual(found.indices, {1})
        self.assertEqual(found.total_tokens, 4)

    def test_single_segment_has_no_internal_boundaries(self):
        self.assertEqual(len(boundaries_from_segments([["a", "b", "c"]], ["a", "b", "c"])), 0)

    def test_three_segments_give_two_boundaries(self):
        tokens = list("abcdef")
        found = boundaries_from_segments([tokens[:1], tokens[1:4], tokens[4:]], tokens)
        self.assertEqual(len(found), 2)
        self.assertTrue(all(i < 5 for i in found.indices))

    def test_stream_end_is_dropped(self):
        self.assertEqual(BoundarySet.create([1, 3], 4).indices, {1})

    def test_out_of_range(self):
        with self.assertRaises(MetricsError) as ctx:
            BoundarySet.create([4], 4)
        self.assertEqual(ctx.exception.code, "BOUNDARY_OUT_OF_RANGE")

    def test_token_mismatch(self):
        with self.assertRaises(MetricsError) as ctx:
            boundaries_from_segments([["a", "x"], ["c"]], ["a", "b", "c"])
        self.assertEqual(ctx.exception.code, "TOKEN_MISMATCH")
        self.assertIn("token 1", str(ctx.exception))

    def test_missing_tokens_are_a_mismatch(self):
        with self.assertRaises(MetricsError) as ctx:
            boundaries_from_segments([["a", "b"]], ["a", "b", "c"])
        self.assertEqual(ctx.exception.code, "TOKEN_MISMATCH")


class ScoringTests(SimpleTestCase):
    def test_reference_f_values_recompute(self):
        for key, (p, r, f, _) in REFERENCE_RESULTS.items():
            with self.subTest(key=key):
                self.assertAlmostEqual(f_beta(p, r), f, delta=0.005)

    def test_reference_gains_recompute(self):
        for (test_set, model), (_, _, f, gain) in REFERENCE_RESULTS.items():
            if gain is None:
                continue
            baseline = REFERENCE_RESULTS[(test_set, "v1")][2]
            with self.subTest(test_set=test_set, model=model):
                self.assertAlmostEqual(relative_gain(f, baseline), gain, delta=0.1)

    def test_headline_mean_gain(self):
        gains = [gain for (_, model), (*_, gain) in REFERENCE_RESULTS.items() if model == "v3"]
        self.assertAlmostEqual(mean_gain(gains), 9.8, delta=0.05)

    def test_dictation_v3_gain(self):
        self.assertEqual(round(relative_gain(0.73, 0.63), 1), 15.9)

    def test_equal_f_has_no_gain(self):
        self.assertEqual(relative_gain(0.5, 0.5), 0.0)

    def test_zero_baseline(self):
        with self.assertRaises(MetricsError) as ctx:
            relative_gain(0.5, 0.0)
        self.assertEqual(ctx.exception.code, "ZERO_BASELINE")

    def test_perfect_match(self):
        report = score(BoundarySet.create([1, 3], 6), BoundarySet.create([1, 3], 6))
        self.assertEqual((report.precision, report.recall, report.f_beta), (1.0, 1.0, 1.0))

    def test_counts(self):
        report = score(BoundarySet.create([1, 4, 5], 8), BoundarySet.create([1, 4, 6], 8))
        self.assertEqual((report.true_positives, report.false_positives,
                          report.false_negatives), (2, 1, 1))
        self.assertEqual(report.to_dict(), {"precision": 0.67, "recall": 0.67, "f05": 0.67,
                                            "tp": 2, "fp": 1, "fn": 1})

    def test_empty_sets_default_to_one(self):
        report = score(BoundarySet.create([], 5), BoundarySet.create([], 5))
        self.assertEqual((report.precision, report.recall), (1.0, 1.0))

    def test_no_overlap_scores_zero(self):
        report = score(BoundarySet.create([0], 5), BoundarySet.create([2], 5))
        self.assertEqual(report.f_beta, 0.0)

    def test_length_mismatch(self):
        with self.assertRaises(MetricsError) as ctx:
            score(BoundarySet.create([1], 4), BoundarySet.create([1], 5))
        self.assertEqual(ctx.exception.code, "LENGTH_MISMATCH")

    def test_f_beta_laws(self):
        grid = [i / 10 for i in range(11)]
        for p, r in itertools.product(grid, grid):
            with self.subTest(p=p, r=r):
                if p == r:
                    self.assertAlmostEqual(f_beta(p, p), p)
                if p > r > 0:
                    self.assertGreater(f_beta(p, r), f_beta(r, p))
                if p > 0 and r > 0:
                    self.assertGreaterEqual(f_beta(p, r), min(p, r) - 1e-12)
                    self.assertLessEqual(f_beta(p, r), max(p, r) + 1e-12)

    def test_swapping_hypothesis_and_reference_swaps_p_and_r(self):
        rng = random.Random(3)
        for _ in range(200):
            total = rng.randint(2, 12)
            hyp = BoundarySet.create(rng.sample(range(total), rng.randint(0, total)), total)
            ref = BoundarySet.create(rng.sample(range(total), rng.randint(0, total)), total)
            forward, backward = score(hyp, ref), score(ref, hyp)
            self.assertEqual(forward.precision, backward.recall)
            self.assertEqual(forward.recall, backward.precision)

    def test_pooling_sums_counts(self):
        pooled = SegmentationReport.pooled([SegmentationReport(2, 1, 0),
                                            SegmentationReport(1, 0, 3)])
        self.assertEqual((pooled.true_positives, pooled.false_positives,
                          pooled.false_negatives), (3, 1, 3))


class AlignmentTests(SimpleTestCase):
    def test_identical(self):
        alignment = align_tokens(list("abcd"), list("abcd"))
        self.assertEqual(alignment.distance, 0)
        self.assertEqual(alignment.hyp_to_ref(), {0: 0, 1: 1, 2: 2, 3: 3})

    def test_single_substitution(self):
        alignment = align_tokens(["a", "x", "c"], ["a", "b", "c"])
        self.assertEqual(alignment.distance, 1)
        self.assertEqual(alignment.hyp_to_ref(), {0: 0, 1: 1, 2: 2})
        self.assertEqual(alignment.count(SUBSTITUTION), 1)

    def test_two_errors_match_exhaustive_search(self):
        ref = "the weather in seattle is nice this morning".split()
        hyp = "the whether in seattle is nice morning".split()
        alignment = align_tokens(hyp, ref)
        distance, pairs = oracle_alignment(hyp, ref, budget=2)
        self.assertEqual(alignment.distance, 2)
        self.assertEqual(distance, 2)
        self.assertEqual(alignment.pairs, pairs)

    def test_small_random_pairs_match_exhaustive_search(self):
        rng = random.Random(11)
        for _ in range(60):
            hyp = [rng.choice("ab") for _ in range(rng.randint(1, 5))]
            ref = [rng.choice("ab") for _ in range(rng.randint(1, 5))]
            with self.subTest(hyp=hyp, ref=ref):
                alignment = align_tokens(hyp, ref)
                distance, pairs = oracle_alignment(hyp, ref)
                self.assertEqual(alignment.distance, distance)
                self.assertEqual(alignment.pairs, pairs)

    def test_empty_input(self):
        with self.assertRaises(MetricsError):
            align_tokens([], ["a"])

    def test_projection_through_insertion(self):
        hyp_tokens, ref_tokens = ["a", "b", "um", "c", "d"], ["a", "b", "c", "d"]
        alignment = align_tokens(hyp_tokens, ref_tokens)
        projected = project_boundaries(BoundarySet.create([2], 5), alignment, 4)
        self.assertEqual(projected.indices, {1})

    def test_projection_through_deletion(self):
        alignment = align_tokens(["a", "c", "d"], ["a", "b", "c", "d"])
        projected = project_boundaries(BoundarySet.create([0, 1], 3), alignment, 4)
        self.assertEqual(projected.indices, {0, 2})


class ReportTests(SimpleTestCase):
    def test_row_gain_uses_printed_values(self):
        row = report_row("v3", SegmentationReport(71, 29, 17), baseline_f=0.6328)
        self.assertEqual(row["baseline_f05"], 0.63)
        self.assertEqual(row["gain"], round(relative_gain(row["f05"], 0.63), 1))

    def test_table_layout(self):
        rows = [report_row("v1", SegmentationReport(3, 1, 1)),
                report_row("v2", SegmentationReport(3, 0, 1), baseline_f=0.75)]
        lines = render_table(rows, label="policy").splitlines()
        self.assertEqual(lines[0].split(), ["policy", "P", "R", "F0.5", "F0.5-gain"])
        self.assertEqual(lines[2].split(), ["v1", "0.75", "0.75", "0.75"])
        self.assertEqual(lines[3].split()[0], "v2")
        self.assertTrue(lines[3].endswith("%"))

    def test_baseline_from_number_or_report(self):
        self.assertEqual(read_baseline("0.63"), 0.63)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "report.json"
            path.write_text(json.dumps({"f05": 0.7}), encoding="utf-8")
            self.assertEqual(read_baseline(str(path)), 0.7)


class EvaluateCommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, name, text):
        path = self.root / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    def run_command(self, *args, **options):
        stdout = StringIO()
        call_command("evaluate", *args, stdout=stdout, stderr=StringIO(), **options)
        return stdout.getvalue()

    def test_perfect_hypothesis(self):
        ref = self.write("ref.txt", "a b\nc d e\nf g h\n")
        report = json.loads(self.run_command(ref, reference=[ref], report_format="json"))
        self.assertEqual((report["precision"], report["recall"], report["f05"]), (1.0, 1.0, 1.0))

    def test_hand_counted_case(self):
        ref = self.write("ref.txt", "a b\nc d e\nf g\nh\n")
        hyp = self.write("hyp.txt", "a b\nc d e\nf\ng h\n")
        report = json.loads(self.run_command(hyp, reference=[ref], report_format="json"))
        self.assertEqual(report["tp"], 2)
        self.assertEqual(report["fp"], 1)
        self.assertEqual(report["fn"], 1)
        self.assertEqual((report["precision"], report["recall"], report["f05"]),
                         (0.67, 0.67, 0.67))

    def test_segments_jsonl_against_stream_reference(self):
        segments = [{"tokens": ["a", "b"], "decision": "LM_CONFIRMED"},
                    {"tokens": ["c", "d"], "decision": "STREAM_END"}]
        hyp = self.write("hyp.jsonl", "".join(json.dumps(s) + "\n" for s in segments))
        ref = self.write("ref.jsonl", json.dumps({"tokens": list("abcd"), "boundaries": [1]}))
        report = json.loads(self.run_command(hyp, reference=[ref], report_format="json"))
        self.assertEqual(report["f05"], 1.0)

    def test_baseline_gain(self):
        ref = self.write("ref.txt", "a b\nc d e\nf g\nh\n")
        hyp = self.write("hyp.txt", "a b\nc d e\nf\ng h\n")
        report = json.loads(self.run_command(hyp, reference=[ref], baseline="0.60",
                                             report_format="json"))
        self.assertEqual(report["gain"], 11.7)

    def test_text_table(self):
        ref = self.write("ref.txt", "a b\nc d\n")
        stdout = self.run_command(ref, reference=[ref], name="v1")
        self.assertIn("F0.5", stdout)
        self.assertIn("v1", stdout)

    def test_token_mismatch_names_the_files(self):
        ref = self.write("ref.txt", "a b\nc d\n")
        hyp = self.write("hyp.txt", "a b\num c d\n")
        with self.assertRaises(CommandError) as ctx:
            self.run_command(hyp, reference=[ref])
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn("TOKEN_MISMATCH", str(ctx.exception))
        self.assertIn("hyp.txt", str(ctx.exception))

    def test_align_projects_through_asr_errors(self):
        ref = self.write("ref.txt", "a b\nc d\n")
        hyp = self.write("hyp.txt", "a b\num c d\n")
        report = json.loads(self.run_command(hyp, reference=[ref], align=True,
                                             report_format="json"))
        self.assertEqual(report["f05"], 1.0)

    def test_stream_count_mismatch(self):
        ref = self.write("ref.jsonl", "".join(
            json.dumps({"tokens": ["a", "b"], "boundaries": [0]}) + "\n" for _ in range(2)))
        hyp = self.write("hyp.jsonl", json.dumps({"tokens": ["a", "b"], "boundaries": [0]}))
        with self.assertRaises(CommandError) as ctx:
            self.run_command(hyp, reference=[ref])
        self.assertIn("LENGTH_MISMATCH", str(ctx.exception))

    def test_several_file_pairs_are_pooled(self):
        ref = self.write("ref.txt", "a b\nc d\n")
        hyp = self.write("hyp.txt", "a\nb c d\n")
        report = json.loads(self.run_command(ref, hyp, reference=[ref, ref],
                                             report_format="json"))
        self.assertEqual((report["tp"], report["fp"], report["fn"]), (1, 1, 1))
        self.assertEqual(report["streams"], 2)


class ReadStreamsTests(SimpleTestCase):
    def test_suite_records_are_streams(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "suite.jsonl"
            record = {"stream_id": "s0", "boundaries": [0],
                      "events": [{"word": "hi", "start_ms": 0, "end_ms": 100},
                                 {"word": "there", "start_ms": 700, "end_ms": 900}]}
            path.write_text(json.dumps(record) + "\n", encoding="utf-8")
            [stream] = read_streams(path)
        self.assertEqual(stream.tokens, ("hi", "there"))
        self.assertEqual(stream.boundaries.indices, {0})

    def test_bad_record_names_the_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "ref.jsonl"
            path.write_text('{"tokens": ["a"], "boundaries": [0]}\nnot json\n', encoding="utf-8")
            with self.assertRaises(MetricsError) as ctx:
                read_streams(path)
        self.assertIn("ref.jsonl:2", str(ctx.exception))
