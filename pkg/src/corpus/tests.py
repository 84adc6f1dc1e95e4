import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from lmeos.errors import CorpusError

from .examples import (
    Tag,
    TrainingExample,
    Variant,
    build_examples,
    make_v2_examples,
    make_v3_examples,
)
from .io import read_documents, read_examples, write_examples
from .text import (
    RawDocument,
    Rejection,
    RejectReason,
    Sentence,
    Terminal,
    filter_sentence,
    normalize_spoken,
    split_sentences,
)

TABLE_DOCUMENT = RawDocument(
    doc_id="doc1",
    text="How is the weather in Seattle? I’m new in town. Wake me up at noon tomorrow.",
)
FOLLOW_UP_DOCUMENT = RawDocument(doc_id="doc2", text="Wake me up at noon. How are you?")

TABLE_1_ROWS = [
    ("how is the weather in seattle", "O O O O O eos"),
    ("how is the weather in", "O O O O O"),
    ("i'm new in town", "O O O eos"),
    ("i'm new in", "O O O"),
    ("wake me up at noon tomorrow", "O O O O O eos"),
    ("wake me up at noon", "O O O O O"),
]

TABLE_2_ROWS = [
    ("how is the weather in seattle i'm", "O O O O O eos O"),
    ("i'm new in town wake", "O O O eos O"),
    ("wake me up at noon how", "O O O O eos O"),
]

# (text, expected sentences)
SPLIT_ORACLE = [
    ("I'm new in town. Wake me up at noon.", ["I'm new in town.", "Wake me up at noon."]),
    ("", []),
    ("Dr. Smith left. He ran.", ["Dr. Smith left.", "He ran."]),
    ("Mr. and Mrs. Jones arrived. They sat down.",
     ["Mr. and Mrs. Jones arrived.", "They sat down."]),
    ("J. R. R. Tolkien wrote it. People loved it.",
     ["J. R. R. Tolkien wrote it.", "People loved it."]),
    ("Is it late? Yes it is.", ["Is it late?", "Yes it is."]),
    ("Stop! Go now.", ["Go now."]),
    ("It costs 3.50 today. Pay at 5 p.m. Then leave.",
     ["It costs 3.50 today.", "Pay at 5 p.m. Then leave."]),
    ("We met in 2020. 2021 was better.", ["We met in 2020.", "2021 was better."]),
    ("the lowercase start. it stays together.", ["the lowercase start. it stays together."]),
    ("First line.\n\nsecond paragraph.", ["First line.", "second paragraph."]),
    ("Trailing words without an end", []),
    ("Dr. Who? No idea.", ["Dr. Who?", "No idea."]),
    ("See Fig. 3 for details. It helps.", ["See Fig. 3 for details.", "It helps."]),
    ("It was 5 a.m. when we woke.", ["It was 5 a.m. when we woke."]),
    ("Whitespace   is\n collapsed.  Yes.", ["Whitespace is collapsed.", "Yes."]),
    ("U.S. troops left. They returned.", ["U.S. troops left.", "They returned."]),
    ("Single sentence?", ["Single sentence?"]),
    ("Prof. Lee teaches. St. Mary is near. Fine.",
     ["Prof. Lee teaches.", "St. Mary is near.", "Fine."]),
    ("One. Two. Three.", ["One.", "Two.", "Three."]),
    # one-letter words before a period
    ("So did I. We left early.", ["So did I.", "We left early."]),
    ("You and I. They and we.", ["You and I.", "They and we."]),
    ("Blame me, not I. I'm done.", ["Blame me, not I.", "I'm done."]),
    ("Did I? Yes I did.", ["Did I?", "Yes I did."]),
    ("Was it I? No, it was you.", ["Was it I?", "No, it was you."]),
    ("We chose Plan B. It worked.", ["We chose Plan B.", "It worked."]),
    ("Take vitamin C. It helps.", ["Take vitamin C.", "It helps."]),
    ("She got an A. Her parents smiled.", ["She got an A.", "Her parents smiled."]),
    ("Go to Gate D. The plane waits.", ["Go to Gate D.", "The plane waits."]),
    ("Part C. Then part D. Then stop.", ["Part C.", "Then part D.", "Then stop."]),
    ("John F. Kennedy spoke first. Crowds cheered.",
     ["John F. Kennedy spoke first.", "Crowds cheered."]),
    ("It was H. G. Wells. He wrote books.", ["It was H. G. Wells.", "He wrote books."]),
    ("Ask Dr. J. Smith now. Okay.", ["Ask Dr. J. Smith now.", "Okay."]),
    ("A. Lincoln spoke. People listened.", ["A. Lincoln spoke.", "People listened."]),
    # abbreviations
    ("Mt. Rainier is tall. We climbed it.", ["Mt. Rainier is tall.", "We climbed it."]),
    ("Meet me on Jan. 5 at noon. Thanks.", ["Meet me on Jan. 5 at noon.", "Thanks."]),
    ("Smith vs. Jones ended. Court closed.", ["Smith vs. Jones ended.", "Court closed."]),
    ("Apples, pears, etc. Are all fruit? Yes.",
     ["Apples, pears, etc. Are all fruit?", "Yes."]),
    ("Use e.g. Python. It works.", ["Use e.g. Python.", "It works."]),
    ("Gen. Grant won. Lee lost.", ["Gen. Grant won.", "Lee lost."]),
    ("Inc. is short. Ltd. is too.", ["Inc. is short.", "Ltd. is too."]),
    ("Sgt. Pepper played. Fans sang.", ["Sgt. Pepper played.", "Fans sang."]),
    ("He is a Jr. Now he works.", ["He is a Jr. Now he works."]),
    ("Tea at 4 p.m. Dinner at 8 p.m. Sleep.", ["Tea at 4 p.m. Dinner at 8 p.m. Sleep."]),
    # numbers, terminals and layout
    ("Call me at 9. I will answer.", ["Call me at 9.", "I will answer."]),
    ("Number 7. 8 follows.", ["Number 7.", "8 follows."]),
    ("The price is 4.5 dollars. Good deal.", ["The price is 4.5 dollars.", "Good deal."]),
    ("Why? Because. Fine.", ["Why?", "Because.", "Fine."]),
    ("Is it you? Yes. It is me.", ["Is it you?", "Yes.", "It is me."]),
    ("Hello there. How are you? I am fine.", ["Hello there.", "How are you?", "I am fine."]),
    ("Ends with exclamation! Another one!", []),
    ("Really?! Okay.", ["Okay."]),
    ("Wait!\n\nNo more.", ["No more."]),
    ('"Yes." She nodded. Done.', ["She nodded.", "Done."]),
    ("Only lower case here. and more.", ["Only lower case here. and more."]),
    ("Tabs\tand\tspaces. Work.", ["Tabs and spaces.", "Work."]),
    ("Line one.\nLine two.", ["Line one.", "Line two."]),
]

SPOKEN_NUMBERS = {
    0: "zero",
    1: "one",
    7: "seven",
    10: "ten",
    11: "eleven",
    13: "thirteen",
    19: "nineteen",
    20: "twenty",
    21: "twenty one",
    45: "forty five",
    99: "ninety nine",
    100: "one hundred",
    101: "one hundred and one",
    110: "one hundred and ten",
    115: "one hundred and fifteen",
    250: "two hundred and fifty",
    999: "nine hundred and ninety nine",
    1000: "one thousand",
    1001: "one thousand and one",
    1010: "one thousand and ten",
    1100: "one thousand one hundred",
    1234: "one thousand two hundred and thirty four",
    2000: "two thousand",
    2024: "two thousand and twenty four",
    3005: "three thousand and five",
    5500: "five thousand five hundred",
    7070: "seven thousand and seventy",
    8800: "eight thousand eight hundred",
    9000: "nine thousand",
    9999: "nine thousand nine hundred and ninety nine",
}

FORBIDDEN_IN_TOKENS = set(".,?!;:—\"") | {" "}


def rows(examples, variant=None):
    return [
        (example.input_text, example.output_text)
        for example in examples
        if variant is None or example.variant == variant
    ]


def sentence(*tokens, doc_id="d", index=0):
    return Sentence(tokens=tuple(tokens), terminal=Terminal.PERIOD, doc_id=doc_id,
                    index_in_doc=index)


class SplitSentencesTests(SimpleTestCase):
    def test_hand_annotated_splits(self):
        for text, expected in SPLIT_ORACLE:
            with self.subTest(text=text):
                self.assertEqual(split_sentences(RawDocument("d", text)), expected)

    def test_keep_unterminated_returns_every_piece(self):
        pieces = split_sentences(RawDocument("d", "Stop! Go now. And then"),
                                 keep_unterminated=True)
        self.assertEqual(pieces, ["Stop!", "Go now.", "And then"])


class FilterSentenceTests(SimpleTestCase):
    def test_question_is_accepted(self):
        result = filter_sentence("How is the weather in Seattle?")
        self.assertEqual(result.tokens, ("how", "is", "the", "weather", "in", "seattle"))
        self.assertEqual(result.terminal, Terminal.QUESTION)

    def test_period_is_accepted(self):
        result = filter_sentence("Wake me up at noon tomorrow.")
        self.assertEqual(result.tokens, ("wake", "me", "up", "at", "noon", "tomorrow"))
        self.assertEqual(result.terminal, Terminal.PERIOD)

    def test_commas_are_allowed(self):
        result = filter_sentence("Well, hello there.")
        self.assertEqual(result.tokens, ("well", "hello", "there"))

    def test_rejections(self):
        cases = {
            "Hello — world.": RejectReason.FORBIDDEN_PUNCT,
            "Hello; world.": RejectReason.FORBIDDEN_PUNCT,
            "It is (maybe) fine.": RejectReason.FORBIDDEN_PUNCT,
            'He said "hi".': RejectReason.FORBIDDEN_PUNCT,
            "Look out!": RejectReason.BAD_TERMINAL,
            "No ending here": RejectReason.BAD_TERMINAL,
            "...": RejectReason.EMPTY_AFTER_NORMALIZATION,
        }
        for text, reason in cases.items():
            with self.subTest(text=text):
                result = filter_sentence(text)
                self.assertIsInstance(result, Rejection)
                self.assertEqual(result.reason, reason)

    def test_provenance_is_kept(self):
        result = filter_sentence("Wow.", doc_id="news-7", index_in_doc=3)
        self.assertEqual((result.doc_id, result.index_in_doc), ("news-7", 3))


class NormalizeSpokenTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(normalize_spoken("I'm new in town."), ["i'm", "new", "in", "town"])
        self.assertEqual(normalize_spoken("I’m new in town."), ["i'm", "new", "in", "town"])
        self.assertEqual(normalize_spoken("Meet at 3."), ["meet", "at", "three"])
        self.assertEqual(normalize_spoken("Wow."), ["wow"])

    def test_integer_expansion_oracle(self):
        for value, spoken in SPOKEN_NUMBERS.items():
            with self.subTest(value=value):
                self.assertEqual(
                    normalize_spoken(f"Meet at {value}."),
                    ["meet", "at", *spoken.split()],
                )

    def test_other_number_forms(self):
        self.assertEqual(normalize_spoken("It costs 1,200 dollars."),
                         ["it", "costs", "one", "thousand", "two", "hundred", "dollars"])
        self.assertEqual(normalize_spoken("Take 2.5 cups."),
                         ["take", "two", "point", "five", "cups"])
        self.assertEqual(normalize_spoken("The 21st day."),
                         ["the", "twenty", "first", "day"])
        self.assertEqual(normalize_spoken("Code 12345."),
                         ["code", "one", "two", "three", "four", "five"])

    def test_apostrophes_only_inside_words(self):
        self.assertEqual(normalize_spoken("The dogs' bowls aren't 'here'."),
                         ["the", "dogs", "bowls", "aren't", "here"])

    def test_idempotent_on_own_output(self):
        for text in ["How is the weather in Seattle?", "I’m new in town.",
                     "Meet at 1,234 or 2.5, ok?", "The 3rd of May, 2024."]:
            with self.subTest(text=text):
                tokens = normalize_spoken(text)
                self.assertEqual(normalize_spoken(" ".join(tokens) + "."), tokens)
                for token in tokens:
                    self.assertFalse(set(token) & FORBIDDEN_IN_TOKENS, token)


class ExampleGenerationTests(SimpleTestCase):
    def test_v2_pair(self):
        full, truncated = make_v2_examples(
            sentence("how", "is", "the", "weather", "in", "seattle"))
        self.assertEqual(full.output_text, "O O O O O eos")
        self.assertEqual(truncated.tokens, ("how", "is", "the", "weather", "in"))
        self.assertEqual(truncated.output_text, "O O O O O")
        self.assertEqual(truncated.variant, Variant.TRUNCATED)

    def test_single_token_sentence_has_no_truncated_row(self):
        full, truncated = make_v2_examples(sentence("wow"))
        self.assertEqual(full.tags, (Tag.EOS,))
        self.assertIsNone(truncated)

    def test_v3_row(self):
        rows_ = make_v3_examples(sentence("wake", "me", "up", "at", "noon"),
                                 sentence("how", "are", "you", index=1))
        self.assertEqual(len(rows_), 1)
        self.assertEqual(rows_[0].input_text, "wake me up at noon how")
        self.assertEqual(rows_[0].tags[4], Tag.EOS)
        self.assertEqual(rows_[0].tags[5], Tag.O)

    def test_document_final_sentence_has_no_lookahead_row(self):
        self.assertEqual(make_v3_examples(sentence("wow"), None), [])

    def test_example_rejects_misaligned_tags(self):
        with self.assertRaises(ValueError):
            TrainingExample(tokens=("a", "b"), tags=(Tag.O,), variant=Variant.FULL)

    def test_table_rows_without_lookahead(self):
        examples, stats = build_examples([TABLE_DOCUMENT])
        self.assertEqual(rows(examples), TABLE_1_ROWS)
        self.assertEqual(stats.sentences_kept, 3)

    def test_table_rows_with_lookahead(self):
        examples, _ = build_examples([FOLLOW_UP_DOCUMENT, TABLE_DOCUMENT], lookahead=True)
        table_one = [row for row in rows(examples) if row in TABLE_1_ROWS]
        self.assertEqual(table_one, TABLE_1_ROWS)
        lookahead = rows(examples, Variant.LOOKAHEAD)
        for row in TABLE_2_ROWS:
            self.assertIn(row, lookahead)
        # doc2's first sentence plus doc1's two non-final sentences
        self.assertEqual(len(lookahead), 3)

    def test_lookahead_never_crosses_documents(self):
        examples, _ = build_examples([TABLE_DOCUMENT, FOLLOW_UP_DOCUMENT], lookahead=True)
        inputs = [text for text, _ in rows(examples, Variant.LOOKAHEAD)]
        self.assertNotIn("wake me up at noon tomorrow wake", inputs)

    def test_pronoun_i_ends_a_sentence(self):
        doc = RawDocument("d", "So did I. We left early.")
        examples, stats = build_examples([doc], lookahead=True)
        self.assertEqual(stats.sentences_kept, 2)
        self.assertIn(("so did i", "O O eos"), rows(examples, Variant.FULL))
        self.assertEqual(rows(examples, Variant.LOOKAHEAD), [("so did i we", "O O eos O")])

    def test_lookahead_needs_the_next_piece_accepted(self):
        doc = RawDocument("d", "I like it. Really; truly. We left.")
        examples, stats = build_examples([doc], lookahead=True)
        self.assertEqual(rows(examples, Variant.LOOKAHEAD), [])
        self.assertEqual(stats.rejected[RejectReason.FORBIDDEN_PUNCT], 1)

    def test_corpus_invariants(self):
        docs = [
            TABLE_DOCUMENT,
            FOLLOW_UP_DOCUMENT,
            RawDocument("d3", "Wow. It costs 45 dollars? Hi! Fine, thanks."),
        ]
        examples, stats = build_examples(docs, lookahead=True)
        self.assertGreaterEqual(stats.examples[Variant.FULL], stats.examples[Variant.TRUNCATED])
        self.assertEqual(stats.rejected[RejectReason.BAD_TERMINAL], 1)
        for index, example in enumerate(examples):
            eos = [i for i, tag in enumerate(example.tags) if tag == Tag.EOS]
            if example.variant == Variant.FULL:
                self.assertEqual(eos, [len(example.tags) - 1])
            elif example.variant == Variant.LOOKAHEAD:
                self.assertEqual(eos, [len(example.tags) - 2])
            else:
                self.assertEqual(eos, [])
                full = examples[index - 1]
                self.assertEqual(example.tokens, full.tokens[:-1])

    def test_order_does_not_depend_on_input_order(self):
        forward, _ = build_examples([TABLE_DOCUMENT, FOLLOW_UP_DOCUMENT], lookahead=True)
        backward, _ = build_examples([FOLLOW_UP_DOCUMENT, TABLE_DOCUMENT], lookahead=True)
        self.assertEqual(forward, backward)


class CorpusFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_reads_text_and_jsonl(self):
        (self.root / "a.txt").write_text("Hello there.", encoding="utf-8")
        (self.root / "more.jsonl").write_text(
            json.dumps({"doc_id": "j1", "text": "Hi."}) + "\n", encoding="utf-8")
        docs = read_documents(self.root)
        self.assertEqual([d.doc_id for d in docs], ["a.txt", "j1"])

    def test_duplicate_doc_id(self):
        lines = [json.dumps({"doc_id": "x", "text": "A."}), json.dumps({"doc_id": "x", "text": "B."})]
        path = self.root / "dup.jsonl"
        path.write_text("\n".join(lines), encoding="utf-8")
        with self.assertRaises(CorpusError) as ctx:
            read_documents(path)
        self.assertEqual(ctx.exception.code, "DUPLICATE_DOC_ID")

    def test_bad_encoding(self):
        (self.root / "bad.txt").write_bytes(b"caf\xe9 au lait.")
        with self.assertRaises(CorpusError) as ctx:
            read_documents(self.root)
        self.assertEqual(ctx.exception.code, "BAD_ENCODING")

    def test_examples_survive_a_file_round_trip(self):
        examples, _ = build_examples([TABLE_DOCUMENT], lookahead=True)
        path = self.root / "examples.jsonl"
        write_examples(path, examples)
        self.assertEqual(read_examples(path), examples)
        first = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
        self.assertEqual(first["tags"][-1], "eos")
        self.assertEqual(first["variant"], "full")


class PrepareDataCommandTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.corpus = self.root / "corpus"
        self.corpus.mkdir()

    def tearDown(self):
        self.tmp.cleanup()

    def run_command(self, *args, **options):
        stdout, stderr = StringIO(), StringIO()
        call_command("prepare_data", *args, stdout=stdout, stderr=stderr, **options)
        return stdout.getvalue(), stderr.getvalue()

    def test_table_one_sentences(self):
        (self.corpus / "doc1.txt").write_text(TABLE_DOCUMENT.text, encoding="utf-8")
        out = self.root / "examples.jsonl"
        stdout, _ = self.run_command(str(self.corpus), str(out))
        self.assertEqual(rows(read_examples(out)), TABLE_1_ROWS)
        self.assertIn("examples full: 3", stdout)
        self.assertIn("examples truncated: 3", stdout)

    def test_lookahead_adds_table_two_rows(self):
        (self.corpus / "doc1.txt").write_text(TABLE_DOCUMENT.text, encoding="utf-8")
        (self.corpus / "doc2.txt").write_text(FOLLOW_UP_DOCUMENT.text, encoding="utf-8")
        out = self.root / "examples.jsonl"
        self.run_command(str(self.corpus), str(out), lookahead=True)
        lookahead = rows(read_examples(out), Variant.LOOKAHEAD)
        for row in TABLE_2_ROWS:
            self.assertIn(row, lookahead)

    def test_json_stats(self):
        (self.corpus / "doc.txt").write_text("Fine. Oh no! Hello; you.", encoding="utf-8")
        out = self.root / "examples.jsonl"
        stdout, _ = self.run_command(str(self.corpus), str(out), report_format="json")
        stats = json.loads(stdout)
        self.assertEqual(stats["sentences_kept"], 1)
        self.assertEqual(stats["rejected"], {"bad_terminal": 1, "forbidden_punct": 1})
        self.assertEqual(stats["examples"], {"full": 1, "truncated": 0, "lookahead": 0})
        saved = json.loads((self.root / "examples.jsonl.stats.json").read_text(encoding="utf-8"))
        self.assertEqual(saved, stats)

    def test_empty_directory_warns_and_succeeds(self):
        out = self.root / "examples.jsonl"
        _, stderr = self.run_command(str(self.corpus), str(out))
        self.assertIn("0 examples", stderr)
        self.assertEqual(out.read_text(encoding="utf-8"), "")

    def test_missing_corpus_fails(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command(str(self.root / "nope"), str(self.root / "out.jsonl"))
        self.assertNotEqual(ctx.exception.returncode, 0)
