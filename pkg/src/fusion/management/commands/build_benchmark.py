import logging
from pathlib import Path

from django.conf import settings

from corpus.examples import sentences_from_document
from corpus.io import read_documents
from fusion.benchmark import BenchmarkConfig, build_suite, write_suite
from lmeos.commands import LmeosCommand
from lmeos.config import FORMATS
from lmeos.errors import FusionError

logger = logging.getLogger(__name__)


class Command(LmeosCommand):
    help = "Synthesize timed word streams with reference boundaries from a text corpus"

    def add_arguments(self, parser):
        parser.add_argument("corpus", help="directory of .txt/.jsonl files, or one file")
        parser.add_argument("out", help="suite file to write (.jsonl)")
        parser.add_argument("--streams", type=int, default=200)
        parser.add_argument("--sentences-per-stream", type=int, default=3)
        parser.add_argument("--mid-pause-prob", type=float, default=BenchmarkConfig.mid_pause_prob)
        parser.add_argument("--end-pause-prob", type=float, default=BenchmarkConfig.end_pause_prob)
        parser.add_argument("--seed", type=int)
        parser.add_argument("--format", choices=FORMATS, default="text", dest="report_format")

    def handle(self, *args, **options):
        out = Path(options["out"])
        if not out.resolve().parent.is_dir():
            raise FusionError(f"output directory for {out} does not exist", code="PATH_NOT_FOUND")
        if options["streams"] < 1 or options["sentences_per_stream"] < 1:
            raise FusionError("--streams and --sentences-per-stream must be positive",
                              code="INVALID_BENCHMARK")
        seed = options["seed"] if options["seed"] is not None else settings.LMEOS_SEED

        sentences = []
        for doc in sorted(read_documents(options["corpus"]), key=lambda doc: doc.doc_id):
            sentences.extend(s.tokens for s in sentences_from_document(doc))
        config = BenchmarkConfig(mid_pause_prob=options["mid_pause_prob"],
                                 end_pause_prob=options["end_pause_prob"])
        suite = build_suite(sentences, options["streams"], options["sentences_per_stream"],
                            seed=seed, config=config)
        write_suite(out, suite)

        summary = {
            "sentences": len(sentences),
            "streams": len(suite),
            "words": sum(len(stream.events) for stream in suite),
            "boundaries": sum(len(stream.boundaries) for stream in suite),
        }
        if options["report_format"] == "json":
            self.write_json(summary)
            return
        for key, value in summary.items():
            self.stdout.write(f"{key + ':':<12}{value}")
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(suite)} streams to {out}"))
